"""Two-stage attention network that maps noisy pilots to a linear filter.

Pipeline: scalar embedding of the real-stacked pilot vector into width N,
a frequency encoder block, a projection into width N*M, a temporal encoder
block (one head per OFDM symbol), a residual fully connected decoder, and
complex reassembly of the 2L x NM output into the NM x L estimation filter.

Every stage accepts a single sample (2L x d) or a batch (B x 2L x d); the
batched path is what the training loop drives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import GridSpec, PilotPattern
from ..numerics import (
    Tensor,
    add,
    concat,
    constant,
    layer_norm,
    matmul,
    parameter,
    permute,
    reshape,
    scaled_dot_product_attention,
    slice_axis,
    sub,
    transpose,
)

__all__ = [
    "AmmseConfig",
    "param_shapes",
    "init_params",
    "validate_params",
    "wrap_params",
    "embed_pilots",
    "frequency_encode",
    "project",
    "temporal_encode",
    "decode",
    "forward_filter",
    "assemble_filter",
    "disassemble_filter",
    "filter_apply_nodes",
]


@dataclass(frozen=True)
class AmmseConfig:
    """Architecture hyperparameters tied to the grid and pilot pattern.

    The embedding width equals the subcarrier count N, the projection width
    equals N*M, and the temporal encoder uses one head per OFDM symbol.  The
    frequency-encoder head count defaults to the pilots-per-symbol count.
    """

    subcarriers: int
    symbols: int
    pilots: int
    freq_heads: int
    ffn_multiplier: int = 4
    decoder_blocks: int = 2
    decoder_hidden: int | None = None
    decoder_axis: str = "pilots"  # "pilots" | "features"
    activation: str = "relu"
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        if min(self.subcarriers, self.symbols, self.pilots, self.freq_heads) < 1:
            raise ValueError("dimensions and head counts must be positive")
        if self.embed_dim % self.freq_heads != 0:
            raise ValueError(
                f"embedding width {self.embed_dim} not divisible by "
                f"{self.freq_heads} frequency heads"
            )
        if self.proj_dim % self.temporal_heads != 0:
            raise ValueError("projection width not divisible by temporal head count")
        if self.decoder_blocks < 1:
            raise ValueError("decoder needs at least one residual block")
        if self.decoder_axis not in ("pilots", "features"):
            raise ValueError("decoder axis must be 'pilots' or 'features'")

    @property
    def embed_dim(self) -> int:
        """d_e = N."""
        return self.subcarriers

    @property
    def proj_dim(self) -> int:
        """d_p = N*M."""
        return self.subcarriers * self.symbols

    @property
    def temporal_heads(self) -> int:
        """One attention head per OFDM symbol."""
        return self.symbols

    @property
    def decoder_width(self) -> int:
        return self.decoder_hidden if self.decoder_hidden is not None else self.proj_dim

    @staticmethod
    def for_pattern(grid: GridSpec, pattern: PilotPattern, **kwargs) -> "AmmseConfig":
        kwargs.setdefault("freq_heads", pattern.pilots_per_symbol)
        return AmmseConfig(
            subcarriers=grid.subcarriers,
            symbols=grid.symbols,
            pilots=pattern.count,
            **kwargs,
        )


def _encoder_shapes(prefix: str, width: int, heads: int, ffn_mult: int) -> dict:
    head_dim = width // heads
    shapes = {}
    for i in range(heads):
        shapes[f"{prefix}.head{i:02d}.wq"] = (width, head_dim)
        shapes[f"{prefix}.head{i:02d}.wk"] = (width, head_dim)
        shapes[f"{prefix}.head{i:02d}.wv"] = (width, head_dim)
    shapes[f"{prefix}.wo"] = (width, width)
    shapes[f"{prefix}.ln1.g"] = (width,)
    shapes[f"{prefix}.ln1.b"] = (width,)
    hidden = ffn_mult * width
    shapes[f"{prefix}.ffn.w1"] = (width, hidden)
    shapes[f"{prefix}.ffn.b1"] = (hidden,)
    shapes[f"{prefix}.ffn.w2"] = (hidden, width)
    shapes[f"{prefix}.ffn.b2"] = (width,)
    shapes[f"{prefix}.ln2.g"] = (width,)
    shapes[f"{prefix}.ln2.b"] = (width,)
    return shapes


def param_shapes(config: AmmseConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter catalog, insertion-ordered by pipeline stage."""
    shapes: dict[str, tuple[int, ...]] = {
        "emb.w": (1, config.embed_dim),
        "emb.b": (config.embed_dim,),
    }
    shapes.update(_encoder_shapes("freq", config.embed_dim, config.freq_heads,
                                  config.ffn_multiplier))
    shapes["proj.w"] = (config.embed_dim, config.proj_dim)
    shapes["proj.b"] = (config.proj_dim,)
    shapes.update(_encoder_shapes("temp", config.proj_dim, config.temporal_heads,
                                  config.ffn_multiplier))
    rows = 2 * config.pilots
    for i in range(config.decoder_blocks):
        if config.decoder_axis == "pilots":
            shapes[f"dec.block{i}.w1"] = (config.decoder_width, rows)
            shapes[f"dec.block{i}.b1"] = (config.decoder_width, 1)
            shapes[f"dec.block{i}.w2"] = (rows, config.decoder_width)
            shapes[f"dec.block{i}.b2"] = (rows, 1)
        else:
            shapes[f"dec.block{i}.w1"] = (config.proj_dim, config.decoder_width)
            shapes[f"dec.block{i}.b1"] = (config.decoder_width,)
            shapes[f"dec.block{i}.w2"] = (config.decoder_width, config.proj_dim)
            shapes[f"dec.block{i}.b2"] = (config.proj_dim,)
    return shapes


def init_params(config: AmmseConfig, seed: int) -> dict[str, np.ndarray]:
    """Scaled uniform fan-in init; biases zero, layer-norm gains one."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x1217,)))
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith((".b", ".b1", ".b2")) and not name.startswith("emb"):
            params[name] = np.zeros(shape)
        elif name.endswith(".g"):
            params[name] = np.ones(shape)
        elif len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def validate_params(config: AmmseConfig, params: dict[str, np.ndarray]) -> None:
    expected = param_shapes(config)
    if set(params) != set(expected):
        missing = set(expected) - set(params)
        extra = set(params) - set(expected)
        raise ValueError(f"parameter set mismatch: missing {missing}, extra {extra}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ValueError(f"{name}: expected shape {shape}, got {params[name].shape}")
        if not np.all(np.isfinite(params[name])):
            raise ValueError(f"{name}: non-finite entries")


def wrap_params(params: dict[str, np.ndarray]) -> dict[str, Tensor]:
    """Wrap arrays as differentiable graph leaves for one training step."""
    return {name: parameter(value) for name, value in params.items()}


def _rowwise(x: Tensor, w: Tensor) -> Tensor:
    """Row-wise matmul; flattens a batched input into one GEMM."""
    if len(x.shape) == 3:
        b, s, d = x.shape
        out = matmul(reshape(x, (b * s, d)), w)
        return reshape(out, (b, s, out.shape[-1]))
    return matmul(x, w)


def embed_pilots(x_in, w, b) -> Tensor:
    """Each scalar x_i becomes the row x_i * P_emb + b_emb."""
    x = x_in if isinstance(x_in, Tensor) else constant(x_in)
    if len(x.shape) == 1:
        x = reshape(x, (x.shape[0], 1))
    else:
        x = reshape(x, (*x.shape, 1))
    return add(_rowwise(x, w), b)


def _packed_attention(x: Tensor, p: dict[str, Tensor], prefix: str, heads: int) -> Tensor:
    """Multi-head self-attention with all heads fused into one batched call.

    Equivalent to ``numerics.multi_head_attention`` over the same per-head
    parameters (the composition-oracle tests pin this), but issues one wide
    GEMM for all Q/K/V projections and runs the per-head attention as a
    single batched product over batch*heads, which the narrow per-head
    operands cannot saturate.
    """
    batched = len(x.shape) == 3
    b = x.shape[0] if batched else 1
    s, d = x.shape[-2], x.shape[-1]
    head_dim = d // heads
    packed = concat(
        [p[f"{prefix}.head{i:02d}.wq"] for i in range(heads)]
        + [p[f"{prefix}.head{i:02d}.wk"] for i in range(heads)]
        + [p[f"{prefix}.head{i:02d}.wv"] for i in range(heads)],
        axis=-1,
    )
    qkv = _rowwise(x, packed)  # (..., s, 3d)
    # expose heads for batched attention: (b*3h, s, head_dim) with the
    # q/k/v and head axes leading
    parts = reshape(qkv, (b, s, 3 * heads, head_dim))
    parts = reshape(permute(parts, (0, 2, 1, 3)), (b, 3 * heads, s, head_dim))
    q = slice_axis(parts, 0, heads, axis=-3)
    k = slice_axis(parts, heads, 2 * heads, axis=-3)
    v = slice_axis(parts, 2 * heads, 3 * heads, axis=-3)
    attended = scaled_dot_product_attention(q, k, v)  # (b, h, s, head_dim)
    merged = reshape(permute(attended, (0, 2, 1, 3)), (b, s, d))
    if not batched:
        merged = reshape(merged, (s, d))
    return _rowwise(merged, p[f"{prefix}.wo"])


def _encoder_block(x: Tensor, p: dict[str, Tensor], prefix: str, heads: int,
                   activation: str, eps: float) -> Tensor:
    """Post-norm block: MHA -> Add & Norm -> FFN -> Add & Norm."""
    attended = _packed_attention(x, p, prefix, heads)
    x1 = layer_norm(add(x, attended), p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"], eps)
    f = _rowwise_ffn(x1, p[f"{prefix}.ffn.w1"], p[f"{prefix}.ffn.b1"],
                     p[f"{prefix}.ffn.w2"], p[f"{prefix}.ffn.b2"], activation)
    return layer_norm(add(x1, f), p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"], eps)


def _rowwise_ffn(x: Tensor, w1, b1, w2, b2, activation: str) -> Tensor:
    from ..numerics import ACTIVATIONS

    act = ACTIVATIONS[activation]
    hidden = act(add(_rowwise(x, w1), b1))
    return add(_rowwise(hidden, w2), b2)


def frequency_encode(x_emb, params: dict[str, Tensor], config: AmmseConfig) -> Tensor:
    x = x_emb if isinstance(x_emb, Tensor) else constant(x_emb)
    if x.shape[-1] != config.embed_dim:
        raise ValueError(f"expected width {config.embed_dim}, got {x.shape[-1]}")
    return _encoder_block(x, params, "freq", config.freq_heads, config.activation,
                          config.layer_norm_eps)


def project(y_freq, w, b) -> Tensor:
    """Row-wise affine lift from width N to width N*M."""
    y = y_freq if isinstance(y_freq, Tensor) else constant(y_freq)
    return add(_rowwise(y, w), b)


def temporal_encode(x_proj, params: dict[str, Tensor], config: AmmseConfig) -> Tensor:
    x = x_proj if isinstance(x_proj, Tensor) else constant(x_proj)
    if x.shape[-1] != config.proj_dim:
        raise ValueError(f"expected width {config.proj_dim}, got {x.shape[-1]}")
    return _encoder_block(x, params, "temp", config.temporal_heads, config.activation,
                          config.layer_norm_eps)


def decode(y_temp, params: dict[str, Tensor], config: AmmseConfig) -> Tensor:
    """Residual stack: x <- x + W2 act(W1 x + b1) + b2 per row."""
    x = y_temp if isinstance(y_temp, Tensor) else constant(y_temp)
    for i in range(config.decoder_blocks):
        f = _rowwise_ffn(
            x,
            params[f"dec.block{i}.w1"], params[f"dec.block{i}.b1"],
            params[f"dec.block{i}.w2"], params[f"dec.block{i}.b2"],
            config.activation,
        )
        x = add(x, f)
    return x


def forward_filter(x_in, params: dict[str, Tensor], config: AmmseConfig) -> Tensor:
    """Full pipeline x_in -> Y_Dec (2L x NM rows of filter coefficients)."""
    x_emb = embed_pilots(x_in, params["emb.w"], params["emb.b"])
    y_freq = frequency_encode(x_emb, params, config)
    x_proj = project(y_freq, params["proj.w"], params["proj.b"])
    y_temp = temporal_encode(x_proj, params, config)
    return decode(y_temp, params, config)


def assemble_filter(y_dec: np.ndarray) -> np.ndarray:
    """Rows 0..L-1 are the real part, rows L..2L-1 the imaginary part.

    Returns W = (W_real + j W_imag)^T of shape (..., NM, L).
    """
    y = np.asarray(y_dec, dtype=np.float64)
    rows = y.shape[-2]
    if rows % 2 != 0:
        raise ValueError("decoder output must have an even row count")
    half = rows // 2
    w_out = y[..., :half, :] + 1j * y[..., half:, :]
    return np.swapaxes(w_out, -1, -2)


def disassemble_filter(w: np.ndarray) -> np.ndarray:
    """Inverse of :func:`assemble_filter`."""
    w_out = np.swapaxes(np.asarray(w), -1, -2)
    return np.concatenate([w_out.real, w_out.imag], axis=-2)


def filter_apply_nodes(y_dec: Tensor, y_pilots: np.ndarray) -> tuple[Tensor, Tensor]:
    """In-graph application of the assembled filter to pilot observations.

    ``y_dec`` is (B, 2L, NM) or (2L, NM); ``y_pilots`` complex (B, L) or (L,).
    Returns real and imaginary parts of vec(H_hat) as (..., NM, 1) tensors.
    """
    y = np.asarray(y_pilots)
    batched = len(y_dec.shape) == 3
    half = y_dec.shape[-2] // 2
    if y.shape[-1] != half:
        raise ValueError(f"pilot count {y.shape[-1]} != filter column count {half}")
    u = constant(y.real[..., None])
    v = constant(y.imag[..., None])
    w_real_t = transpose(slice_axis(y_dec, 0, half, axis=-2))
    w_imag_t = transpose(slice_axis(y_dec, half, 2 * half, axis=-2))
    if batched and len(y.shape) != 2:
        raise ValueError("batched decoder output needs batched pilots")
    est_re = sub(matmul(w_real_t, u), matmul(w_imag_t, v))
    est_im = add(matmul(w_real_t, v), matmul(w_imag_t, u))
    return est_re, est_im
