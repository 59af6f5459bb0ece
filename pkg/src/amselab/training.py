"""Dataset generation, temporal splitting, the training loop, and filter
extraction.

Training minimizes the batch-averaged per-frame loss of the linearly applied
network output: for each frame, the network maps the real-stacked pilot
vector to filter coefficients, the filter is applied to the same pilots, and
the residual against the true channel feeds the Huber (default) or MSE
objective.  The deployed filter is the complex entrywise mean of the
network's per-frame outputs over a calibration split and stays fixed
afterwards.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from .ammse import (
    AmmseConfig,
    AmmseFilter,
    assemble_filter,
    estimate_batch,
    filter_apply_nodes,
    forward_filter,
    init_params,
    wrap_params,
)
from .channel import (
    GridSpec,
    PilotPattern,
    ScenarioConfig,
    apply_drift,
    build_frequency_correlation,
    build_temporal_correlation,
    frame_rng,
    hermitian_sqrt,
)
from .numerics import AdamState, adam_step, backward, concat, huber_objective, \
    mse_objective, sub
from .numerics.autodiff import constant

__all__ = [
    "SnrPolicy",
    "Dataset",
    "HuberDeltaPolicy",
    "TrainConfig",
    "Checkpoint",
    "TrainingDiverged",
    "generate_dataset",
    "temporal_split",
    "huber_delta",
    "train",
    "extract_filter",
    "inject_outliers",
]


@dataclass(frozen=True)
class SnrPolicy:
    """Per-frame SNR assignment: a fixed level or a uniform range."""

    kind: str = "fixed"  # "fixed" | "uniform"
    value: float = 20.0
    low: float = 0.0
    high: float = 30.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ValueError("snr policy kind must be 'fixed' or 'uniform'")
        if self.kind == "uniform" and self.low > self.high:
            raise ValueError("snr range is inverted")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed":
            return float(self.value)
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class Dataset:
    """Ordered frames with their noisy pilot observations.

    ``h`` is (F, N, M) complex, ``y_pilots`` (F, L) complex, ``snr_db`` and
    ``indices`` length F.  ``x_in`` stacks [Re(Y_p); Im(Y_p)] row-wise.
    """

    h: np.ndarray
    y_pilots: np.ndarray
    snr_db: np.ndarray
    indices: np.ndarray
    grid: GridSpec
    pattern: PilotPattern
    scenario: ScenarioConfig
    master_seed: int
    snr_policy: SnrPolicy

    def __post_init__(self):
        if not (len(self.h) == len(self.y_pilots) == len(self.snr_db) == len(self.indices)):
            raise ValueError("frame arrays must have equal length")
        if np.any(np.diff(self.indices) <= 0):
            raise ValueError("frames must be ordered by strictly increasing index")

    def __len__(self) -> int:
        return len(self.h)

    @property
    def x_in(self) -> np.ndarray:
        return np.concatenate([self.y_pilots.real, self.y_pilots.imag], axis=1)

    @property
    def h_vec(self) -> np.ndarray:
        """Column-major vec(H) per frame, (F, NM)."""
        return self.h.transpose(0, 2, 1).reshape(len(self), -1)

    def subset(self, sl: slice) -> "Dataset":
        return replace(
            self,
            h=self.h[sl],
            y_pilots=self.y_pilots[sl],
            snr_db=self.snr_db[sl],
            indices=self.indices[sl],
        )


def generate_dataset(
    scenario: ScenarioConfig,
    grid: GridSpec,
    pattern: PilotPattern,
    frame_count: int,
    snr_policy: SnrPolicy,
    master_seed: int,
    start_index: int = 0,
) -> Dataset:
    """Sequential frames with per-index drift, deterministic under the seed.

    Each frame consumes its own generator derived from (master seed, frame
    index): channel Gaussians first, then the SNR draw, then pilot noise.
    """
    if frame_count < 1:
        raise ValueError("frame count must be >= 1")
    n, m = grid.subcarriers, grid.symbols
    idx = pattern.flat_indices()
    sqrt_cache: dict[tuple[float, float], tuple[np.ndarray, np.ndarray]] = {}
    hs = np.empty((frame_count, n, m), dtype=np.complex128)
    ys = np.empty((frame_count, pattern.count), dtype=np.complex128)
    snrs = np.empty(frame_count)
    indices = np.arange(start_index, start_index + frame_count)
    for k, frame_index in enumerate(indices):
        tau, f_d = apply_drift(scenario, int(frame_index))
        key = (tau, f_d)
        roots = sqrt_cache.get(key)
        if roots is None:
            r_f = build_frequency_correlation(tau, grid.subcarrier_spacing_hz, n)
            r_t = build_temporal_correlation(f_d, grid.symbol_duration_s, m,
                                             scenario.rician_k_db)
            roots = (hermitian_sqrt(r_f), hermitian_sqrt(r_t))
            sqrt_cache[key] = roots
        s_f, s_t = roots
        rng = frame_rng(master_seed, int(frame_index))
        g = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
        h = s_f @ g @ s_t.T
        snr = snr_policy.draw(rng)
        sigma2 = 10.0 ** (-snr / 10.0)
        z = (rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx)))
        y = h.flatten(order="F")[idx] * pattern.pilot_values + z * np.sqrt(sigma2 / 2)
        hs[k], ys[k], snrs[k] = h, y, snr
    return Dataset(hs, ys, snrs, indices, grid, pattern, scenario, master_seed,
                   snr_policy)


def temporal_split(
    dataset: Dataset, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> tuple[Dataset, Dataset, Dataset]:
    """Contiguous chronological split: earliest -> train, then val, then test."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("three positive fractions required")
    if sum(fractions) > 1.0 + 1e-9:
        raise ValueError("fractions must sum to at most 1")
    n = len(dataset)
    counts = [int(round(f * n)) for f in fractions]
    if sum(counts) > n:
        counts[-1] = n - counts[0] - counts[1]
    if any(c < 1 for c in counts):
        raise ValueError(f"split produces an empty slice: {counts}")
    a, b = counts[0], counts[0] + counts[1]
    c = b + counts[2]
    return dataset.subset(slice(0, a)), dataset.subset(slice(a, b)), dataset.subset(slice(b, c))


@dataclass(frozen=True)
class HuberDeltaPolicy:
    """Threshold schedule: fixed, or inverse to the operating SNR."""

    kind: str = "snr"  # "snr" | "fixed"
    value: float = 0.1
    min_delta: float = 0.01
    max_delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("snr", "fixed"):
            raise ValueError("delta policy kind must be 'snr' or 'fixed'")
        if self.kind == "fixed" and self.value <= 0:
            raise ValueError("fixed delta must be positive")


def huber_delta(snr_db: float | np.ndarray, policy: HuberDeltaPolicy) -> np.ndarray:
    """delta = clamp(10^(-snr/20), min, max) under the SNR policy."""
    snr = np.asarray(snr_db, dtype=np.float64)
    if policy.kind == "fixed":
        return np.broadcast_to(np.float64(policy.value), snr.shape).copy()
    return np.clip(10.0 ** (-snr / 20.0), policy.min_delta, policy.max_delta)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss: str = "huber"  # "huber" | "mse"
    delta_policy: HuberDeltaPolicy = field(default_factory=HuberDeltaPolicy)
    seed: int = 0
    patience: int = 10
    checkpoint_every: int = 0  # epochs between on_epoch callbacks; 0 = never
    calibration: str = "validation"  # "validation" | "train"

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be >= 1")
        if self.loss not in ("huber", "mse"):
            raise ValueError("loss must be 'huber' or 'mse'")
        if self.calibration not in ("validation", "train"):
            raise ValueError("calibration split must be 'validation' or 'train'")


@dataclass
class Checkpoint:
    """Everything needed to resume training or export the deployed filter."""

    params: dict[str, np.ndarray]
    adam: AdamState
    epoch: int
    train_loss_history: list[float]
    val_nmse_history: list[float]
    best_params: dict[str, np.ndarray]
    best_val_nmse: float
    best_epoch: int
    net_config: AmmseConfig
    train_config: TrainConfig


class TrainingDiverged(RuntimeError):
    """Raised on a non-finite loss; carries the last finite checkpoint."""

    def __init__(self, message: str, checkpoint: Checkpoint):
        super().__init__(message)
        self.checkpoint = checkpoint


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(0x5E9, epoch))
    )
    return rng.permutation(n)


def _batch_loss_and_grads(
    params: dict[str, np.ndarray],
    net_config: AmmseConfig,
    x_in: np.ndarray,
    y_pilots: np.ndarray,
    h_vec: np.ndarray,
    deltas: np.ndarray,
    loss_kind: str,
) -> tuple[float, dict[str, np.ndarray]]:
    nodes = wrap_params(params)
    y_dec = forward_filter(x_in, nodes, net_config)
    est_re, est_im = filter_apply_nodes(y_dec, y_pilots)
    t_re = constant(h_vec.real[..., None])
    t_im = constant(h_vec.imag[..., None])
    resid = concat([sub(est_re, t_re), sub(est_im, t_im)], axis=-2)
    if loss_kind == "huber":
        loss = huber_objective(resid, deltas[:, None, None])
    else:
        loss = mse_objective(resid)
    backward(loss)
    grads = {
        name: node.grad if node.grad is not None else np.zeros_like(node.value)
        for name, node in nodes.items()
    }
    return float(loss.value), grads


def extract_filter(
    params: dict[str, np.ndarray],
    net_config: AmmseConfig,
    calibration: Dataset,
    batch_size: int = 64,
) -> AmmseFilter:
    """Complex entrywise mean of the per-frame network outputs.

    The returned filter is the one deployed at test time; it stays fixed
    and is applied to every observation without further adaptation.
    """
    if len(calibration) < 1:
        raise ValueError("at least one calibration frame is required")
    nodes = wrap_params(params)
    x = calibration.x_in
    total = np.zeros((net_config.proj_dim, net_config.pilots), dtype=np.complex128)
    for start in range(0, len(calibration), batch_size):
        chunk = x[start : start + batch_size]
        y_dec = forward_filter(chunk, nodes, net_config)
        total += assemble_filter(y_dec.value).sum(axis=0)
    w = total / len(calibration)
    return AmmseFilter(w, net_config.subcarriers, net_config.symbols)


def _validation_nmse(
    params: dict[str, np.ndarray],
    net_config: AmmseConfig,
    calibration: Dataset,
    validation: Dataset,
) -> float:
    filt = extract_filter(params, net_config, calibration)
    est = estimate_batch(filt, validation.y_pilots)
    num = float(np.sum(np.abs(validation.h - est) ** 2))
    den = float(np.sum(np.abs(validation.h) ** 2))
    return num / den


def train(
    train_set: Dataset,
    validation: Dataset,
    net_config: AmmseConfig,
    config: TrainConfig,
    resume: Checkpoint | None = None,
    on_epoch=None,
) -> Checkpoint:
    """Mini-batch training loop returning the best-validation checkpoint.

    Per batch: forward to per-frame filters, linear application to the
    pilots, residual loss averaged over the batch and all real components,
    backprop, one Adam step.  After each epoch the deployed (averaged)
    filter is rebuilt and scored on the validation split; early stopping
    follows that score with the configured patience.
    """
    if len(train_set) < 1:
        raise ValueError("training split is empty")
    if resume is not None:
        params = {k: v.copy() for k, v in resume.params.items()}
        adam = copy.deepcopy(resume.adam)
        start_epoch = resume.epoch
        train_hist = list(resume.train_loss_history)
        val_hist = list(resume.val_nmse_history)
        best_params = {k: v.copy() for k, v in resume.best_params.items()}
        best_val = resume.best_val_nmse
        best_epoch = resume.best_epoch
    else:
        params = init_params(net_config, config.seed)
        adam = AdamState(
            learning_rate=config.learning_rate,
            beta1=config.beta1,
            beta2=config.beta2,
            epsilon=config.epsilon,
        )
        start_epoch = 0
        train_hist, val_hist = [], []
        best_params = {k: v.copy() for k, v in params.items()}
        best_val = np.inf
        best_epoch = -1

    calibration = validation if config.calibration == "validation" else train_set
    x_all = train_set.x_in
    y_all = train_set.y_pilots
    hv_all = train_set.h_vec
    deltas_all = huber_delta(train_set.snr_db, config.delta_policy)

    def snapshot(epoch: int) -> Checkpoint:
        return Checkpoint(
            params={k: v.copy() for k, v in params.items()},
            adam=copy.deepcopy(adam),
            epoch=epoch,
            train_loss_history=list(train_hist),
            val_nmse_history=list(val_hist),
            best_params={k: v.copy() for k, v in best_params.items()},
            best_val_nmse=float(best_val),
            best_epoch=best_epoch,
            net_config=net_config,
            train_config=config,
        )

    stale = 0
    final_epoch = start_epoch
    for epoch in range(start_epoch, config.epochs):
        final_epoch = epoch + 1
        perm = _epoch_permutation(config.seed, epoch, len(train_set))
        epoch_losses = []
        for start in range(0, len(perm), config.batch_size):
            sel = perm[start : start + config.batch_size]
            loss, grads = _batch_loss_and_grads(
                params, net_config, x_all[sel], y_all[sel], hv_all[sel],
                deltas_all[sel], config.loss,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}",
                    snapshot(epoch),
                )
            adam_step(params, grads, adam)
            epoch_losses.append(loss)
        train_hist.append(float(np.mean(epoch_losses)))
        val_nmse = _validation_nmse(params, net_config, calibration, validation)
        val_hist.append(val_nmse)
        if val_nmse < best_val:
            best_val = val_nmse
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
            stale = 0
        else:
            stale += 1
        if on_epoch is not None and config.checkpoint_every > 0:
            if (epoch + 1) % config.checkpoint_every == 0:
                on_epoch(snapshot(epoch + 1))
        if stale > config.patience:
            break
    return snapshot(final_epoch)


def inject_outliers(
    dataset: Dataset, fraction: float, scale: float, seed: int
) -> Dataset:
    """Replace a fraction of pilot noise samples with ``scale``-times noise.

    Adds CN(0, (scale^2 - 1) sigma^2) on the selected pilot entries, which
    turns their total noise variance into scale^2 sigma^2.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    if scale < 1.0:
        raise ValueError("outlier scale must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xA11,)))
    y = dataset.y_pilots.copy()
    mask = rng.random(y.shape) < fraction
    sigma2 = (10.0 ** (-dataset.snr_db / 10.0))[:, None]
    extra = np.sqrt((scale**2 - 1.0) * sigma2 / 2.0)
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    y = y + np.where(mask, noise * extra, 0.0)
    return replace(dataset, y_pilots=y)
