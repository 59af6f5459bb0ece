"""Exported estimation filters: application, factorization, rank adaptation.

Once a filter is exported, channel estimation is a single (optionally
factored) complex matrix-vector product.  ``PrimitiveAudit`` exposes an
instrumented execution path that performs the same computation through
scalar multiply/add primitives only, recording how many of each it used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import GridSpec, PilotObservation, unvec

__all__ = [
    "AmmseFilter",
    "RankAdapter",
    "PrimitiveAudit",
    "estimate",
    "svd_factor",
    "rank_adapt",
    "effective_rank_profile",
]

_FACTOR_TOL = 1e-10


@dataclass(frozen=True)
class AmmseFilter:
    """Complex NM x L estimation filter, optionally rank-factored.

    When ``a``/``b`` are present the effective filter is a @ b.T and ``w``
    stores that product; applying the filter then costs 8r(L + NM) real
    operations instead of 8NML.
    """

    w: np.ndarray
    n_subcarriers: int
    n_symbols: int
    a: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        nm = self.n_subcarriers * self.n_symbols
        if self.w.shape[0] != nm:
            raise ValueError(f"filter has {self.w.shape[0]} rows, grid expects {nm}")
        if (self.a is None) != (self.b is None):
            raise ValueError("factored form needs both factors")
        if self.a is not None:
            if self.a.shape != (nm, self.rank) or self.b.shape != (self.pilots, self.rank):
                raise ValueError("factor shapes inconsistent with filter")
            err = np.linalg.norm(self.w - self.a @ self.b.T)
            if err > max(_FACTOR_TOL * np.linalg.norm(self.w), 1e-300):
                raise ValueError("stored filter does not match its factorization")

    @property
    def pilots(self) -> int:
        return self.w.shape[1]

    @property
    def is_factored(self) -> bool:
        return self.a is not None

    @property
    def rank(self) -> int:
        """Factored rank; 0 denotes an unfactored full filter."""
        return 0 if self.a is None else self.a.shape[1]


@dataclass(frozen=True)
class RankAdapter:
    """Trainable real factor pair restricting the effective filter rank."""

    u: np.ndarray  # L x r
    v: np.ndarray  # L x r

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ValueError("adapter factors must share a shape")
        if self.u.ndim != 2:
            raise ValueError("adapter factors must be matrices")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("adapter entries must be finite")

    @property
    def rank(self) -> int:
        return self.u.shape[1]


@dataclass
class PrimitiveAudit:
    """Records the primitive operations used by an audited estimation call."""

    counts: dict[str, int] = field(default_factory=dict)

    def record(self, kind: str, n: int = 1) -> None:
        self.counts[kind] = self.counts.get(kind, 0) + n

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def only_multiply_accumulate(self) -> bool:
        return set(self.counts) <= {"multiply", "add"} and self.total > 0


def _audited_matvec(w: np.ndarray, y: np.ndarray, audit: PrimitiveAudit) -> np.ndarray:
    """Complex matrix-vector product through scalar primitives only.

    Each complex multiply-accumulate costs 4 real multiplies and 4 real adds
    (two to combine the products, two to accumulate), i.e. 8 real operations
    per coefficient.
    """
    rows, cols = w.shape
    out = np.empty(rows, dtype=np.complex128)
    wr, wi = w.real, w.imag
    yr, yi = y.real, y.imag
    for i in range(rows):
        acc_re = 0.0
        acc_im = 0.0
        for j in range(cols):
            a, b = wr[i, j], wi[i, j]
            c, d = yr[j], yi[j]
            audit.record("multiply", 4)
            prod_re = a * c - b * d
            prod_im = a * d + b * c
            audit.record("add", 4)
            acc_re += prod_re
            acc_im += prod_im
        out[i] = complex(acc_re, acc_im)
    return out


def estimate(
    filt: AmmseFilter,
    obs: PilotObservation | np.ndarray,
    audit: PrimitiveAudit | None = None,
) -> np.ndarray:
    """vec(H_hat) = W Y_p (or A (B^T Y_p) when factored), reshaped to N x M."""
    y = obs.y_pilots if isinstance(obs, PilotObservation) else np.asarray(obs)
    if y.shape[0] != filt.pilots:
        raise ValueError(f"filter expects {filt.pilots} pilots, got {y.shape[0]}")
    if audit is None:
        if filt.is_factored:
            v = filt.a @ (filt.b.T @ y)
        else:
            v = filt.w @ y
    else:
        if filt.is_factored:
            v = _audited_matvec(filt.a, _audited_matvec(filt.b.T, y, audit), audit)
        else:
            v = _audited_matvec(filt.w, y, audit)
    return unvec(v, filt.n_subcarriers, filt.n_symbols)


def estimate_batch(filt: AmmseFilter, y_pilots: np.ndarray) -> np.ndarray:
    """Vectorized filter application; y_pilots (B, L) -> estimates (B, N, M)."""
    if filt.is_factored:
        v = (y_pilots @ filt.b) @ filt.a.T
    else:
        v = y_pilots @ filt.w.T
    b = y_pilots.shape[0]
    return v.reshape(b, filt.n_symbols, filt.n_subcarriers).transpose(0, 2, 1)


def svd_factor(filt: AmmseFilter, rank: int) -> AmmseFilter:
    """Best rank-r approximation via the SVD, stored in factored form."""
    nm, l = filt.w.shape
    if not 1 <= rank <= min(nm, l):
        raise ValueError(f"rank {rank} outside [1, {min(nm, l)}]")
    u, s, vh = np.linalg.svd(filt.w, full_matrices=False)
    a = u[:, :rank] * s[:rank]
    b = vh[:rank].T  # so that a @ b.T = u s vh truncated
    return AmmseFilter(
        w=a @ b.T,
        n_subcarriers=filt.n_subcarriers,
        n_symbols=filt.n_symbols,
        a=a,
        b=b,
    )


def rank_adapt(filt: AmmseFilter, adapter: RankAdapter) -> AmmseFilter:
    """Restrict the filter through the adapter: W -> (W U_r) V_r^T."""
    nm, l = filt.w.shape
    r = adapter.rank
    if adapter.u.shape[0] != l:
        raise ValueError(f"adapter rows {adapter.u.shape[0]} != pilot count {l}")
    if r > min(nm, l):
        raise ValueError(f"adapter rank {r} exceeds min(NM, L) = {min(nm, l)}")
    a = filt.w @ adapter.u
    b = adapter.v.astype(np.complex128)
    return AmmseFilter(
        w=a @ b.T,
        n_subcarriers=filt.n_subcarriers,
        n_symbols=filt.n_symbols,
        a=a,
        b=b,
    )


def effective_rank_profile(filt: AmmseFilter) -> np.ndarray:
    """Singular values of the effective filter, for rank-bound checks."""
    return np.linalg.svd(filt.w, compute_uv=False)
