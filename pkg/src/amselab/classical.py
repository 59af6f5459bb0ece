"""Signal-processing baseline estimators.

LS with bilinear interpolation, oracle and mismatched LMMSE, the 1D
frequency-domain LMMSE approximation, sample-covariance estimation, the
closed-form MMSE NMSE used as a Monte-Carlo oracle, and the analytic
covariance-mismatch penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .channel import (
    ChannelFrame,
    GridSpec,
    PilotObservation,
    PilotPattern,
    SeparableCovariance,
    hermitian_sqrt,
    unvec,
    vec,
)

__all__ = [
    "LmmseFilter",
    "SampleCovariance",
    "ls_estimate",
    "bilinear_interpolate",
    "ls_bilinear_estimate",
    "lmmse_filter",
    "lmmse_estimate",
    "apply_filter",
    "analytic_mmse_nmse",
    "sample_covariance",
    "oned_lmmse",
    "mismatch_penalty",
]

_PINV_TOL = 1e-10


@dataclass(frozen=True)
class LmmseFilter:
    """W = R_cross (R_pp + sigma^2 I)^(-1), NM x L."""

    w: np.ndarray
    provenance: str  # "oracle" | "mismatched"
    noise_var: float
    used_pseudoinverse: bool = False

    def __post_init__(self):
        if self.provenance not in ("oracle", "mismatched"):
            raise ValueError("provenance must be 'oracle' or 'mismatched'")
        if not np.all(np.isfinite(self.w.view(np.float64))):
            raise ValueError("filter entries must be finite")


@dataclass(frozen=True)
class SampleCovariance:
    """Empirical second moments of (vec(H), H_p) over a frame set."""

    r_cross: np.ndarray
    r_pp: np.ndarray
    sample_count: int

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample count must be >= 1")


def ls_estimate(obs: PilotObservation, pattern: PilotPattern) -> np.ndarray:
    """Per-pilot division Y_p / X_p, canonical pilot order."""
    x = pattern.pilot_values
    if np.any(x == 0):
        raise ValueError("pilot symbols must be non-zero for LS")
    return obs.y_pilots / x


def bilinear_interpolate(
    pilot_estimates: np.ndarray, pattern: PilotPattern, grid: GridSpec
) -> np.ndarray:
    """Expand per-pilot estimates to the full N x M grid.

    Along frequency within each pilot symbol: linear interpolation between
    pilots, with the nearest segment's line extended past the first/last
    pilot.  Along time: linear interpolation between pilot symbols, constant
    beyond the pilot-symbol span.  Pilot positions are preserved exactly.
    """
    if pattern.count == 0:
        raise ValueError("empty pilot pattern")
    l_sym = pattern.pilots_per_symbol
    sc = np.asarray(pattern.subcarriers, dtype=np.float64)
    all_sc = np.arange(grid.subcarriers, dtype=np.float64)
    cols = {}
    for k, m in enumerate(pattern.symbols):
        col_p = pilot_estimates[k * l_sym : (k + 1) * l_sym]
        cols[m] = _interp_extrapolate(all_sc, sc, col_p)
    return _fill_time(cols, pattern, grid)


def _fill_time(
    cols: dict[int, np.ndarray], pattern: PilotPattern, grid: GridSpec
) -> np.ndarray:
    """Linear in time between pilot symbols, constant beyond the span."""
    syms = list(pattern.symbols)
    out = np.zeros((grid.subcarriers, grid.symbols), dtype=np.complex128)
    for m in range(grid.symbols):
        if m in cols:
            out[:, m] = cols[m]
        elif m < syms[0]:
            out[:, m] = cols[syms[0]]
        elif m > syms[-1]:
            out[:, m] = cols[syms[-1]]
        else:
            j = np.searchsorted(syms, m)
            m0, m1 = syms[j - 1], syms[j]
            t = (m - m0) / (m1 - m0)
            out[:, m] = (1.0 - t) * cols[m0] + t * cols[m1]
    return out


def _interp_extrapolate(x: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    """1D linear interpolation with nearest-segment linear extrapolation."""
    if len(xp) == 1:
        return np.full(x.shape, fp[0], dtype=np.complex128)
    out = np.interp(x, xp, fp.real) + 1j * np.interp(x, xp, fp.imag)
    lo = x < xp[0]
    if np.any(lo):
        slope = (fp[1] - fp[0]) / (xp[1] - xp[0])
        out[lo] = fp[0] + slope * (x[lo] - xp[0])
    hi = x > xp[-1]
    if np.any(hi):
        slope = (fp[-1] - fp[-2]) / (xp[-1] - xp[-2])
        out[hi] = fp[-1] + slope * (x[hi] - xp[-1])
    return out


def ls_bilinear_estimate(
    obs: PilotObservation, pattern: PilotPattern, grid: GridSpec
) -> np.ndarray:
    """LS at the pilots followed by bilinear expansion to the grid."""
    return bilinear_interpolate(ls_estimate(obs, pattern), pattern, grid)


def lmmse_filter(
    r_cross: np.ndarray,
    r_pp: np.ndarray,
    noise_var: float,
    provenance: str = "oracle",
) -> LmmseFilter:
    """Wiener solution W = R_cross (R_pp + sigma^2 I)^(-1)."""
    a = r_pp + noise_var * np.eye(r_pp.shape[0])
    used_pinv = False
    try:
        # W = (A^-1 R_cross^H)^H for Hermitian A
        w = scipy.linalg.solve(a, r_cross.conj().T, assume_a="pos").conj().T
        if not np.all(np.isfinite(w.view(np.float64))):
            raise np.linalg.LinAlgError("non-finite solve result")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        w = r_cross @ np.linalg.pinv(a, rcond=_PINV_TOL)
        used_pinv = True
    return LmmseFilter(
        w=w, provenance=provenance, noise_var=noise_var, used_pseudoinverse=used_pinv
    )


def lmmse_estimate(
    filt: LmmseFilter, obs: PilotObservation, grid: GridSpec
) -> np.ndarray:
    """vec(H_hat) = W Y_p, reshaped to the grid."""
    l = filt.w.shape[1]
    if obs.y_pilots.shape[0] != l:
        raise ValueError(
            f"filter expects {l} pilots, observation has {obs.y_pilots.shape[0]}"
        )
    return apply_filter(filt.w, obs.y_pilots, grid)


def apply_filter(w: np.ndarray, y_pilots: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Apply an NM x L filter and reshape to N x M."""
    return unvec(w @ y_pilots, grid.subcarriers, grid.symbols)


def analytic_mmse_nmse(
    cov: SeparableCovariance, pattern: PilotPattern, noise_var: float
) -> float:
    """Closed-form NMSE of the oracle LMMSE estimator.

    [tr(R_full) - tr(R_cross (R_pp + sigma^2 I)^(-1) R_cross^H)] / tr(R_full).
    """
    from .channel import pilot_covariances

    r_cross, r_pp = pilot_covariances(cov, pattern)
    a = r_pp + noise_var * np.eye(r_pp.shape[0])
    if noise_var > 0:
        x = scipy.linalg.solve(a, r_cross.conj().T, assume_a="pos")
    else:
        x = np.linalg.pinv(a, rcond=_PINV_TOL) @ r_cross.conj().T
    total = cov.n_subcarriers * cov.n_symbols  # unit-diagonal correlations
    recovered = float(np.sum(r_cross * x.T).real)
    return (total - recovered) / total


def sample_covariance(
    frames: Sequence[ChannelFrame] | Sequence[np.ndarray], pattern: PilotPattern
) -> SampleCovariance:
    """Empirical averages of vec(H) H_p^H and H_p H_p^H."""
    if len(frames) == 0:
        raise ValueError("at least one frame is required")
    idx = pattern.flat_indices()
    hs = np.stack([f.h if isinstance(f, ChannelFrame) else f for f in frames])
    count = hs.shape[0]
    # column-major vec per frame: (B, N, M) -> (B, NM) with index n + N*m
    v = hs.transpose(0, 2, 1).reshape(count, -1)
    hp = v[:, idx]
    r_cross = v.T @ hp.conj() / count  # (NM x B)(B x L)
    r_pp = hp.T @ hp.conj() / count
    return SampleCovariance(r_cross=r_cross, r_pp=r_pp, sample_count=count)


def oned_lmmse(
    obs: PilotObservation,
    r_freq: np.ndarray,
    noise_var: float,
    pattern: PilotPattern,
    grid: GridSpec,
) -> np.ndarray:
    """1D frequency-domain LMMSE.

    Per pilot symbol, the frequency axis is filtered with
    R_f[K, P] (R_f[P, P] + sigma^2 I)^(-1) applied to the LS estimates;
    the remaining symbols are filled by linear interpolation in time
    (constant beyond the pilot-symbol span).
    """
    if not pattern.symbols:
        raise ValueError("pattern has no pilot symbols")
    h_ls = ls_estimate(obs, pattern)
    sc = list(pattern.subcarriers)
    r_kp = r_freq[:, sc]
    r_pp = r_freq[np.ix_(sc, sc)]
    a = r_pp + noise_var * np.eye(len(sc))
    try:
        w_1d = scipy.linalg.solve(a, r_kp.conj().T, assume_a="pos").conj().T
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        w_1d = r_kp @ np.linalg.pinv(a, rcond=_PINV_TOL)
    l_sym = pattern.pilots_per_symbol
    cols = {}
    for k, m in enumerate(pattern.symbols):
        cols[m] = w_1d @ h_ls[k * l_sym : (k + 1) * l_sym]
    return _fill_time(cols, pattern, grid)


def mismatch_penalty(
    w_mismatched: np.ndarray, w_star: np.ndarray, sigma_yy: np.ndarray
) -> float:
    """Covariance-mismatch penalty ||(W_mis - W*) Sigma_yy^(1/2)||_F^2."""
    root = hermitian_sqrt(sigma_yy)
    delta = (w_mismatched - w_star) @ root
    return float(np.sum(np.abs(delta) ** 2))
