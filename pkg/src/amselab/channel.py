"""Synthetic OFDM channel generation with separable frequency/time correlation.

The channel model is wide-sense stationary with uncorrelated scattering, so
its second-order statistics factor into a frequency-domain correlation
(exponential power-delay profile) and a temporal correlation (Jakes spectrum
plus an optional Rician line-of-sight term).  Frames are drawn as

    H = R_f^(1/2) @ G @ R_t^(1/2).T,   G ~ iid CN(0, 1),

so that vec(H) (column-major) has covariance R_t (x) R_f.  Controlled
non-stationarity is injected by smoothly modulating the delay spread and the
Doppler frequency as a function of the frame index.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import j0

SPEED_OF_LIGHT = 2.998e8  # m/s

__all__ = [
    "SPEED_OF_LIGHT",
    "GridSpec",
    "PilotPattern",
    "DriftConfig",
    "ScenarioConfig",
    "SeparableCovariance",
    "ChannelFrame",
    "PilotObservation",
    "doppler_frequency",
    "pilot_count",
    "build_pilot_pattern",
    "build_frequency_correlation",
    "build_temporal_correlation",
    "build_covariance",
    "hermitian_sqrt",
    "sample_channel",
    "sample_channel_batch",
    "apply_drift",
    "observe_pilots",
    "pilot_covariances",
    "frame_rng",
    "vec",
    "unvec",
]


def vec(h: np.ndarray) -> np.ndarray:
    """Column-major vectorization: entry (n, m) lands at index n + N*m."""
    return np.asarray(h).flatten(order="F")


def unvec(v: np.ndarray, n_subcarriers: int, n_symbols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape((n_subcarriers, n_symbols), order="F")


@dataclass(frozen=True)
class GridSpec:
    """One OFDM slot: N subcarriers by M symbols."""

    subcarriers: int
    symbols: int
    subcarrier_spacing_hz: float
    symbol_duration_s: float

    def __post_init__(self):
        if self.subcarriers < 1 or self.symbols < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.subcarrier_spacing_hz <= 0 or self.symbol_duration_s <= 0:
            raise ValueError("subcarrier spacing and symbol duration must be positive")

    @property
    def resource_elements(self) -> int:
        return self.subcarriers * self.symbols


@dataclass(frozen=True)
class PilotPattern:
    """Comb-type pilot placement on a grid.

    Pilot indices are ordered by flat column-major grid index
    (n + N*m), i.e. all pilot subcarriers of the earliest pilot symbol
    first.  ``pilot_values`` holds the known transmitted symbols X at the
    pilot positions (all ones by default; unit modulus loses no generality
    because LS divides them out).
    """

    subcarriers: tuple[int, ...]
    symbols: tuple[int, ...]
    comb: int
    grid: GridSpec
    pilot_values: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.pilot_values is None:
            object.__setattr__(
                self, "pilot_values", np.ones(self.count, dtype=np.complex128)
            )
        elif len(self.pilot_values) != self.count:
            raise ValueError("pilot_values length must equal pilot count")

    @property
    def count(self) -> int:
        """L = |P|."""
        return len(self.subcarriers) * len(self.symbols)

    @property
    def pilots_per_symbol(self) -> int:
        return len(self.subcarriers)

    def pairs(self) -> list[tuple[int, int]]:
        """Pilot positions as (subcarrier, symbol) pairs in canonical order."""
        return [(n, m) for m in self.symbols for n in self.subcarriers]

    def flat_indices(self) -> np.ndarray:
        """Column-major flat indices of the pilots into vec(H)."""
        n = np.asarray(self.subcarriers)
        out = [n + self.grid.subcarriers * m for m in self.symbols]
        return np.concatenate(out)

    def extract(self, h: np.ndarray) -> np.ndarray:
        """H restricted to the pilot positions, canonical pilot order."""
        return vec(h)[self.flat_indices()]


@dataclass(frozen=True)
class DriftConfig:
    """Multiplicative modulation of delay spread and Doppler over frames.

    The deterministic part is sinusoidal, ``1 + amplitude*sin(2*pi*k/period)``;
    ``walk_std > 0`` adds a slow seeded log-domain random walk on top.
    """

    delay_amplitude: float = 0.0
    doppler_amplitude: float = 0.0
    period_frames: int = 1000
    walk_std: float = 0.0
    walk_seed: int = 0

    def __post_init__(self):
        if self.period_frames < 1:
            raise ValueError("drift period must be >= 1 frame")
        for a in (self.delay_amplitude, self.doppler_amplitude, self.walk_std):
            if not np.isfinite(a):
                raise ValueError("drift rates must be finite")


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical propagation parameters plus the drift law."""

    carrier_hz: float
    delay_spread_s: float
    subcarrier_spacing_hz: float
    velocity_mps: float
    rician_k_db: float
    drift: DriftConfig = field(default_factory=DriftConfig)
    name: str = "custom"

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.subcarrier_spacing_hz <= 0:
            raise ValueError("carrier and subcarrier spacing must be positive")
        if self.delay_spread_s < 0 or self.velocity_mps < 0:
            raise ValueError("delay spread and velocity must be non-negative")

    @property
    def doppler_hz(self) -> float:
        return doppler_frequency(self.velocity_mps, self.carrier_hz)


def doppler_frequency(velocity_mps: float, carrier_hz: float) -> float:
    """Maximum Doppler shift f_D = v * f_c / c."""
    if velocity_mps < 0:
        raise ValueError("velocity must be non-negative")
    if carrier_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return velocity_mps * carrier_hz / SPEED_OF_LIGHT


def pilot_count(n_rb: int, n_dmrs_symbols: int, subcarriers_per_rb: int = 12) -> int:
    """Pilot count for a comb-2 DM-RS: (N_RB * 12 / 2) * N_DMRS_sym."""
    if n_rb < 1 or n_dmrs_symbols < 1:
        raise ValueError("resource block and DM-RS symbol counts must be >= 1")
    return (n_rb * subcarriers_per_rb // 2) * n_dmrs_symbols


def build_pilot_pattern(
    grid: GridSpec, symbol_indices: Sequence[int], comb: int = 2
) -> PilotPattern:
    """Comb pilots on the listed symbols: every ``comb``-th subcarrier from 0."""
    if comb < 1:
        raise ValueError("comb factor must be >= 1")
    symbols = tuple(sorted(int(m) for m in symbol_indices))
    if not symbols:
        raise ValueError("at least one pilot symbol is required")
    for m in symbols:
        if not 0 <= m < grid.symbols:
            raise ValueError(f"pilot symbol index {m} outside grid [0, {grid.symbols})")
    subcarriers = tuple(range(0, grid.subcarriers, comb))
    return PilotPattern(subcarriers=subcarriers, symbols=symbols, comb=comb, grid=grid)


def build_frequency_correlation(
    delay_spread_s: float, subcarrier_spacing_hz: float, n_subcarriers: int
) -> np.ndarray:
    """Frequency correlation of an exponential power-delay profile.

    r_f(dn) = 1 / (1 + 1j * 2*pi * df * tau_rms * dn); Hermitian with unit
    diagonal by construction.
    """
    if delay_spread_s < 0:
        raise ValueError("delay spread must be non-negative")
    dn = np.arange(n_subcarriers)[:, None] - np.arange(n_subcarriers)[None, :]
    return 1.0 / (1.0 + 1j * 2.0 * np.pi * subcarrier_spacing_hz * delay_spread_s * dn)


def build_temporal_correlation(
    doppler_hz: float, symbol_duration_s: float, n_symbols: int, rician_k_db: float
) -> np.ndarray:
    """Temporal correlation: Jakes diffuse term plus a Rician LoS phase ramp.

    r_t(dm) = (K * exp(1j*theta*dm) + J0(theta*dm)) / (K + 1) with
    theta = 2*pi*f_D*T_sym and K the linear Rician factor.
    """
    if doppler_hz < 0:
        raise ValueError("Doppler frequency must be non-negative")
    k_lin = 10.0 ** (rician_k_db / 10.0)
    dm = np.arange(n_symbols)[:, None] - np.arange(n_symbols)[None, :]
    theta = 2.0 * np.pi * doppler_hz * symbol_duration_s * dm
    return (k_lin * np.exp(1j * theta) + j0(theta)) / (k_lin + 1.0)


@dataclass(frozen=True)
class SeparableCovariance:
    """Separable second-order statistics R_f (N x N), R_t (M x M), noise var."""

    r_freq: np.ndarray
    r_time: np.ndarray
    noise_var: float

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def n_subcarriers(self) -> int:
        return self.r_freq.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.r_time.shape[0]

    def full(self) -> np.ndarray:
        """Covariance of vec(H): R_t (x) R_f under column-major vec."""
        return np.kron(self.r_time, self.r_freq)


def build_covariance(
    scenario: ScenarioConfig, grid: GridSpec, snr_db: float, frame_index: int = 0
) -> SeparableCovariance:
    """Analytic covariance for a frame, drift applied at ``frame_index``."""
    tau, f_d = apply_drift(scenario, frame_index)
    r_f = build_frequency_correlation(tau, grid.subcarrier_spacing_hz, grid.subcarriers)
    r_t = build_temporal_correlation(
        f_d, grid.symbol_duration_s, grid.symbols, scenario.rician_k_db
    )
    return SeparableCovariance(r_f, r_t, noise_var=10.0 ** (-snr_db / 10.0))


def hermitian_sqrt(r: np.ndarray, regularization: float = 1e-10) -> np.ndarray:
    """PSD square root via eigendecomposition; clamps negative eigenvalues.

    Retries once with a regularized diagonal if the decomposition fails.
    """
    try:
        w, v = np.linalg.eigh(r)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(r + regularization * np.eye(r.shape[0]))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


@dataclass(frozen=True)
class ChannelFrame:
    """One realization of the N x M frequency response."""

    h: np.ndarray
    frame_index: int
    scenario: ScenarioConfig | None = None

    def energy(self) -> float:
        return float(np.sum(np.abs(self.h) ** 2))


@dataclass(frozen=True)
class PilotObservation:
    """Noisy pilot measurements Y_p and their real-stacked form x_in."""

    y_pilots: np.ndarray
    snr_db: float

    @property
    def x_in(self) -> np.ndarray:
        """[Re(Y_p); Im(Y_p)], length 2L."""
        return np.concatenate([self.y_pilots.real, self.y_pilots.imag])

    @staticmethod
    def from_x_in(x_in: np.ndarray, snr_db: float) -> "PilotObservation":
        half = len(x_in) // 2
        if len(x_in) != 2 * half:
            raise ValueError("x_in length must be even")
        return PilotObservation(x_in[:half] + 1j * x_in[half:], snr_db)


def frame_rng(master_seed: int, frame_index: int) -> np.random.Generator:
    """Per-frame generator: derived from (master seed, frame index) only."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(frame_index,))
    return np.random.default_rng(ss)


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channel(
    cov: SeparableCovariance,
    rng: np.random.Generator,
    frame_index: int = 0,
    scenario: ScenarioConfig | None = None,
) -> ChannelFrame:
    """Draw H = R_f^(1/2) G R_t^(1/2).T with G iid CN(0,1)."""
    s_f = hermitian_sqrt(cov.r_freq)
    s_t = hermitian_sqrt(cov.r_time)
    g = _complex_gaussian(rng, (cov.n_subcarriers, cov.n_symbols))
    h = s_f @ g @ s_t.T
    return ChannelFrame(h=h, frame_index=frame_index, scenario=scenario)


def sample_channel_batch(
    cov: SeparableCovariance, rng: np.random.Generator, count: int
) -> np.ndarray:
    """Vectorized draw of ``count`` frames, shape (count, N, M).

    Uses a different RNG stream layout than per-frame generation; meant for
    Monte-Carlo studies, not for reproducing dataset frames.
    """
    s_f = hermitian_sqrt(cov.r_freq)
    s_t = hermitian_sqrt(cov.r_time)
    g = _complex_gaussian(rng, (count, cov.n_subcarriers, cov.n_symbols))
    return np.einsum("ij,bjm,km->bik", s_f, g, s_t, optimize=True)


# Cumulative random-walk cache, keyed by walk seed; grown on demand so that
# per-frame drift lookup stays O(1) over long datasets.
_WALK_CACHE: dict[int, np.ndarray] = {}


def _walk_value(seed: int, frame_index: int) -> float:
    cached = _WALK_CACHE.get(seed)
    if cached is None or len(cached) <= frame_index:
        n = max(frame_index + 1, 4096)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(0xD21F7,))
        )
        steps = rng.standard_normal(n)
        cached = np.concatenate([[0.0], np.cumsum(steps)])[: n + 1]
        _WALK_CACHE[seed] = cached
    return float(cached[frame_index])


def apply_drift(scenario: ScenarioConfig, frame_index: int) -> tuple[float, float]:
    """Effective (delay spread, Doppler) for a frame.

    Frame 0 always returns the nominal values.  The sinusoidal factor is
    ``1 + a*sin(2*pi*k/period)`` per quantity; an optional random walk
    multiplies both by ``exp(walk_std * w_k)`` where w is a seeded Gaussian
    walk with w_0 = 0.
    """
    d = scenario.drift
    phase = 2.0 * np.pi * frame_index / d.period_frames
    tau_factor = 1.0 + d.delay_amplitude * np.sin(phase)
    fd_factor = 1.0 + d.doppler_amplitude * np.sin(phase)
    if d.walk_std > 0.0 and frame_index > 0:
        walk = float(np.exp(d.walk_std * _walk_value(d.walk_seed, frame_index)))
        tau_factor *= walk
        fd_factor *= walk
    return scenario.delay_spread_s * tau_factor, scenario.doppler_hz * fd_factor


def observe_pilots(
    frame: ChannelFrame,
    pattern: PilotPattern,
    snr_db: float,
    rng: np.random.Generator,
) -> PilotObservation:
    """Y_p = H_p * X_p + Z with Z ~ CN(0, sigma^2), sigma^2 = 10^(-snr/10)."""
    h_p = pattern.extract(frame.h)
    sigma2 = 10.0 ** (-snr_db / 10.0)
    z = _complex_gaussian(rng, h_p.shape) * np.sqrt(sigma2)
    return PilotObservation(y_pilots=h_p * pattern.pilot_values + z, snr_db=snr_db)


def pilot_covariances(
    cov: SeparableCovariance, pattern: PilotPattern
) -> tuple[np.ndarray, np.ndarray]:
    """(R_cross, R_pp): Kronecker-indexed slices of the full covariance.

    R_cross rows run over vec(H), columns over the pilot set; R_pp is the
    pilot-by-pilot principal submatrix.  Both are assembled directly from
    r_f and r_t without forming the NM x NM product.
    """
    idx = pattern.flat_indices()
    n = cov.n_subcarriers
    sub = idx % n
    sym = idx // n
    # R_full[k, l] = r_time[m_k, m_l] * r_freq[n_k, n_l] for k = n_k + N*m_k
    all_sub = np.arange(n * cov.n_symbols) % n
    all_sym = np.arange(n * cov.n_symbols) // n
    r_cross = cov.r_time[np.ix_(all_sym, sym)] * cov.r_freq[np.ix_(all_sub, sub)]
    r_pp = cov.r_time[np.ix_(sym, sym)] * cov.r_freq[np.ix_(sub, sub)]
    return r_cross, r_pp
