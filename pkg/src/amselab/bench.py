"""NMSE benchmarks: SNR sweeps, robustness and drift experiments, FLOPs
trade-offs, and report serialization.

Estimators are evaluated on shared channel realizations per SNR point with
freshly drawn noise, so method comparisons are paired.  Linear estimators
carry their NM x L matrix and are applied to all frames in one product;
nonlinear (per-observation) estimators fall back to a frame loop that may
fan out over threads, with a deterministic ordered reduction either way.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .ammse import PAPER_REPORTED_FLOPS, flops
from .channel import GridSpec, PilotObservation, PilotPattern, unvec
from .classical import mismatch_penalty

__all__ = [
    "nmse",
    "Estimator",
    "SweepPoint",
    "SweepResult",
    "TradeoffPoint",
    "TradeoffReport",
    "RobustnessResult",
    "snr_sweep",
    "mismatch_robustness",
    "drift_experiment",
    "DriftReport",
    "tradeoff_report",
    "emit_report",
    "parse_report",
    "config_hash",
    "linearize",
]


def nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Per-frame normalized error ||H - H_hat||_F^2 / ||H||_F^2."""
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    den = float(np.sum(np.abs(truth) ** 2))
    if den == 0.0:
        raise ValueError("reference channel has zero energy")
    return float(np.sum(np.abs(estimate - truth) ** 2)) / den


def config_hash(obj) -> str:
    """Stable 16-hex-digit digest of a JSON-serializable configuration."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Estimator:
    """A channel estimator under benchmark.

    Exactly one of ``matrix`` (NM x L, applied as vec(H_hat) = W Y_p) or
    ``per_obs`` (PilotObservation -> N x M estimate) must be set.
    """

    tag: str
    grid: GridSpec
    matrix: np.ndarray | None = None
    per_obs: Callable[[PilotObservation], np.ndarray] | None = None
    flops_tag: str | None = None
    rank: int | None = None

    def __post_init__(self):
        if (self.matrix is None) == (self.per_obs is None):
            raise ValueError("exactly one of matrix/per_obs must be provided")

    def estimate_all(self, y: np.ndarray, snr_db: float, max_workers: int = 1) -> np.ndarray:
        n, m = self.grid.subcarriers, self.grid.symbols
        if self.matrix is not None:
            v = y @ self.matrix.T
            return v.reshape(len(y), m, n).transpose(0, 2, 1)
        def one(row):
            return self.per_obs(PilotObservation(row, snr_db))
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                outs = list(pool.map(one, y))
        else:
            outs = [one(row) for row in y]
        return np.stack(outs)


def linearize(fn: Callable[[np.ndarray], np.ndarray], pilots: int) -> np.ndarray:
    """Matrix of a linear pilot-to-grid map, built by probing unit vectors."""
    cols = []
    for j in range(pilots):
        e = np.zeros(pilots, dtype=np.complex128)
        e[j] = 1.0
        cols.append(fn(e).flatten(order="F"))
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class SweepPoint:
    estimator: str
    snr_db: float
    nmse: float                 # ratio of summed errors to summed energies
    nmse_mean_of_ratios: float  # companion aggregation, reported alongside
    std_error: float            # std of per-frame ratios / sqrt(frames)
    frames: int

    def __post_init__(self):
        if self.nmse < 0 or self.frames < 1:
            raise ValueError("invalid sweep point")


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    scenario: str = ""
    config_hash: str = ""
    seeds: dict = field(default_factory=dict)

    def rows(self, estimator: str) -> list[SweepPoint]:
        return [p for p in self.points if p.estimator == estimator]

    def value(self, estimator: str, snr_db: float) -> float:
        for p in self.points:
            if p.estimator == estimator and p.snr_db == snr_db:
                return p.nmse
        raise KeyError((estimator, snr_db))


def _noise_rng(seed: int, snr_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(0xBE7C, snr_index))
    )


def snr_sweep(
    factories: Mapping[str, Callable[[float], Estimator]],
    h_frames: np.ndarray,
    pattern: PilotPattern,
    snr_grid_db: Sequence[float],
    noise_seed: int,
    scenario: str = "",
    cfg_hash: str = "",
    seeds: dict | None = None,
    max_workers: int = 1,
) -> SweepResult:
    """Evaluate every estimator at every SNR on shared channel frames.

    Noise is redrawn per SNR point from a seed derived from (noise_seed,
    SNR index); all estimators at a point see identical observations.
    """
    if not factories or len(snr_grid_db) == 0:
        raise ValueError("need at least one estimator and one SNR point")
    if len(h_frames) < 1:
        raise ValueError("need at least one channel frame")
    idx = pattern.flat_indices()
    f = len(h_frames)
    hp = h_frames.transpose(0, 2, 1).reshape(f, -1)[:, idx] * pattern.pilot_values
    den = np.sum(np.abs(h_frames) ** 2, axis=(1, 2))
    points = []
    for k, snr in enumerate(snr_grid_db):
        sigma2 = 10.0 ** (-snr / 10.0)
        rng = _noise_rng(noise_seed, k)
        z = rng.standard_normal(hp.shape) + 1j * rng.standard_normal(hp.shape)
        y = hp + z * np.sqrt(sigma2 / 2.0)
        for tag in factories:
            est = factories[tag](float(snr))
            out = est.estimate_all(y, float(snr), max_workers=max_workers)
            num = np.sum(np.abs(h_frames - out) ** 2, axis=(1, 2))
            ratios = num / den
            points.append(
                SweepPoint(
                    estimator=tag,
                    snr_db=float(snr),
                    nmse=float(num.sum() / den.sum()),
                    nmse_mean_of_ratios=float(ratios.mean()),
                    std_error=float(ratios.std(ddof=1) / np.sqrt(f)) if f > 1 else 0.0,
                    frames=f,
                )
            )
    return SweepResult(
        points=tuple(points),
        scenario=scenario,
        config_hash=cfg_hash,
        seeds=dict(seeds or {"noise_seed": noise_seed}),
    )


@dataclass(frozen=True)
class RobustnessResult:
    """Fixed-SNR checkpoints evaluated across the full sweep.

    ``worst_case`` maps each checkpoint tag to its maximum NMSE degradation
    factor relative to ``reference`` (a per-SNR matched baseline; the
    matched-filter NMSE at each point).  Absolute worst-case NMSE is always
    dominated by the lowest-SNR point, so robustness is compared on the
    matched-relative scale.
    """

    sweep: SweepResult
    reference: dict[float, float]
    worst_case: dict[str, float]


def mismatch_robustness(
    checkpoint_factories: Mapping[str, Callable[[float], Estimator]],
    reference: Mapping[float, float],
    h_frames: np.ndarray,
    pattern: PilotPattern,
    snr_grid_db: Sequence[float],
    noise_seed: int,
    scenario: str = "",
    cfg_hash: str = "",
) -> RobustnessResult:
    """Evaluate filters trained at fixed SNRs over the whole grid."""
    if len(checkpoint_factories) < 2:
        raise ValueError("robustness comparison needs at least two checkpoints")
    sweep = snr_sweep(
        checkpoint_factories, h_frames, pattern, snr_grid_db, noise_seed,
        scenario=scenario, cfg_hash=cfg_hash,
    )
    worst = {}
    for tag in checkpoint_factories:
        rel = [p.nmse / reference[p.snr_db] for p in sweep.rows(tag)]
        worst[tag] = float(max(rel))
    return RobustnessResult(sweep=sweep, reference=dict(reference), worst_case=worst)


@dataclass(frozen=True)
class DriftReport:
    sweep: SweepResult
    delta_mis: float
    oracle_nmse: float


def drift_experiment(
    factories: Mapping[str, Callable[[float], Estimator]],
    test_h: np.ndarray,
    test_y: np.ndarray,
    snr_db: float,
    w_mismatched: np.ndarray,
    w_star: np.ndarray,
    sigma_yy: np.ndarray,
    scenario: str = "",
    cfg_hash: str = "",
) -> DriftReport:
    """Evaluate estimators on stored drifting test observations.

    The observations come from the temporally later test split as generated;
    sharing them across estimators keeps the comparison paired.  The
    covariance-mismatch penalty of the train-split filter is computed
    against the test-window oracle under the test pilot covariance.
    """
    f = len(test_h)
    den = np.sum(np.abs(test_h) ** 2, axis=(1, 2))
    points = []
    oracle_value = None
    for tag in factories:
        est = factories[tag](float(snr_db))
        out = est.estimate_all(test_y, float(snr_db))
        num = np.sum(np.abs(test_h - out) ** 2, axis=(1, 2))
        ratios = num / den
        points.append(
            SweepPoint(
                estimator=tag,
                snr_db=float(snr_db),
                nmse=float(num.sum() / den.sum()),
                nmse_mean_of_ratios=float(ratios.mean()),
                std_error=float(ratios.std(ddof=1) / np.sqrt(f)) if f > 1 else 0.0,
                frames=f,
            )
        )
        if tag == "lmmse-oracle":
            oracle_value = points[-1].nmse
    delta = mismatch_penalty(w_mismatched, w_star, sigma_yy)
    sweep = SweepResult(points=tuple(points), scenario=scenario, config_hash=cfg_hash)
    return DriftReport(sweep=sweep, delta_mis=delta,
                       oracle_nmse=oracle_value if oracle_value is not None else np.nan)


@dataclass(frozen=True)
class TradeoffPoint:
    estimator: str
    flops_per_inference: int
    mean_nmse: float
    paper_reported: str = ""

    def __post_init__(self):
        if self.flops_per_inference <= 0:
            raise ValueError("FLOPs must be positive")


@dataclass(frozen=True)
class TradeoffReport:
    points: tuple[TradeoffPoint, ...]
    config_hash: str = ""


def tradeoff_report(
    sweep: SweepResult,
    estimators: Mapping[str, Estimator],
    n: int,
    m: int,
    l: int,
) -> TradeoffReport:
    """Pair each estimator's sweep-average NMSE with its per-inference cost."""
    points = []
    for tag, est in estimators.items():
        rows = sweep.rows(tag)
        if not rows:
            continue
        mean_nmse = float(np.mean([p.nmse for p in rows]))
        ftag = est.flops_tag or tag
        count = flops(ftag, n, m, l, r=est.rank)
        points.append(
            TradeoffPoint(
                estimator=tag,
                flops_per_inference=count,
                mean_nmse=mean_nmse,
                paper_reported=PAPER_REPORTED_FLOPS.get(ftag, ""),
            )
        )
    return TradeoffReport(points=tuple(points), config_hash=sweep.config_hash)


_SWEEP_FIELDS = ("estimator", "snr_db", "nmse", "std_error", "frames", "config_hash")
_TRADEOFF_FIELDS = ("estimator", "flops_per_inference", "mean_nmse", "paper_reported")


def emit_report(result: SweepResult | TradeoffReport, fmt: str) -> bytes:
    """Serialize a report; CSV is tabular, JSON carries full metadata.

    Round trip guarantee: ``emit_report(parse_report(data, fmt, kind), fmt)``
    is byte-identical to ``data`` for data produced by this function.
    """
    if fmt == "csv":
        if isinstance(result, SweepResult):
            lines = [",".join(_SWEEP_FIELDS)]
            for p in result.points:
                lines.append(
                    f"{p.estimator},{p.snr_db!r},{p.nmse!r},{p.std_error!r},"
                    f"{p.frames},{result.config_hash}"
                )
        elif isinstance(result, TradeoffReport):
            lines = [",".join(_TRADEOFF_FIELDS)]
            for p in result.points:
                lines.append(
                    f"{p.estimator},{p.flops_per_inference},{p.mean_nmse!r},"
                    f"{p.paper_reported}"
                )
        else:
            raise TypeError(f"cannot serialize {type(result).__name__}")
        return ("\n".join(lines) + "\n").encode()
    if fmt == "json":
        if isinstance(result, SweepResult):
            doc = {
                "schema": "amselab-sweep/1",
                "scenario": result.scenario,
                "config_hash": result.config_hash,
                "seeds": result.seeds,
                "points": [
                    {
                        "estimator": p.estimator,
                        "snr_db": p.snr_db,
                        "nmse": p.nmse,
                        "nmse_mean_of_ratios": p.nmse_mean_of_ratios,
                        "std_error": p.std_error,
                        "frames": p.frames,
                    }
                    for p in result.points
                ],
            }
        elif isinstance(result, TradeoffReport):
            doc = {
                "schema": "amselab-tradeoff/1",
                "config_hash": result.config_hash,
                "points": [
                    {
                        "estimator": p.estimator,
                        "flops_per_inference": p.flops_per_inference,
                        "mean_nmse": p.mean_nmse,
                        "paper_reported": p.paper_reported,
                    }
                    for p in result.points
                ],
            }
        else:
            raise TypeError(f"cannot serialize {type(result).__name__}")
        return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(data: bytes, fmt: str, kind: str = "sweep"):
    """Inverse of :func:`emit_report` for both formats."""
    if fmt == "csv":
        lines = data.decode().strip("\n").split("\n")
        header = lines[0].split(",")
        if kind == "sweep":
            if header != list(_SWEEP_FIELDS):
                raise ValueError(f"unexpected sweep CSV header: {header}")
            points = []
            chash = ""
            for line in lines[1:]:
                tag, snr, nm, se, fr, chash = line.split(",")
                points.append(
                    SweepPoint(tag, float(snr), float(nm), float(nm), float(se), int(fr))
                )
            return SweepResult(points=tuple(points), config_hash=chash)
        if kind == "tradeoff":
            if header != list(_TRADEOFF_FIELDS):
                raise ValueError(f"unexpected tradeoff CSV header: {header}")
            points = []
            for line in lines[1:]:
                tag, fl, nm, rep = line.split(",")
                points.append(TradeoffPoint(tag, int(fl), float(nm), rep))
            return TradeoffReport(points=tuple(points))
        raise ValueError(f"unknown report kind {kind!r}")
    if fmt == "json":
        doc = json.loads(data.decode())
        schema = doc.get("schema", "")
        if schema == "amselab-sweep/1":
            points = tuple(
                SweepPoint(
                    p["estimator"], p["snr_db"], p["nmse"],
                    p["nmse_mean_of_ratios"], p["std_error"], p["frames"]
                )
                for p in doc["points"]
            )
            return SweepResult(points=points, scenario=doc["scenario"],
                               config_hash=doc["config_hash"], seeds=doc["seeds"])
        if schema == "amselab-tradeoff/1":
            points = tuple(
                TradeoffPoint(p["estimator"], p["flops_per_inference"],
                              p["mean_nmse"], p["paper_reported"])
                for p in doc["points"]
            )
            return TradeoffReport(points=points, config_hash=doc["config_hash"])
        raise ValueError(f"unknown report schema {schema!r}")
    raise ValueError(f"unknown report format {fmt!r}")
