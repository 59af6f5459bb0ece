"""Real-operation counts per channel estimate.

One complex multiply-accumulate is 8 real operations (4 multiplies, 4 adds);
one standalone complex multiply is 6.  Counts are formula-based; externally
reported figures for the same methods are attached as metadata with a
provenance label and are not used in any computation.
"""

from __future__ import annotations

import math

__all__ = [
    "flops",
    "lmmse_construction_flops",
    "complexity_ratio",
    "PAPER_REPORTED_FLOPS",
]

# Published per-inference figures for L = 72 (N = 72, M = 14), recorded as
# metadata only.  Known discrepancies against the formulas: the full-filter
# count is quoted as ~5.8 K where 8NML evaluates to 580,608, and the
# rank-adaptive count is quoted as 8608r where 8r(L + NM) gives 8640r.
PAPER_REPORTED_FLOPS: dict[str, str] = {
    "lmmse": "~21 M",
    "1d-lmmse": "~41 K",
    "ls": "~15 K",
    "channelnet": "~1.35 G",
    "channelformer": "~21 M",
    "ammse": "~5.8 K",
    "ra-ammse": "~8608r",
}


def flops(
    method: str,
    n: int,
    m: int,
    l: int,
    r: int | None = None,
    pilot_symbols: int | None = None,
) -> int:
    """Per-inference real-operation count for one channel estimate.

    Methods: ``ammse`` (8NML), ``ra-ammse`` (8r(L + NM)), ``lmmse``
    (application only, 8NML; see :func:`lmmse_construction_flops`),
    ``1d-lmmse`` (per-symbol frequency filtering plus temporal
    interpolation), ``ls`` (pilot divisions plus interpolation).
    """
    if min(n, m, l) < 1:
        raise ValueError("dimensions must be positive")
    if pilot_symbols is None:
        pilot_symbols = max(1, round(2 * l / n))  # comb-2 layout
    if method in ("ammse", "lmmse"):
        return 8 * n * m * l
    if method == "ra-ammse":
        if r is None or r < 1:
            raise ValueError("ra-ammse needs a positive rank")
        return 8 * r * (l + n * m)
    if method == "ls":
        # one complex division per pilot, then one two-point complex
        # interpolation (4 mul + 2 add) per remaining resource element
        return 6 * l + 6 * (n * m - l)
    if method == "1d-lmmse":
        interp = 6 * (n * m - n * pilot_symbols)
        return 8 * n * l + interp
    raise ValueError(f"unknown method tag {method!r}")


def lmmse_construction_flops(n: int, m: int, l: int) -> int:
    """One-time LMMSE filter construction: Cholesky plus NM column solves."""
    return math.ceil(8 * l**3 / 3) + 8 * n * m * l * l


def complexity_ratio(n: int, m: int, l: int, r: int) -> float:
    """Rank-adaptive cost over full-filter cost: (NMr + Lr) / (NML)."""
    return (n * m * r + l * r) / (n * m * l)
