"""Attention-aided MMSE OFDM channel estimation at desk scale.

Subpackages and modules:

- ``numerics``: dense real/complex linear algebra on a minimal reverse-mode
  autodiff engine, attention primitives, losses, and Adam.
- ``channel``: separable-WSSUS synthetic channel frames, 5G-NR-style pilot
  patterns, noise injection, and controlled statistics drift.
- ``classical``: LS/LMMSE/1D-LMMSE baselines and covariance utilities.
- ``ammse``: the two-stage attention network that emits a fixed linear
  estimation filter, its rank-adaptive factorization, and the FLOPs model.
- ``training``: dataset generation, temporal splits, the training loop, and
  final-filter extraction.
- ``bench``: NMSE sweeps, robustness and drift experiments, FLOPs/accuracy
  trade-off reports, CSV/JSON serialization.
- ``cli``: the ``amselab`` command-line harness and binary artifact files.
"""

from . import channel, classical

__version__ = "0.1.0"
