"""The attention-aided estimator: network, exported filters, FLOPs model."""

from .filtering import (
    AmmseFilter,
    PrimitiveAudit,
    RankAdapter,
    effective_rank_profile,
    estimate,
    estimate_batch,
    rank_adapt,
    svd_factor,
)
from .flops import (
    PAPER_REPORTED_FLOPS,
    complexity_ratio,
    flops,
    lmmse_construction_flops,
)
from .network import (
    AmmseConfig,
    assemble_filter,
    decode,
    disassemble_filter,
    embed_pilots,
    filter_apply_nodes,
    forward_filter,
    frequency_encode,
    init_params,
    param_shapes,
    project,
    temporal_encode,
    validate_params,
    wrap_params,
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
    "AmmseFilter",
    "RankAdapter",
    "PrimitiveAudit",
    "estimate",
    "estimate_batch",
    "svd_factor",
    "rank_adapt",
    "effective_rank_profile",
    "flops",
    "lmmse_construction_flops",
    "complexity_ratio",
    "PAPER_REPORTED_FLOPS",
]
