"""Degradation library: 9 official-style operators and 35 extended ones."""

from featdistill.distortions.catalog import (
    CATEGORIES,
    EXTENDED_OPS,
    OFFICIAL_OPS,
    OPERATORS,
    SEVERITIES,
    DistortionSpec,
    Operator,
    PipelineMode,
    apply,
    get_operator,
    sample_spec,
)

__all__ = [
    "CATEGORIES",
    "EXTENDED_OPS",
    "OFFICIAL_OPS",
    "OPERATORS",
    "SEVERITIES",
    "DistortionSpec",
    "Operator",
    "PipelineMode",
    "apply",
    "get_operator",
    "sample_spec",
]
