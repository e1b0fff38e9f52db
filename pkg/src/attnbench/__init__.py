"""Efficient attention kernels under a four-pattern taxonomy, plus tools to
benchmark them, fit efficiency lengths and aggregate task scores."""

from .core import (
    AttentionInputs,
    AttentionPattern,
    ProjectionWeights,
    causality_probe,
    check_support,
    project,
    vanilla_attention,
)
from .mechanisms import MechanismConfig, attend

__version__ = "0.1.0"

__all__ = [
    "AttentionInputs",
    "AttentionPattern",
    "MechanismConfig",
    "ProjectionWeights",
    "attend",
    "causality_probe",
    "check_support",
    "project",
    "vanilla_attention",
]
