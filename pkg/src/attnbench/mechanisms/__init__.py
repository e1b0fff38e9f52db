"""The efficient attention mechanisms and a name-based dispatcher."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .. import tensor as T
from ..core import (
    AttentionInputs,
    canonical_name,
    require_support,
    vanilla_attention,
)
from ._config import MechanismConfig
from .abc import abc_attention
from .cosformer import cosformer_attention
from .local import local_attention
from .longshort import longshort_attention
from .nystrom import nystrom_attention
from .performer import lara_attention, performer_attention
from .probsparse import probsparse_attention
from .s4d import S4DParams, init_s4d, s4d_attention, s4d_kernel, s4d_layer


def _vanilla(inputs, config=None):
    return vanilla_attention(inputs)


MECHANISMS: dict[str, Callable] = {
    "vanilla": _vanilla,
    "local": local_attention,
    "nystrom": nystrom_attention,
    "performer": performer_attention,
    "lara": lara_attention,
    "cosformer": cosformer_attention,
    "longshort": longshort_attention,
    "probsparse": probsparse_attention,
    "abc": abc_attention,
    "s4d": s4d_attention,
}

RANDOMIZED = frozenset({"performer", "lara", "probsparse"})


def attend(
    mechanism: str,
    inputs: AttentionInputs,
    config: MechanismConfig | None = None,
    rng: T.Rng | None = None,
) -> np.ndarray:
    """Run ``mechanism`` on ``inputs``; the output is checked to be finite."""
    name = canonical_name(mechanism)
    require_support(name, inputs.pattern)
    config = config or MechanismConfig()
    fn = MECHANISMS[name]
    out = fn(inputs, config, rng) if name in RANDOMIZED else fn(inputs, config)
    return T.ensure_finite(out, f"{name} output")


__all__ = [
    "MECHANISMS",
    "MechanismConfig",
    "S4DParams",
    "abc_attention",
    "attend",
    "cosformer_attention",
    "init_s4d",
    "lara_attention",
    "local_attention",
    "longshort_attention",
    "nystrom_attention",
    "performer_attention",
    "probsparse_attention",
    "s4d_attention",
    "s4d_kernel",
    "s4d_layer",
]
