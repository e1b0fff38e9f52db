from __future__ import annotations

import math

import numpy as np

from ..core import AttentionInputs, AttentionPattern, require_support, run_heads
from ._config import MechanismConfig
from ._kernels import window_shared


def local_window_bounds(n: int, window: int, causal: bool) -> tuple[np.ndarray, np.ndarray]:
    """Half-open key ranges ``[lo_i, hi_i)``.

    Noncausal: ``floor(w/2)`` tokens on each side plus the query itself.
    Causal: the previous ``floor(w/2)`` tokens plus the query itself.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    half = window // 2
    i = np.arange(n)
    lo = np.maximum(0, i - half)
    hi = i + 1 if causal else np.minimum(n, i + half + 1)
    return lo, hi


def local_attention(inputs: AttentionInputs, config: MechanismConfig | None = None) -> np.ndarray:
    require_support("local", inputs.pattern)
    config = config or MechanismConfig()
    causal = inputs.pattern is AttentionPattern.CAUSAL_SELF
    lo, hi = local_window_bounds(inputs.n, config.window, causal)
    scale = 1.0 / math.sqrt(inputs.head_dim)
    return run_heads(inputs, lambda q, k, v, h: window_shared(q * scale, k, v, lo, hi))
