from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..core import AttentionInputs, AttentionPattern, require_support, run_heads
from ._common import column_softmax, head_rng
from ._config import MechanismConfig
from ._kernels import window_prefix, window_shared


def segment_window_bounds(n: int, segment: int, causal: bool) -> tuple[np.ndarray, np.ndarray]:
    """Segment-wise local window: token ``i`` in segment ``s = i // l`` sees
    ``[(s-1) l + l/2, (s+1) l + l/2)``, clipped to the sequence (and to
    ``<= i`` when causal)."""
    if segment < 1:
        raise ValueError(f"segment length must be >= 1, got {segment}")
    i = np.arange(n)
    s = i // segment
    lo = np.maximum(0, (s - 1) * segment + segment // 2)
    hi = np.minimum(n, (s + 1) * segment + segment // 2)
    if causal:
        hi = np.minimum(hi, i + 1)
    return lo, hi


def projection_weights(config: MechanismConfig, head: int, dh: int) -> np.ndarray:
    """The (seeded, untrained) d_head x r matrix W^P."""
    g = head_rng(config.seed, "longshort-wp", head)
    return T.gaussian_matrix(g, dh, config.num_landmarks) / math.sqrt(dh)


def _longshort_head(q, k, v, h, config, causal):
    n, dh = q.shape
    lo, hi = segment_window_bounds(n, config.window, causal)
    qs = q * (1.0 / math.sqrt(dh))
    if config.num_landmarks == 0:
        return window_shared(qs, k, v, lo, hi)
    logits = T.matmul(k, projection_weights(config, h, dh))
    if causal:
        # the compressed memory for query i is recomputed from keys 0..i only
        return window_prefix(qs, k, v, lo, hi, logits, logits)
    p = column_softmax(logits)
    return window_shared(qs, k, v, lo, hi, T.matmul(p.T, k), T.matmul(p.T, v))


def longshort_attention(inputs: AttentionInputs, config: MechanismConfig | None = None) -> np.ndarray:
    """Segment-wise local window plus an r-row low-rank summary of the
    whole sequence (``P = softmax(K W^P)`` over the sequence), attended
    jointly by one softmax. ``num_landmarks=0`` disables the summary."""
    require_support("longshort", inputs.pattern)
    config = config or MechanismConfig()
    causal = inputs.pattern is AttentionPattern.CAUSAL_SELF
    return run_heads(inputs, lambda q, k, v, h: _longshort_head(q, k, v, h, config, causal))
