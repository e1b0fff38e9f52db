from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..core import AttentionInputs, AttentionPattern, require_support, run_heads
from ._common import column_softmax, head_rng
from ._config import MechanismConfig
from ._kernels import window_prefix


def slot_weights(config: MechanismConfig, head: int, dh: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded r x d_head matrices W_phi^K and W_phi^V."""
    g = head_rng(config.seed, "abc-slots", head)
    s = 1.0 / math.sqrt(dh)
    return (
        T.gaussian_matrix(g, config.num_landmarks, dh) * s,
        T.gaussian_matrix(g, config.num_landmarks, dh) * s,
    )


def slot_memory(x: np.ndarray, w_phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``softmax(W_phi x^T) x``: each of the r slots is a convex combination
    of the rows of ``x``. Returns (memory r x d, slot weights r x m)."""
    weights = column_softmax(T.matmul(x, w_phi.T)).T
    return T.matmul(weights, x), weights


def _abc_head(q, k, v, h, config, causal):
    n, dh = q.shape
    w_k, w_v = slot_weights(config, h, dh)
    qs = q * (1.0 / math.sqrt(dh))
    if causal:
        empty = np.zeros(n, dtype=np.int64)
        return window_prefix(qs, k, v, empty, empty, T.matmul(k, w_k.T), T.matmul(v, w_v.T))
    k_mem, _ = slot_memory(k, w_k)
    v_mem, _ = slot_memory(v, w_v)
    return T.matmul(T.softmax_rows(T.matmul(qs, k_mem.T)), v_mem)


def abc_attention(inputs: AttentionInputs, config: MechanismConfig | None = None) -> np.ndarray:
    """Attention against r bounded memory slots ``K~ = softmax(W^K K^T) K``,
    ``V~ = softmax(W^V V^T) V``. Causal self attention rebuilds the slots
    from keys ``0..i`` for each query with a running log-sum-exp scan."""
    require_support("abc", inputs.pattern)
    config = config or MechanismConfig()
    if config.num_landmarks < 1:
        raise ValueError("ABC needs num_landmarks >= 1")
    causal = inputs.pattern is AttentionPattern.CAUSAL_SELF
    return run_heads(inputs, lambda q, k, v, h: _abc_head(q, k, v, h, config, causal))
