from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..core import AttentionInputs, require_support, run_heads
from ._common import segment_means
from ._config import MechanismConfig


def _nystrom_head(q, k, v, r: int, pinv_iters: int | None) -> np.ndarray:
    q = q * (1.0 / math.sqrt(q.shape[1]))
    q_land = segment_means(q, r)
    k_land = segment_means(k, r)
    left = T.softmax_rows(T.matmul(q, k_land.T))
    core = T.pinv_iterative(T.softmax_rows(T.matmul(q_land, k_land.T)), pinv_iters)
    right = T.softmax_rows(T.matmul(q_land, k.T))
    return T.matmul(left, T.matmul(core, T.matmul(right, v)))


def nystrom_attention(inputs: AttentionInputs, config: MechanismConfig | None = None) -> np.ndarray:
    """softmax(Q K~^T) pinv(softmax(Q~ K~^T)) softmax(Q~ K^T) V with segment-mean landmarks."""
    require_support("nystrom", inputs.pattern)
    config = config or MechanismConfig()
    r = config.num_landmarks
    if not 1 <= r <= inputs.n:
        raise ValueError(f"Nystrom needs 1 <= num_landmarks <= n, got {r} for n={inputs.n}")
    return run_heads(inputs, lambda q, k, v, h: _nystrom_head(q, k, v, r, config.pinv_iters))
