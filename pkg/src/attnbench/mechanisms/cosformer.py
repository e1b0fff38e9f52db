from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..core import AttentionInputs, require_support, run_heads
from ._config import MechanismConfig


def cos_positions(count: int, length: int) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin of ``pi * i / (2 L)`` for 0-based positions ``i < count``."""
    angle = (np.pi / 2.0) * np.arange(count) / length
    return np.cos(angle), np.sin(angle)


def _cosformer_head(q, k, v, eps):
    n, m = q.shape[0], k.shape[0]
    length = max(n, m)
    qc, qs = cos_positions(n, length)
    kc, ks = cos_positions(m, length)
    q_relu = np.maximum(q, 0.0)
    k_relu = np.maximum(k, 0.0)
    k_cos = T.track(k_relu * kc[:, None])
    k_sin = T.track(k_relu * ks[:, None])
    # d x d summaries first: linear in n and m
    kv_cos = T.matmul(k_cos.T, v)
    kv_sin = T.matmul(k_sin.T, v)
    z_cos = k_cos.sum(axis=0)
    z_sin = k_sin.sum(axis=0)
    del k_cos, k_sin
    q_cos = T.track(q_relu * qc[:, None])
    q_sin = T.track(q_relu * qs[:, None])
    num = T.matmul(q_cos, kv_cos)
    num += T.matmul(q_sin, kv_sin)
    den = np.maximum(q_cos @ z_cos + q_sin @ z_sin, eps)
    num /= den[:, None]
    return num


def cosformer_attention(inputs: AttentionInputs, config: MechanismConfig | None = None) -> np.ndarray:
    """ReLU-kernel linear attention with cos(pi (i - j) / 2L) position reweighting,
    L = max(n, m), evaluated through the cos/sin decomposition.

    A query whose ReLU features see no positive mass gets the epsilon floor in
    its denominator and therefore a zero output row.
    """
    require_support("cosformer", inputs.pattern)
    config = config or MechanismConfig()
    return run_heads(inputs, lambda q, k, v, h: _cosformer_head(q, k, v, config.epsilon))
