from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..core import AttentionInputs, dense_softmax_head, require_support, run_heads
from ._common import head_rng
from ._config import MechanismConfig


def query_sparsity(q: np.ndarray, k_sample: np.ndarray) -> np.ndarray:
    """max_j(q.k_j / sqrt d) - mean_j(q.k_j / sqrt d) over the sampled keys."""
    s = (q @ k_sample.T) / math.sqrt(q.shape[1])
    return s.max(axis=1) - s.mean(axis=1)


def sample_budget(factor: int, length: int) -> int:
    return min(length, factor * math.ceil(math.log(length))) if length > 1 else length


def _probsparse_head(q, k, v, rng, config: MechanismConfig):
    n, m = q.shape[0], k.shape[0]
    n_keys = max(1, sample_budget(config.factor, m))
    u = config.top_u if config.top_u is not None else sample_budget(config.factor, n)
    u = min(u, n)
    picked = rng.choice(m, size=n_keys, replace=False)
    sparsity = query_sparsity(q, k[picked])
    # stable sort: ties go to the lower query index
    top = np.argsort(-sparsity, kind="stable")[:u]
    out = T.empty(q.shape)
    out[:] = v.mean(axis=0)
    if u:
        out[top] = dense_softmax_head(q[top], k, v, causal=False)
    return out


def probsparse_attention(
    inputs: AttentionInputs,
    config: MechanismConfig | None = None,
    rng: T.Rng | None = None,
) -> np.ndarray:
    """Full attention for the ``u = factor * ceil(ln n)`` queries with the
    most peaked scores on ``factor * ceil(ln m)`` uniformly sampled keys; the
    remaining queries output the mean of V."""
    require_support("probsparse", inputs.pattern)
    config = config or MechanismConfig()

    def head(q, k, v, h):
        g = rng if rng is not None else head_rng(config.seed, "probsparse", h)
        return _probsparse_head(q, k, v, g, config)

    return run_heads(inputs, head)
