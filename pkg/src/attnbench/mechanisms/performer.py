"""Random-feature attention: Performer and LARA.

Both approximate softmax attention with positive features

    phi(x) = exp(W x - |x|^2 / 2)

on inputs scaled by ``d_head ** -0.25`` so that ``phi(q).phi(k)`` estimates
``exp(q.k / sqrt(d_head))``. Per-row (queries) and global (keys) maxima are
subtracted from the log-features before exponentiating; both shifts cancel
between numerator and denominator.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..core import AttentionInputs, require_support, run_heads
from ._common import head_rng, segment_means
from ._config import MechanismConfig

FEATURE_SALT = "random-features"


def feature_logits(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``W x - |x|^2/2`` for every row of ``x``; shape (rows, features)."""
    out = T.matmul(x, w.T)
    out -= 0.5 * np.einsum("ij,ij->i", x, x)[:, None]
    return out


def _exp_rowmax(logits: np.ndarray) -> np.ndarray:
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    return logits


def _exp_globalmax(logits: np.ndarray) -> np.ndarray:
    logits -= logits.max()
    np.exp(logits, out=logits)
    return logits


def _linear_readout(phi_q, phi_k, v, eps):
    kv = T.matmul(phi_k.T, v)
    z = phi_k.sum(axis=0)
    num = T.matmul(phi_q, kv)
    den = np.maximum(phi_q @ z, eps)
    num /= den[:, None]
    return num


def _performer_head(q, k, v, w, eps):
    s = q.shape[1] ** -0.25
    phi_q = _exp_rowmax(feature_logits(q * s, w))
    phi_k = _exp_globalmax(feature_logits(k * s, w))
    return _linear_readout(phi_q, phi_k, v, eps)


def performer_attention(
    inputs: AttentionInputs,
    config: MechanismConfig | None = None,
    rng: T.Rng | None = None,
    *,
    features: np.ndarray | None = None,
) -> np.ndarray:
    """phi(q_i)^T sum_j phi(k_j) v_j^T / max(phi(q_i)^T sum_j phi(k_j), eps).

    ``features`` pins the projection matrix (approx_dim x d_head) instead of
    drawing it; ``rng`` (else a per-head stream from ``config.seed``) is
    used otherwise. Each query only sees itself and the full source, so the
    causal cross pattern is computed exactly like the noncausal one.
    """
    require_support("performer", inputs.pattern)
    config = config or MechanismConfig()

    def head(q, k, v, h):
        if features is not None:
            w = np.asarray(features, dtype=np.float64)
        else:
            g = rng if rng is not None else head_rng(config.seed, FEATURE_SALT, h)
            w = T.gaussian_matrix(g, config.approx_dim, q.shape[1])
        return _performer_head(q, k, v, w, config.epsilon)

    return run_heads(inputs, head)


# --------------------------------------------------------------------------
# LARA
# --------------------------------------------------------------------------


def lara_log_weights(q: np.ndarray, omega: np.ndarray, means: np.ndarray, owner: np.ndarray) -> np.ndarray:
    """log of the diagonal of A_n for every query row (rows, features).

    Sample ``rho`` was drawn from ``N(means[owner[rho]], I)``. Its weight for
    query ``n`` is the proposal's responsibility for that query,
    ``softmax_c(q_n . mu_c)``, times the importance ratio
    ``N(w; 0, I) / N(w; mu_c, I) = exp(-w.mu_c + |mu_c|^2 / 2)``.
    """
    mu = means[owner]
    log_ratio = -np.einsum("ij,ij->i", omega, mu) + 0.5 * np.einsum("ij,ij->i", mu, mu)
    resp = q @ means.T
    resp -= resp.max(axis=1, keepdims=True)
    resp -= np.log(np.exp(resp).sum(axis=1, keepdims=True))
    return resp[:, owner] + log_ratio[None, :]


def _lara_head(q, k, v, rng, config: MechanismConfig, proposal_means):
    n, dh = q.shape
    s = dh ** -0.25
    qs, ks = q * s, k * s
    if proposal_means is None:
        c = config.num_landmarks
        if not 1 <= c <= n:
            raise ValueError(f"LARA needs 1 <= num_landmarks <= n, got {c} for n={n}")
        means = 0.5 * (segment_means(qs, c) + segment_means(ks, c))
    else:
        means = np.atleast_2d(np.asarray(proposal_means, dtype=np.float64))
        c = means.shape[0]
    per = max(1, config.approx_dim // c)
    owner = np.repeat(np.arange(c), per)
    omega = T.gaussian_matrix(rng, per * c, dh)
    omega += means[owner]
    logits_q = feature_logits(qs, omega)
    logits_q += lara_log_weights(qs, omega, means, owner)
    phi_q = _exp_rowmax(logits_q)
    phi_k = _exp_globalmax(feature_logits(ks, omega))
    return _linear_readout(phi_q, phi_k, v, config.epsilon)


def lara_attention(
    inputs: AttentionInputs,
    config: MechanismConfig | None = None,
    rng: T.Rng | None = None,
    *,
    proposal_means: np.ndarray | None = None,
) -> np.ndarray:
    """Random-feature attention with several adaptive Gaussian proposals.

    Proposal ``c`` is ``N(mu_c, I)`` with ``mu_c`` the mean of the c-th
    query and key segment means (``num_landmarks`` proposals), each owning
    ``approx_dim // num_landmarks`` (at least one) samples. A query-specific
    diagonal reweighting (:func:`lara_log_weights`) turns the pooled samples
    into a self-normalized importance-sampling estimate, so the weights over
    keys always sum to one. ``proposal_means`` overrides the adaptive means.
    """
    require_support("lara", inputs.pattern)
    config = config or MechanismConfig()

    def head(q, k, v, h):
        g = rng if rng is not None else head_rng(config.seed, FEATURE_SALT, h)
        return _lara_head(q, k, v, g, config, proposal_means)

    return run_heads(inputs, head)
