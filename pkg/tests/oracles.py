"""Slow, obviously-correct reference implementations used by the tests.

Nothing here imports the package's numerical code.
"""

import math

import numpy as np


def matmul_loops(a, b):
    n, k = len(a), len(a[0])
    m = len(b[0])
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = sum(a[i][t] * b[t][j] for t in range(k))
    return out


def direct_conv(kernel, u):
    n = len(u)
    y = np.zeros_like(np.asarray(u, dtype=float))
    for t in range(n):
        for s in range(t + 1):
            y[t] += kernel[s] * u[t - s]
    return y


def masked_softmax(q, k, v, visible):
    n, d = q.shape
    out = np.zeros((n, v.shape[1]))
    for i in range(n):
        scores = [float(q[i] @ k[j]) / math.sqrt(d) if visible[i][j] else -math.inf for j in range(k.shape[0])]
        top = max(scores)
        w = np.array([math.exp(s - top) if s > -math.inf else 0.0 for s in scores])
        out[i] = (w / w.sum()) @ v
    return out


def multihead(q, k, v, heads, fn):
    dh = q.shape[1] // heads
    parts = [fn(q[:, h * dh:(h + 1) * dh], k[:, h * dh:(h + 1) * dh], v[:, h * dh:(h + 1) * dh]) for h in range(heads)]
    return np.hstack(parts)


def vanilla(q, k, v, heads=1, causal=False):
    n, m = q.shape[0], k.shape[0]
    vis = [[(j <= i) if causal else True for j in range(m)] for i in range(n)]
    return multihead(q, k, v, heads, lambda a, b, c: masked_softmax(a, b, c, vis))


def cos_reweighted(q, k, v, eps=1e-6):
    n, m = q.shape[0], k.shape[0]
    length = max(n, m)
    qr, kr = np.maximum(q, 0), np.maximum(k, 0)
    out = np.zeros((n, v.shape[1]))
    for i in range(n):
        w = np.array([qr[i] @ kr[j] * math.cos(math.pi * (i - j) / (2 * length)) for j in range(m)])
        out[i] = (w @ v) / max(w.sum(), eps)
    return out


def ssm_recurrence(u, a, b, c, log_dt, d_skip):
    """Zero-order-hold diagonal SSM stepped token by token; u is (n, channels)."""
    n, ch = u.shape
    y = np.zeros((n, ch))
    for c_i in range(ch):
        dt = math.exp(log_dt[c_i])
        a_bar = np.exp(dt * a[c_i])
        b_bar = (a_bar - 1) / a[c_i] * b[c_i]
        x = np.zeros(a.shape[1], dtype=complex)
        for t in range(n):
            x = a_bar * x + b_bar * u[t, c_i]
            y[t, c_i] = (c[c_i] @ x).real + d_skip[c_i] * u[t, c_i]
    return y


def population_std(values):
    mu = sum(values) / len(values)
    return math.sqrt(sum((x - mu) ** 2 for x in values) / len(values))


def pearson_brute(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y)) / n
    sx = math.sqrt(sum((a - mx) ** 2 for a in x) / n)
    sy = math.sqrt(sum((b - my) ** 2 for b in y) / n)
    return cov / (sx * sy)
