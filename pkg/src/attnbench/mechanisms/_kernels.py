"""Row-wise softmax kernels over a per-row key window plus a small memory.

Three shapes of the same computation, for query row ``i``:

* window rows ``lo[i]:hi[i]`` of K/V, plus a memory shared by every row
  (local attention, noncausal LongShort);
* window rows plus a memory summarising keys ``0..i`` by a prefix softmax over
  slot logits (causal LongShort, causal ABC).

Each kernel has a numba implementation and a chunked numpy one. The numpy
path is used when numba is disabled (``ATTNBENCH_NUMBA=0``); both are exposed
so tests and the backend benchmark can compare them directly. ``q`` is
expected pre-scaled. ``out`` is written in place.
"""

from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from .._backend import USE_NUMBA, njit

CHUNK = 128


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@njit
def _window_shared_nb(q, k, v, lo, hi, mk, mv, out):
    n, d = q.shape
    r = mk.shape[0]
    width = 0
    for i in range(n):
        if hi[i] - lo[i] > width:
            width = hi[i] - lo[i]
    s = np.empty(width + r)
    for i in range(n):
        a, b = lo[i], hi[i]
        cnt = b - a
        best = -np.inf
        for t in range(cnt):
            acc = 0.0
            for c in range(d):
                acc += q[i, c] * k[a + t, c]
            s[t] = acc
            if acc > best:
                best = acc
        for t in range(r):
            acc = 0.0
            for c in range(d):
                acc += q[i, c] * mk[t, c]
            s[cnt + t] = acc
            if acc > best:
                best = acc
        tot = 0.0
        for t in range(cnt + r):
            s[t] = math.exp(s[t] - best)
            tot += s[t]
        for c in range(d):
            out[i, c] = 0.0
        for t in range(cnt):
            w = s[t] / tot
            for c in range(d):
                out[i, c] += w * v[a + t, c]
        for t in range(r):
            w = s[cnt + t] / tot
            for c in range(d):
                out[i, c] += w * mv[t, c]


@njit
def _window_prefix_nb(q, k, v, lo, hi, logit_k, logit_v, out):
    n, d = q.shape
    r = logit_k.shape[1]
    width = 0
    for i in range(n):
        if hi[i] - lo[i] > width:
            width = hi[i] - lo[i]
    s = np.empty(width + r)
    mx_k = np.full(r, -np.inf)
    mx_v = np.full(r, -np.inf)
    den_k = np.zeros(r)
    den_v = np.zeros(r)
    num_k = np.zeros((r, d))
    num_v = np.zeros((r, d))
    mem_k = np.empty((r, d))
    for i in range(n):
        # fold key/value i into every slot's running softmax
        for t in range(r):
            a = logit_k[i, t]
            if a > mx_k[t]:
                f = math.exp(mx_k[t] - a)
                den_k[t] *= f
                for c in range(d):
                    num_k[t, c] *= f
                mx_k[t] = a
            e = math.exp(a - mx_k[t])
            den_k[t] += e
            for c in range(d):
                num_k[t, c] += e * k[i, c]
            a = logit_v[i, t]
            if a > mx_v[t]:
                f = math.exp(mx_v[t] - a)
                den_v[t] *= f
                for c in range(d):
                    num_v[t, c] *= f
                mx_v[t] = a
            e = math.exp(a - mx_v[t])
            den_v[t] += e
            for c in range(d):
                num_v[t, c] += e * v[i, c]
            for c in range(d):
                mem_k[t, c] = num_k[t, c] / den_k[t]
        a0, b0 = lo[i], hi[i]
        cnt = b0 - a0
        best = -np.inf
        for t in range(cnt):
            acc = 0.0
            for c in range(d):
                acc += q[i, c] * k[a0 + t, c]
            s[t] = acc
            if acc > best:
                best = acc
        for t in range(r):
            acc = 0.0
            for c in range(d):
                acc += q[i, c] * mem_k[t, c]
            s[cnt + t] = acc
            if acc > best:
                best = acc
        tot = 0.0
        for t in range(cnt + r):
            s[t] = math.exp(s[t] - best)
            tot += s[t]
        for c in range(d):
            out[i, c] = 0.0
        for t in range(cnt):
            w = s[t] / tot
            for c in range(d):
                out[i, c] += w * v[a0 + t, c]
        for t in range(r):
            w = s[cnt + t] / (tot * den_v[t])
            for c in range(d):
                out[i, c] += w * num_v[t, c]


# --------------------------------------------------------------------------
# numpy fallbacks
# --------------------------------------------------------------------------


def _gather_window(k, v, lo, hi, rows):
    """Window keys/values for ``rows`` as (B, W, d) plus a validity mask."""
    width = int((hi[rows] - lo[rows]).max(initial=0))
    offs = np.arange(width)
    idx = lo[rows, None] + offs[None, :]
    valid = idx < hi[rows, None]
    idx = np.where(valid, idx, 0)
    return k[idx], v[idx], valid


def _chunk_softmax(qc, wk, wv, valid, mk, mv):
    """Joint softmax over window (B, W, d) and memory (B or 1, r, d)."""
    sw = np.einsum("bd,bwd->bw", qc, wk)
    sw[~valid] = -np.inf
    sm = np.einsum("bd,brd->br", qc, mk) if mk.shape[1] else np.empty((qc.shape[0], 0))
    s = np.concatenate([sw, sm], axis=1)
    s -= s.max(axis=1, keepdims=True)
    np.exp(s, out=s)
    s /= s.sum(axis=1, keepdims=True)
    w = wk.shape[1]
    res = np.einsum("bw,bwd->bd", s[:, :w], wv)
    if mk.shape[1]:
        res += np.einsum("br,brd->bd", s[:, w:], mv)
    return res


def _window_shared_np(q, k, v, lo, hi, mk, mv, out):
    n = q.shape[0]
    for c0 in range(0, n, CHUNK):
        rows = np.arange(c0, min(n, c0 + CHUNK))
        wk, wv, valid = _gather_window(k, v, lo, hi, rows)
        mk3 = np.broadcast_to(mk, (len(rows),) + mk.shape)
        mv3 = np.broadcast_to(mv, (len(rows),) + mv.shape)
        out[rows] = _chunk_softmax(q[rows], wk, wv, valid, mk3, mv3)


class _PrefixSoftmax:
    """Chunked running softmax-weighted average of ``x`` under slot logits.

    ``advance(logits_c, x_c)`` consumes the next block of rows and returns the
    (B, r, d) averages over all rows seen so far, one per row of the block.
    """

    def __init__(self, r, d):
        self.mx = np.full(r, -np.inf)
        self.num = np.zeros((r, d))
        self.den = np.zeros(r)

    def advance(self, logits_c, x_c):
        ref = np.maximum(self.mx, logits_c.max(axis=0))
        carry = np.exp(self.mx - ref)
        w = np.exp(logits_c - ref)
        num = np.cumsum(w[:, :, None] * x_c[:, None, :], axis=0)
        num += (self.num * carry[:, None])[None]
        den = np.cumsum(w, axis=0) + (self.den * carry)[None]
        self.mx, self.num, self.den = ref, num[-1].copy(), den[-1].copy()
        return num / den[:, :, None]


def _window_prefix_np(q, k, v, lo, hi, logit_k, logit_v, out):
    n, d = q.shape
    r = logit_k.shape[1]
    scan_k = _PrefixSoftmax(r, d)
    scan_v = _PrefixSoftmax(r, d)
    for c0 in range(0, n, CHUNK):
        rows = np.arange(c0, min(n, c0 + CHUNK))
        mk = scan_k.advance(logit_k[rows], k[rows])
        mv = scan_v.advance(logit_v[rows], v[rows])
        wk, wv, valid = _gather_window(k, v, lo, hi, rows)
        out[rows] = _chunk_softmax(q[rows], wk, wv, valid, mk, mv)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def _prep(q, k, v, lo, hi):
    return (
        np.ascontiguousarray(q, dtype=np.float64),
        np.ascontiguousarray(k, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.float64),
        np.ascontiguousarray(lo, dtype=np.int64),
        np.ascontiguousarray(hi, dtype=np.int64),
    )


def window_shared(q, k, v, lo, hi, mk=None, mv=None, *, use_numba=None):
    """softmax over window keys ``lo[i]:hi[i]`` plus shared memory rows."""
    q, k, v, lo, hi = _prep(q, k, v, lo, hi)
    d = q.shape[1]
    mk = np.zeros((0, d)) if mk is None else np.ascontiguousarray(mk, dtype=np.float64)
    mv = np.zeros((0, d)) if mv is None else np.ascontiguousarray(mv, dtype=np.float64)
    out = T.empty(q.shape)
    fn = _window_shared_nb if (USE_NUMBA if use_numba is None else use_numba) else _window_shared_np
    fn(q, k, v, lo, hi, mk, mv, out)
    return out


def window_prefix(q, k, v, lo, hi, logit_k, logit_v, *, use_numba=None):
    """softmax over window keys plus a memory built from keys ``0..i``.

    Memory slot ``t`` at row ``i`` is ``sum_{j<=i} e^{a_jt} x_j / sum_{j<=i} e^{a_jt}``
    with ``a = logit_k, x = k`` for keys and ``a = logit_v, x = v`` for values.
    """
    q, k, v, lo, hi = _prep(q, k, v, lo, hi)
    logit_k = np.ascontiguousarray(logit_k, dtype=np.float64)
    logit_v = np.ascontiguousarray(logit_v, dtype=np.float64)
    out = T.empty(q.shape)
    fn = _window_prefix_nb if (USE_NUMBA if use_numba is None else use_numba) else _window_prefix_np
    fn(q, k, v, lo, hi, logit_k, logit_v, out)
    return out
