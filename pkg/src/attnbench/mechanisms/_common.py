from __future__ import annotations

import zlib

import numpy as np

from .. import tensor as T


def head_rng(seed: int, salt: str, head: int) -> T.Rng:
    """Independent, reproducible stream per (seed, purpose, head)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(salt.encode()), int(head)])
    return T.make_rng(int(ss.generate_state(1, np.uint64)[0]))


def segment_means(x: np.ndarray, r: int) -> np.ndarray:
    """Average ``r`` contiguous, near-equal segments of the rows of ``x``.

    Segment sizes differ by at most one (the first ``n % r`` are longer).
    """
    n = x.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n for segment means, got r={r}, n={n}")
    base, extra = divmod(n, r)
    sizes = np.full(r, base)
    sizes[:extra] += 1
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return T.track(np.add.reduceat(x, starts, axis=0) / sizes[:, None])


def column_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over axis 0 (the sequence), i.e. each column sums to one."""
    p = logits - logits.max(axis=0, keepdims=True)
    np.exp(p, out=p)
    p /= p.sum(axis=0, keepdims=True)
    return T.track(p)
