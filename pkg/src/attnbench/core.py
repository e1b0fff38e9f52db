"""Attention taxonomy, QKV projection, the dense reference attention and the
mechanism/pattern support table."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .errors import ShapeError, UnknownMechanismError, UnsupportedPatternError

# Finite stand-in for -inf on masked scores; exp() of it underflows to exactly 0.
MASK_VALUE = -1e300


class AttentionPattern(str, enum.Enum):
    """Conditionality (self/cross) x causality (noncausal/causal)."""

    NONCAUSAL_SELF = "ns"
    CAUSAL_SELF = "cs"
    NONCAUSAL_CROSS = "nc"
    CAUSAL_CROSS = "cc"

    NS = "ns"
    CS = "cs"
    NC = "nc"
    CC = "cc"

    @property
    def causal(self) -> bool:
        return self.value in ("cs", "cc")

    @property
    def cross(self) -> bool:
        return self.value in ("nc", "cc")

    @property
    def short(self) -> str:
        return self.value.upper()

    @classmethod
    def parse(cls, value: "str | AttentionPattern") -> "AttentionPattern":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        try:
            return cls(text)
        except ValueError:
            long = text.replace("-", "_").replace(" ", "_").upper()
            if long in cls.__members__:
                return cls.__members__[long]
            raise ValueError(f"unknown attention pattern {value!r}; expected ns, cs, nc or cc") from None


ALL_PATTERNS = (
    AttentionPattern.NS,
    AttentionPattern.CS,
    AttentionPattern.NC,
    AttentionPattern.CC,
)


@dataclass(frozen=True)
class AttentionInputs:
    """Queries (n x d), keys and values (m x d), the pattern and head count."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    pattern: AttentionPattern = AttentionPattern.NS
    heads: int = 1

    def __post_init__(self):
        q = T.as_matrix(self.q, "Q")
        k = T.as_matrix(self.k, "K")
        v = T.as_matrix(self.v, "V")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "pattern", AttentionPattern.parse(self.pattern))
        if not (q.shape[1] == k.shape[1] == v.shape[1]):
            raise ShapeError(f"Q, K, V must share d: {q.shape}, {k.shape}, {v.shape}")
        if k.shape[0] != v.shape[0]:
            raise ShapeError(f"K and V must have the same length: {k.shape[0]} != {v.shape[0]}")
        if self.heads < 1 or q.shape[1] % self.heads:
            raise ShapeError(f"d={q.shape[1]} is not divisible by heads={self.heads}")
        if not self.pattern.cross and q.shape[0] != k.shape[0]:
            raise ShapeError(
                f"self attention needs n == m, got n={q.shape[0]}, m={k.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m(self) -> int:
        return self.k.shape[0]

    @property
    def d(self) -> int:
        return self.q.shape[1]

    @property
    def head_dim(self) -> int:
        return self.d // self.heads

    def replace(self, **changes) -> "AttentionInputs":
        fields = dict(q=self.q, k=self.k, v=self.v, pattern=self.pattern, heads=self.heads)
        fields.update(changes)
        return AttentionInputs(**fields)


@dataclass(frozen=True)
class ProjectionWeights:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        shapes = set()
        for name in ("w_q", "w_k", "w_v"):
            w = T.ensure_finite(T.as_matrix(getattr(self, name), name), name)
            if w.shape[0] != w.shape[1]:
                raise ShapeError(f"{name} must be square, got {w.shape}")
            shapes.add(w.shape)
            object.__setattr__(self, name, w)
        if len(shapes) != 1:
            raise ShapeError(f"projection weights disagree in shape: {sorted(shapes)}")

    @classmethod
    def random(cls, rng: T.Rng, d: int) -> "ProjectionWeights":
        s = 1.0 / math.sqrt(d)
        return cls(*(T.gaussian_matrix(rng, d, d) * s for _ in range(3)))


def project(
    x: np.ndarray,
    y: np.ndarray | None,
    w: ProjectionWeights,
    pattern: "AttentionPattern | str" = AttentionPattern.NS,
    heads: int = 1,
) -> AttentionInputs:
    """Q = Y W_Q, K = X W_K, V = X W_V. ``x`` is the source, ``y`` the target.

    For self patterns ``y`` may be omitted (it defaults to ``x``).
    """
    pattern = AttentionPattern.parse(pattern)
    x = T.as_matrix(x, "X")
    y = x if y is None else T.as_matrix(y, "Y")
    d = w.w_q.shape[0]
    if x.shape[1] != d or y.shape[1] != d:
        raise ShapeError(f"inputs have {x.shape[1]}/{y.shape[1]} columns, weights expect {d}")
    if not pattern.cross and x.shape != y.shape:
        raise ShapeError(f"self attention needs X and Y of equal shape, got {x.shape} vs {y.shape}")
    return AttentionInputs(
        q=T.matmul(y, w.w_q),
        k=T.matmul(x, w.w_k),
        v=T.matmul(x, w.w_v),
        pattern=pattern,
        heads=heads,
    )


HeadFn = Callable[[np.ndarray, np.ndarray, np.ndarray, int], np.ndarray]


def run_heads(inputs: AttentionInputs, head_fn: HeadFn) -> np.ndarray:
    """Apply ``head_fn(q_h, k_h, v_h, h)`` per head and concatenate columns."""
    dh = inputs.head_dim
    out = T.empty((inputs.n, inputs.d))
    for h in range(inputs.heads):
        cols = slice(h * dh, (h + 1) * dh)
        out[:, cols] = head_fn(inputs.q[:, cols], inputs.k[:, cols], inputs.v[:, cols], h)
    return out


def dense_softmax_head(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, causal: bool
) -> np.ndarray:
    scale = 1.0 / math.sqrt(q.shape[1])
    scores = T.matmul(q * scale, k.T)
    if causal:
        for i in range(scores.shape[0] - 1):
            scores[i, i + 1 :] = MASK_VALUE
    probs = T.softmax_rows(scores)
    del scores
    return T.matmul(probs, v)


def vanilla_attention(inputs: AttentionInputs) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_head)) V per head; keys after the query are
    masked for causal self attention."""
    causal = inputs.pattern is AttentionPattern.CAUSAL_SELF
    return run_heads(inputs, lambda q, k, v, h: dense_softmax_head(q, k, v, causal))


# --------------------------------------------------------------------------
# support matrix
# --------------------------------------------------------------------------

_NS, _CS, _NC, _CC = ALL_PATTERNS

SUPPORT: dict[str, frozenset[AttentionPattern]] = {
    "vanilla": frozenset(ALL_PATTERNS),
    "local": frozenset({_NS, _CS}),
    "nystrom": frozenset({_NS}),
    "performer": frozenset({_NS, _NC, _CC}),
    "lara": frozenset({_NS}),
    "cosformer": frozenset({_NS, _NC}),
    "longshort": frozenset({_NS, _CS}),
    "probsparse": frozenset({_NS}),
    "abc": frozenset(ALL_PATTERNS),
    "s4d": frozenset({_NS, _CS}),
}

MECHANISM_NAMES = tuple(SUPPORT)

DISPLAY_NAMES = {
    "vanilla": "vanilla",
    "local": "local",
    "nystrom": "Nystromformer",
    "performer": "Performer",
    "lara": "LARA",
    "cosformer": "cosFormer",
    "longshort": "LongShort",
    "probsparse": "ProbSparse",
    "abc": "ABC",
    "s4d": "S4D",
}


def canonical_name(mechanism: str) -> str:
    key = str(mechanism).strip().lower()
    key = {"nystromformer": "nystrom", "nyströmformer": "nystrom"}.get(key, key)
    if key not in SUPPORT:
        raise UnknownMechanismError(
            f"unknown mechanism {mechanism!r}; known: {', '.join(MECHANISM_NAMES)}"
        )
    return key


def check_support(mechanism: str, pattern: "AttentionPattern | str") -> bool:
    return AttentionPattern.parse(pattern) in SUPPORT[canonical_name(mechanism)]


def require_support(mechanism: str, pattern: AttentionPattern) -> None:
    if not check_support(mechanism, pattern):
        raise UnsupportedPatternError(
            f"{mechanism} does not support the {pattern.short} pattern"
        )


def support_table_csv() -> str:
    lines = ["mechanism,NS,CS,NC,CC"]
    for name in MECHANISM_NAMES:
        flags = ["1" if p in SUPPORT[name] else "0" for p in ALL_PATTERNS]
        lines.append(",".join([name, *flags]))
    return "\n".join(lines) + "\n"


def support_table_text() -> str:
    width = max(len(n) for n in MECHANISM_NAMES)
    lines = [f"{'mechanism':<{width}}  NS  CS  NC  CC"]
    for name in MECHANISM_NAMES:
        marks = ["yes" if p in SUPPORT[name] else " - " for p in ALL_PATTERNS]
        lines.append(f"{name:<{width}}  " + " ".join(f"{m:>3}" for m in marks))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# causality probe
# --------------------------------------------------------------------------


def causality_probe(
    mechanism: str,
    config,
    inputs: AttentionInputs,
    position: int,
    rng: T.Rng | None = None,
) -> float:
    """Max |change| of output rows ``0..position`` when every input row after
    ``position`` is replaced by fresh random values.

    For causal self attention the perturbed rows are those of Q, K and V (all
    come from the same sequence). For causal cross attention only the query
    rows are perturbed, since the source sequence is fully visible.
    """
    from .mechanisms import attend  # circular at import time

    name = canonical_name(mechanism)
    if not inputs.pattern.causal:
        raise UnsupportedPatternError(
            f"causality probe needs a causal pattern, got {inputs.pattern.short}"
        )
    require_support(name, inputs.pattern)
    if not 0 <= position < inputs.n:
        raise ValueError(f"position {position} outside [0, {inputs.n})")
    rng = rng if rng is not None else T.make_rng(0)

    def perturb(a: np.ndarray) -> np.ndarray:
        b = a.copy()
        tail = b[position + 1 :]
        tail[...] = rng.standard_normal(tail.shape) * (np.std(a) or 1.0)
        return b

    if inputs.pattern is AttentionPattern.CAUSAL_SELF:
        other = inputs.replace(q=perturb(inputs.q), k=perturb(inputs.k), v=perturb(inputs.v))
    else:
        other = inputs.replace(q=perturb(inputs.q))
    base = attend(name, inputs, config)
    moved = attend(name, other, config)
    return float(np.abs(base[: position + 1] - moved[: position + 1]).max())
