"""Self-checks for every mechanism: oracle limits, causality, invariants.

Each check builds its own dense reference (explicit visibility masks, direct
loops) rather than reusing the fast paths it is checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import tensor as T
from .core import (
    ALL_PATTERNS,
    MECHANISM_NAMES,
    SUPPORT,
    AttentionInputs,
    AttentionPattern,
    canonical_name,
    causality_probe,
)
from .errors import UnsupportedPatternError
from .mechanisms import MechanismConfig, attend
from .mechanisms._common import head_rng
from .mechanisms.abc import slot_memory, slot_weights
from .mechanisms.cosformer import cos_positions
from .mechanisms.longshort import segment_window_bounds
from .mechanisms.performer import lara_attention, performer_attention
from .mechanisms.s4d import discretize, init_s4d, s4d_kernel, s4d_layer

NS, CS, NC, CC = ALL_PATTERNS


@dataclass(frozen=True)
class CheckResult:
    mechanism: str
    check: str
    passed: bool
    error: float | None = None
    tolerance: float | None = None
    note: str = ""


def masked_softmax_oracle(q, k, v, visible) -> np.ndarray:
    """Row-by-row softmax over the keys marked visible, 1/sqrt(d) scaling."""
    n, d = q.shape
    out = np.zeros((n, v.shape[1]))
    for i in range(n):
        idx = np.flatnonzero(visible[i])
        s = (k[idx] @ q[i]) / math.sqrt(d)
        w = np.exp(s - s.max())
        out[i] = (w / w.sum()) @ v[idx]
    return out


def per_head(inputs: AttentionInputs, fn) -> np.ndarray:
    dh = inputs.head_dim
    cols = [slice(h * dh, (h + 1) * dh) for h in range(inputs.heads)]
    return np.hstack([fn(inputs.q[:, c], inputs.k[:, c], inputs.v[:, c], h) for h, c in enumerate(cols)])


def dense_oracle(inputs: AttentionInputs, visible: np.ndarray) -> np.ndarray:
    return per_head(inputs, lambda q, k, v, h: masked_softmax_oracle(q, k, v, visible))


def random_inputs(rng, n, m, d, pattern, heads=1, scale=1.0) -> AttentionInputs:
    pattern = AttentionPattern.parse(pattern)
    if not pattern.cross:
        m = n
    q = rng.standard_normal((n, d)) * scale
    k = rng.standard_normal((m, d)) * scale
    v = rng.standard_normal((m, d))
    return AttentionInputs(q, k, v, pattern, heads)


class _Suite:
    def __init__(self, mechanism: str, seed: int):
        self.mechanism = mechanism
        self.seed = seed
        self.results: list[CheckResult] = []

    def rng(self, salt: int) -> T.Rng:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, salt])))

    def close(self, check: str, error: float, tol: float, note: str = "") -> None:
        self.results.append(CheckResult(self.mechanism, check, bool(error <= tol), float(error), tol, note))

    def flag(self, check: str, ok: bool, note: str = "") -> None:
        self.results.append(CheckResult(self.mechanism, check, bool(ok), note=note))


def _maxdiff(a, b) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def _check_support(s: _Suite) -> None:
    rng = s.rng(1)
    wrong = []
    for p in ALL_PATTERNS:
        inputs = random_inputs(rng, 8, 8, 8, p, heads=2)
        try:
            attend(s.mechanism, inputs, MechanismConfig(num_landmarks=4, window=4))
            accepted = True
        except UnsupportedPatternError:
            accepted = False
        if accepted != (p in SUPPORT[s.mechanism]):
            wrong.append(p.short)
    s.flag("support-matrix", not wrong, "mismatch: " + ",".join(wrong) if wrong else "")


def _check_shape_finite(s: _Suite) -> None:
    rng = s.rng(2)
    bad = []
    for p in sorted(SUPPORT[s.mechanism], key=ALL_PATTERNS.index):
        inputs = random_inputs(rng, 32, 24, 16, p, heads=2)
        out = attend(s.mechanism, inputs)
        if out.shape != (inputs.n, inputs.d) or not np.isfinite(out).all():
            bad.append(p.short)
    s.flag("shape-finite", not bad, ",".join(bad))


def _check_constant_values(s: _Suite) -> None:
    if s.mechanism == "s4d":
        return
    rng = s.rng(3)
    tol = 1e-3 if s.mechanism == "nystrom" else 1e-10
    err = 0.0
    for p in sorted(SUPPORT[s.mechanism], key=ALL_PATTERNS.index):
        inputs = random_inputs(rng, 32, 24, 16, p, heads=2, scale=0.5)
        c = rng.standard_normal(16)
        inputs = inputs.replace(v=np.tile(c, (inputs.m, 1)))
        err = max(err, _maxdiff(attend(s.mechanism, inputs), np.tile(c, (inputs.n, 1))))
    s.close("constant-values", err, tol)


def _check_causality(s: _Suite) -> None:
    rng = s.rng(4)
    for p in (CS, CC):
        if p not in SUPPORT[s.mechanism]:
            continue
        err = 0.0
        for n in (8, 32):
            for trial in range(5):
                inputs = random_inputs(rng, n, n + 3, 8, p, heads=2)
                pos = int(rng.integers(0, n))
                cfg = MechanismConfig(window=4, num_landmarks=4, seed=trial)
                err = max(err, causality_probe(s.mechanism, cfg, inputs, pos, rng))
        s.close(f"causality-{p.short}", err, 1e-10)


def _vanilla(s: _Suite) -> None:
    rng = s.rng(10)
    inputs = random_inputs(rng, 8, 8, 4, CS)
    vis = np.tril(np.ones((8, 8), bool))
    s.close("causal-mask-oracle", _maxdiff(attend("vanilla", inputs), dense_oracle(inputs, vis)), 1e-12)
    inputs = random_inputs(rng, 12, 7, 16, NC, heads=4)
    s.close("multihead-concat", _maxdiff(attend("vanilla", inputs), dense_oracle(inputs, np.ones((12, 7), bool))), 1e-12)
    inputs = random_inputs(rng, 4, 4, 4, NS)
    moved = inputs.replace(k=np.vstack([inputs.k[:1], rng.standard_normal((3, 4))]))
    shift = _maxdiff(attend("vanilla", inputs)[0], attend("vanilla", moved)[0])
    s.flag("noncausal-negative-control", shift > 0, f"row 0 moved by {shift:.2e}")


def _local(s: _Suite) -> None:
    rng = s.rng(11)
    err = 0.0
    for n in (8, 32, 64):
        inputs = random_inputs(rng, n, n, 16, NS, heads=2)
        err = max(err, _maxdiff(attend("local", inputs, MechanismConfig(window=2 * n)), attend("vanilla", inputs)))
    s.close("full-window-equals-vanilla", err, 1e-12)
    cfg = MechanismConfig(window=6)
    err = 0.0
    for p in (NS, CS):
        inputs = random_inputs(rng, 20, 20, 8, p, heads=2)
        i, j = np.indices((20, 20))
        vis = (j >= i - 3) & ((j <= i) if p is CS else (j <= i + 3))
        err = max(err, _maxdiff(attend("local", inputs, cfg), dense_oracle(inputs, vis)))
    s.close("window-mask-oracle", err, 1e-12)


def _nystrom(s: _Suite) -> None:
    rng = s.rng(12)
    err = 0.0
    for n in (8, 32, 64):
        inputs = random_inputs(rng, n, n, 16, NS)
        cfg = MechanismConfig(num_landmarks=n, pinv_iters=None)
        err = max(err, _maxdiff(attend("nystrom", inputs, cfg), attend("vanilla", inputs)))
    s.close("full-landmarks-equals-vanilla", err, 1e-3)
    v = rng.standard_normal((1, 4))
    one = AttentionInputs(rng.standard_normal((1, 4)), rng.standard_normal((1, 4)), v)
    s.close("single-token", _maxdiff(attend("nystrom", one, MechanismConfig(num_landmarks=1)), v), 1e-12)


def _performer(s: _Suite) -> None:
    rng = s.rng(13)
    k = rng.standard_normal((10, 4))
    k /= np.linalg.norm(k, axis=1, keepdims=True)
    inputs = AttentionInputs(rng.standard_normal((6, 4)), k, rng.standard_normal((10, 4)), NC)
    out = performer_attention(inputs, features=np.zeros((8, 4)))
    s.close("zero-features-uniform", _maxdiff(out, np.tile(inputs.v.mean(axis=0), (6, 1))), 1e-12)

    def median_error(r: int) -> float:
        errs = []
        for b in range(5):
            g = s.rng(100 + b)
            q, kk = g.standard_normal((16, 4)), g.standard_normal((16, 4))
            q /= np.maximum(1.0, np.linalg.norm(q, axis=1, keepdims=True))
            kk /= np.maximum(1.0, np.linalg.norm(kk, axis=1, keepdims=True))
            x = AttentionInputs(q, kk, g.standard_normal((16, 4)))
            ref = attend("vanilla", x)
            est = attend("performer", x, MechanismConfig(approx_dim=r, seed=b))
            errs.append(np.median(np.abs(est - ref) / np.abs(ref)))
        return float(np.median(errs))

    lo, hi = median_error(64), median_error(4096)
    s.flag("feature-convergence", hi < lo, f"median rel err {lo:.3e} -> {hi:.3e}")
    nc = random_inputs(rng, 9, 13, 8, NC, heads=2)
    s.close("nc-equals-cc", _maxdiff(attend("performer", nc), attend("performer", nc.replace(pattern=CC))), 0.0)


def _lara(s: _Suite) -> None:
    rng = s.rng(14)
    inputs = random_inputs(rng, 16, 16, 8, NS, heads=2, scale=0.5)
    cfg = MechanismConfig(approx_dim=32, seed=3)
    ref = performer_attention(inputs, cfg)
    out = lara_attention(inputs, cfg, proposal_means=np.zeros((1, 4)))
    s.close("single-standard-proposal-is-performer", _maxdiff(out, ref), 0.0)


def _cosformer(s: _Suite) -> None:
    rng = s.rng(15)
    err = 0.0
    for n, m in ((12, 12), (5, 17), (23, 3), (1, 1)):
        p = NS if n == m else NC
        inputs = random_inputs(rng, n, m, 8, p, heads=2)

        def quad(q, k, v, h):
            length = max(q.shape[0], k.shape[0])
            i = np.arange(q.shape[0])[:, None]
            j = np.arange(k.shape[0])[None, :]
            w = (np.maximum(q, 0) @ np.maximum(k, 0).T) * np.cos(np.pi * (i - j) / (2 * length))
            return (w @ v) / np.maximum(w.sum(axis=1, keepdims=True), 1e-6)

        err = max(err, _maxdiff(attend("cosformer", inputs), per_head(inputs, quad)))
    s.close("ptolemy-quadratic-oracle", err, 1e-10)
    cosv, sinv = cos_positions(3, 3)
    s.close("position-angles", abs(cosv[0] - 1.0) + abs(sinv[0]), 0.0)


def _longshort(s: _Suite) -> None:
    rng = s.rng(16)
    cfg = MechanismConfig(window=4, num_landmarks=0)
    err = 0.0
    for p in (NS, CS):
        inputs = random_inputs(rng, 23, 23, 8, p, heads=2)
        lo, hi = segment_window_bounds(23, 4, p is CS)
        j = np.arange(23)[None, :]
        vis = (j >= lo[:, None]) & (j < hi[:, None])
        err = max(err, _maxdiff(attend("longshort", inputs, cfg), dense_oracle(inputs, vis)))
    s.close("no-landmarks-equals-segment-mask", err, 1e-12)
    inputs = random_inputs(rng, 24, 24, 8, NS, heads=2)
    cfg = MechanismConfig(window=4, num_landmarks=3)
    ns = attend("longshort", inputs, cfg)
    cs = attend("longshort", inputs.replace(pattern=CS), cfg)
    s.close("causal-final-row-equals-noncausal", _maxdiff(ns[-1], cs[-1]), 1e-10)


def _probsparse(s: _Suite) -> None:
    rng = s.rng(17)
    err = 0.0
    for n in (8, 32, 64):
        inputs = random_inputs(rng, n, n, 16, NS, heads=2)
        err = max(err, _maxdiff(attend("probsparse", inputs, MechanismConfig(top_u=n)), attend("vanilla", inputs)))
    s.close("all-queries-equals-vanilla", err, 1e-12)
    inputs = random_inputs(rng, 20, 20, 8, NS)
    out = attend("probsparse", inputs, MechanismConfig(top_u=0))
    s.close("no-queries-mean-of-v", _maxdiff(out, np.tile(inputs.v.mean(axis=0), (20, 1))), 1e-12)


def _abc(s: _Suite) -> None:
    rng = s.rng(18)
    cfg = MechanismConfig(num_landmarks=5)
    inputs = random_inputs(rng, 17, 17, 8, NS, heads=2)

    def slots(q, k, v, h):
        wk, wv = slot_weights(cfg, h, q.shape[1])
        ks = np.zeros((5, q.shape[1]))
        vs = np.zeros_like(ks)
        for r in range(5):
            a = k @ wk[r]
            b = v @ wv[r]
            pa, pb = np.exp(a - a.max()), np.exp(b - b.max())
            ks[r] = pa @ k / pa.sum()
            vs[r] = pb @ v / pb.sum()
        return masked_softmax_oracle(q, ks, vs, np.ones((q.shape[0], 5), bool))

    s.close("slot-memory-oracle", _maxdiff(attend("abc", inputs, cfg), per_head(inputs, slots)), 1e-12)
    _, weights = slot_memory(inputs.k[:, :4], slot_weights(cfg, 0, 4)[0])
    s.close("slot-weights-normalized", _maxdiff(weights.sum(axis=1), 1.0), 1e-12)
    ns = attend("abc", inputs, cfg)
    cs = attend("abc", inputs.replace(pattern=CS), cfg)
    s.close("causal-final-row-equals-noncausal", _maxdiff(ns[-1], cs[-1]), 1e-10)
    nc = random_inputs(rng, 9, 13, 8, NC, heads=2)
    s.close("nc-equals-cc", _maxdiff(attend("abc", nc, cfg), attend("abc", nc.replace(pattern=CC), cfg)), 0.0)


def s4d_recurrence(u: np.ndarray, params, reverse: bool = False) -> np.ndarray:
    """Step the discretized state space one token at a time (no skip term)."""
    a_bar, b_bar = discretize(params)
    seq = u[::-1] if reverse else u
    x = np.zeros(a_bar.shape, dtype=np.complex128)
    y = np.zeros(u.shape)
    for t in range(u.shape[0]):
        x = a_bar * x + b_bar * seq[t][:, None]
        y[t] = (params.c * x).sum(axis=1).real
    return y[::-1] if reverse else y


def _s4d(s: _Suite) -> None:
    rng = s.rng(19)
    params = init_s4d(6, 16, rng)
    u = rng.standard_normal((64, 6))
    err = 0.0
    for p in (CS, NS):
        ref = s4d_recurrence(u, params) + params.d_skip * u
        if p is NS:
            ref += s4d_recurrence(u, params, reverse=True)
        err = max(err, _maxdiff(s4d_layer(u, params, p), ref) / max(1.0, np.abs(ref).max()))
    s.close("recurrence-oracle", err, 1e-8)
    impulse = np.zeros((32, 6))
    impulse[0] = 1.0
    no_skip = params.with_skip(0.0)
    s.close("impulse-response-is-kernel", _maxdiff(s4d_layer(impulse, no_skip, CS), s4d_kernel(no_skip, 32)), 1e-12)
    # at the last position the backward pass only contributes K_0 u_{n-1}
    inputs = random_inputs(rng, 24, 24, 8, NS)
    ns = attend("s4d", inputs)
    cs = attend("s4d", inputs.replace(pattern=CS))
    k0 = s4d_kernel(init_s4d(8, 16, head_rng(0, "s4d", 0)), 1)[0]
    s.close("causal-final-row-equals-forward", _maxdiff(ns[-1] - k0 * inputs.v[-1], cs[-1]), 1e-10)


_SPECIFIC: dict[str, Callable[[_Suite], None]] = {
    "vanilla": _vanilla,
    "local": _local,
    "nystrom": _nystrom,
    "performer": _performer,
    "lara": _lara,
    "cosformer": _cosformer,
    "longshort": _longshort,
    "probsparse": _probsparse,
    "abc": _abc,
    "s4d": _s4d,
}


def run_checks(mechanism: str, seed: int = 0) -> list[CheckResult]:
    name = canonical_name(mechanism)
    suite = _Suite(name, seed)
    for step in (_check_support, _check_shape_finite, _check_constant_values, _check_causality, _SPECIFIC[name]):
        try:
            step(suite)
        except Exception as exc:  # a crash is a failed check, not a crashed report
            suite.flag(step.__name__.lstrip("_"), False, f"{type(exc).__name__}: {exc}")
    return suite.results


def run_all(mechanisms: Iterable[str] = MECHANISM_NAMES, seed: int = 0) -> list[CheckResult]:
    return [r for m in mechanisms for r in run_checks(m, seed)]


def format_report(results: Iterable[CheckResult]) -> str:
    rows = list(results)
    lines = [f"{'mechanism':<11} {'check':<38} {'result':<6} {'error':>10} {'tol':>8}  note"]
    for r in rows:
        err = "" if r.error is None else f"{r.error:.2e}"
        tol = "" if r.tolerance is None else f"{r.tolerance:.0e}"
        lines.append(f"{r.mechanism:<11} {r.check:<38} {'PASS' if r.passed else 'FAIL':<6} {err:>10} {tol:>8}  {r.note}".rstrip())
    failed = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - failed}/{len(rows)} checks passed")
    return "\n".join(lines) + "\n"
