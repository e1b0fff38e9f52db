"""Cost-curve fits and the efficiency length.

Vanilla attention's cost is modelled as ``a x^2 + b x + c`` and an efficient
mechanism's as ``e x + f``; the efficiency length is the larger crossing of
the two fitted curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import FitError

QUADRATIC = "quadratic"
LINEAR = "linear"
_DEGREE = {QUADRATIC: 2, LINEAR: 1}


@dataclass(frozen=True)
class CurveFit:
    kind: str
    coefficients: tuple[float, ...]  # highest power first
    r_squared: float

    def __call__(self, x):
        return np.polyval(self.coefficients, x)


@dataclass(frozen=True)
class EfficiencyLength:
    length: float
    exists: bool


def fit_curve(points: Iterable[tuple[float, float]], kind: str) -> CurveFit:
    """Ordinary least squares through the normal equations.

    x is divided by max|x| and every design column is scaled to unit norm
    before forming the normal matrix; coefficients are unscaled on return.
    """
    if kind not in _DEGREE:
        raise FitError(f"kind must be {QUADRATIC!r} or {LINEAR!r}, got {kind!r}")
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError("points must be (x, y) pairs")
    x, y = pts[:, 0], pts[:, 1]
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise FitError("points must be finite")
    p = _DEGREE[kind] + 1
    if len(x) < p:
        raise FitError(f"{kind} fit needs at least {p} points, got {len(x)}")
    if len(np.unique(x)) < p:
        raise FitError(f"{kind} fit needs {p} distinct x values (singular system)")

    xs = float(np.abs(x).max())
    t = x / xs
    design = np.vander(t, p)
    col = np.linalg.norm(design, axis=0)
    design = design / col
    normal = design.T @ design
    if np.linalg.cond(normal) > 1e14:
        raise FitError("normal equations are singular")
    beta = np.linalg.solve(normal, design.T @ y)
    powers = np.arange(p - 1, -1, -1)
    coef = beta / col / xs**powers

    resid = y - np.polyval(coef, x)
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return CurveFit(kind, tuple(float(c) for c in coef), r2)


def efficiency_length(quad: CurveFit, lin: CurveFit) -> EfficiencyLength:
    """Larger real root of ``a x^2 + (b - e) x + (c - f) = 0``.

    ``exists`` is False when the quadratic does not open upwards, when the
    curves never meet, or when they only meet at non-positive lengths.
    """
    if quad.kind != QUADRATIC or lin.kind != LINEAR:
        raise ValueError(f"expected (quadratic, linear) fits, got ({quad.kind}, {lin.kind})")
    a, b, c = quad.coefficients
    e, f = lin.coefficients
    qb, qc = b - e, c - f
    if not a > 0:
        return EfficiencyLength(math.nan, False)
    disc = qb * qb - 4.0 * a * qc
    if disc < 0:
        return EfficiencyLength(math.nan, False)
    # cancellation-free pair of roots
    s = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
    roots = [s / a]
    if s != 0:
        roots.append(qc / s)
    else:
        roots.append(0.0)
    root = max(roots)
    if not root > 0:
        return EfficiencyLength(root, False)
    return EfficiencyLength(root, True)


def efficiency_report(records: Sequence, baseline: str = "vanilla") -> list[dict]:
    """Fit every mechanism in ``records`` (bench records) against the baseline,
    for time and memory. One dict per (mechanism, metric)."""
    from .bench import series

    out = []
    for metric in ("time", "memory"):
        curves = series(records, metric)
        if baseline not in curves:
            raise ValueError(f"no {baseline} records to fit the quadratic baseline")
        quad = fit_curve(curves[baseline], QUADRATIC)
        for name in sorted(curves):
            if name == baseline:
                continue
            lin = fit_curve(curves[name], LINEAR)
            el = efficiency_length(quad, lin)
            out.append({
                "mechanism": name,
                "metric": metric,
                "baseline": baseline,
                "baseline_coefficients": {"a": quad.coefficients[0], "b": quad.coefficients[1], "c": quad.coefficients[2]},
                "baseline_r_squared": quad.r_squared,
                "coefficients": {"e": lin.coefficients[0], "f": lin.coefficients[1]},
                "r_squared": lin.r_squared,
                "efficiency_length": el.length if el.exists else None,
                "exists": el.exists,
            })
    return out
