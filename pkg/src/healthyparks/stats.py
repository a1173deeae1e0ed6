"""Small statistics kernel: incomplete beta, Student-t distribution, Welch test, Pearson r."""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

__all__ = [
    "betainc",
    "t_cdf",
    "t_sf",
    "welch_ttest",
    "WelchResult",
    "pearson",
    "zscores",
]

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 20_000
SD_ZERO_RTOL = 1e-12


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _lgamma_corr(x: float) -> float:
    """Remainder of Stirling's series for ``lgamma(x)``, valid for x >= 10."""
    inv = 1.0 / x
    inv2 = inv * inv
    total = 0.0
    for coef in reversed(_STIRLING):
        total = total * inv2 + coef
    return total * inv


def _lbeta(a: float, b: float) -> float:
    """``log B(a, b)`` without cancellation for large arguments."""
    p, q = min(a, b), max(a, b)
    if p >= 10.0:
        corr = _lgamma_corr(p) + _lgamma_corr(q) - _lgamma_corr(p + q)
        return (
            -0.5 * math.log(q) + _LOG_SQRT_2PI + corr
            + (p - 0.5) * math.log(p / (p + q)) + q * math.log1p(-p / (p + q))
        )
    if q >= 10.0:
        corr = _lgamma_corr(q) - _lgamma_corr(p + q)
        return (
            math.lgamma(p) + corr + p - p * math.log(p + q)
            + (q - 0.5) * math.log1p(-p / (p + q))
        )
    return math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q)


def _front(a: float, b: float, log_x: float, log_y: float) -> float:
    return math.exp(a * log_x + b * log_y - _lbeta(a, b))


def betainc(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularised incomplete beta ``I_x(a, b)``.

    ``y`` may carry ``1 - x`` computed without cancellation by the caller.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    front = _front(a, b, math.log(x), math.log(y))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def _t_tail(t: float, df: float) -> float:
    """``P(T > |t|)`` for Student's t with ``df`` degrees of freedom."""
    t2 = t * t
    denom = df + t2
    x = df / denom
    y = t2 / denom
    # choose the branch that keeps the continued fraction argument small
    a, b = df / 2.0, 0.5
    front = _front(a, b, -math.log1p(t2 / df), math.log(t2) - math.log(denom))
    if x < (a + 1.0) / (a + b + 2.0):
        return 0.5 * front * _betacf(a, b, x) / a
    return 0.5 * (1.0 - front * _betacf(b, a, y) / b)


def t_cdf(t: float, df: float) -> float:
    """Cumulative distribution function of Student's t."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    if t == 0.0:
        return 0.5
    tail = _t_tail(t, df)
    return 1.0 - tail if t > 0 else tail


def t_sf(t: float, df: float) -> float:
    return t_cdf(-t, df)


class WelchResult(NamedTuple):
    t: float
    df: float
    p: float


def welch_ttest(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-sided Welch unequal-variance t-test.

    When both groups have zero variance the p-value is 1 for equal means and
    0 otherwise.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    n1, n2 = len(x), len(y)
    if n1 < 2 or n2 < 2:
        raise ValueError("each group needs at least two observations")
    m1, m2 = float(x.mean()), float(y.mean())
    q1 = float(x.var(ddof=1)) / n1
    q2 = float(y.var(ddof=1)) / n2
    se2 = q1 + q2
    if se2 == 0.0:
        return WelchResult(0.0 if m1 == m2 else math.copysign(math.inf, m1 - m2), math.nan, 1.0 if m1 == m2 else 0.0)
    t = (m1 - m2) / math.sqrt(se2)
    df = se2 * se2 / (q1 * q1 / (n1 - 1) + q2 * q2 / (n2 - 1))
    p = 1.0 if t == 0.0 else min(1.0, 2.0 * _t_tail(t, df))
    return WelchResult(t, df, p)


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, bool]:
    """Pearson correlation and a degenerate flag.

    Zero variance on either side yields ``(0.0, True)``.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if len(xa) != len(ya):
        raise ValueError("x and y differ in length")
    if len(xa) < 2:
        return 0.0, True
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0, True
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r)), False


def zscores(values: Sequence[float]) -> np.ndarray:
    """Population z-scores; all zeros when the standard deviation is zero.

    A spread at rounding level (``sd <= 1e-12 * max(1, max|v|)``) counts as zero.
    """
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return v
    if float(v.max() - v.min()) == 0.0:
        return np.zeros_like(v)
    sd = float(v.std())
    if not math.isfinite(sd) or sd <= SD_ZERO_RTOL * max(1.0, float(np.abs(v).max())):
        return np.zeros_like(v)
    return (v - v.mean()) / sd
