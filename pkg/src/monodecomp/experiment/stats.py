"""Welch's t-test and ordinary least squares with exact-distribution p-values.

Tail probabilities of the t and F distributions go through the regularized
incomplete beta function, evaluated with a Lentz continued fraction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import InputError, SampleTooSmall, SingularDesign

_FPMIN = 1e-300
_EPS = 1e-16
_MAX_ITER = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise InputError(f"betainc needs a, b > 0 (got {a}, {b})")
    if not 0.0 <= x <= 1.0:
        raise InputError(f"betainc needs x in [0, 1] (got {x})")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the continued fraction converges fast only below the mean; use symmetry above it
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t)))


def f_upper_p(f: float, df1: float, df2: float) -> float:
    if math.isinf(f):
        return 0.0
    if f <= 0:
        return 1.0
    return min(1.0, betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int

    def as_dict(self) -> dict:
        return asdict(self)


def _mean_var(sample: Sequence[float]) -> tuple[float, float]:
    n = len(sample)
    mean = math.fsum(sample) / n
    var = math.fsum((x - mean) ** 2 for x in sample) / (n - 1)
    return mean, var


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    a = [float(x) for x in sample_a]
    b = [float(x) for x in sample_b]
    if len(a) < 2 or len(b) < 2:
        raise SampleTooSmall(f"Welch's test needs >= 2 values per sample (got {len(a)}, {len(b)})")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    qa, qb = va / len(a), vb / len(b)
    se2 = qa + qb
    if se2 == 0.0:
        # both samples constant
        if ma == mb:
            return WelchResult(0.0, len(a) + len(b) - 2.0, 1.0, ma, mb, len(a), len(b))
        return WelchResult(math.copysign(math.inf, ma - mb), len(a) + len(b) - 2.0, 0.0,
                           ma, mb, len(a), len(b))
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (qa * qa / (len(a) - 1) + qb * qb / (len(b) - 1))
    return WelchResult(t, df, t_two_sided_p(t, df), ma, mb, len(a), len(b))


@dataclass(frozen=True)
class OlsResult:
    names: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float | None
    std_errors: tuple[float, ...]
    t_values: tuple[float, ...]
    p_values: tuple[float, ...]
    intercept_std_error: float | None
    intercept_t: float | None
    intercept_p: float | None
    r_squared: float
    f_statistic: float | None
    f_p_value: float | None
    df_model: int
    df_resid: int
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


def _t_and_p(coef: float, se: float, dof: int) -> tuple[float, float]:
    if se == 0.0:
        if coef == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, coef), 0.0
    t = coef / se
    return t, t_two_sided_p(t, dof)


def ols_fit(rows, y, with_intercept: bool = True, names: Sequence[str] | None = None) -> OlsResult:
    """Least squares through the normal equations ``(X'X) b = X'y``."""
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    yv = np.asarray(y, dtype=float)
    n, k = x.shape
    if yv.shape != (n,):
        raise InputError(f"y needs {n} values, got shape {yv.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(yv))):
        raise InputError("design and response must be finite")
    names = tuple(names) if names is not None else tuple(f"x{i + 1}" for i in range(k))
    if len(names) != k:
        raise InputError(f"{len(names)} names for {k} columns")
    design = np.hstack([x, np.ones((n, 1))]) if with_intercept else x
    p = design.shape[1]
    if n <= p:
        raise SampleTooSmall(f"need more rows ({n}) than coefficients ({p})")
    if np.linalg.matrix_rank(design) < p:
        raise SingularDesign("design columns are linearly dependent")

    xtx = design.T @ design
    constant_y = bool(np.all(yv == yv[0]))
    if with_intercept and constant_y:
        beta = np.zeros(p)
        beta[-1] = yv[0]
    else:
        beta = np.linalg.solve(xtx, design.T @ yv)
    resid = yv - design @ beta
    sse = float(resid @ resid)
    dof = n - p
    sigma2 = sse / dof
    cov = sigma2 * np.linalg.inv(xtx)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    tp = [_t_and_p(float(b), float(s), dof) for b, s in zip(beta, se)]

    if with_intercept:
        sst = float(((yv - yv.mean()) ** 2).sum())
        df_model = p - 1
    else:
        sst = float(yv @ yv)
        df_model = p
    r2 = 0.0 if sst == 0.0 else min(1.0, max(0.0, 1.0 - sse / sst))
    f_stat = f_p = None
    if df_model > 0:
        ssr = max(sst - sse, 0.0)
        if sse == 0.0:
            f_stat, f_p = (math.inf, 0.0) if ssr > 0 else (0.0, 1.0)
        else:
            f_stat = (ssr / df_model) / (sse / dof)
            f_p = f_upper_p(f_stat, df_model, dof)

    slopes = slice(0, k)
    return OlsResult(
        names=names,
        coefficients=tuple(float(b) for b in beta[slopes]),
        intercept=float(beta[-1]) if with_intercept else None,
        std_errors=tuple(float(s) for s in se[slopes]),
        t_values=tuple(t for t, _ in tp[slopes]),
        p_values=tuple(pv for _, pv in tp[slopes]),
        intercept_std_error=float(se[-1]) if with_intercept else None,
        intercept_t=tp[-1][0] if with_intercept else None,
        intercept_p=tp[-1][1] if with_intercept else None,
        r_squared=r2,
        f_statistic=f_stat,
        f_p_value=f_p,
        df_model=df_model,
        df_resid=dof,
        n=n,
    )


def drop_one_regressions(rows, y, names: Sequence[str], with_intercept: bool = True):
    """One fit per omitted column, for weight families that sum to a constant.

    Returns ``(omitted_name, OlsResult | SingularDesign)`` pairs, so one
    degenerate sub-design does not hide the others.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(names):
        raise InputError("one name per design column required")
    out = []
    for drop in range(x.shape[1]):
        keep = [c for c in range(x.shape[1]) if c != drop]
        try:
            fit = ols_fit(x[:, keep], y, with_intercept, [names[c] for c in keep])
        except SingularDesign as exc:
            fit = exc
        out.append((names[drop], fit))
    return out
