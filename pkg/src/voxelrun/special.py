"""Regularized incomplete beta function and Student t tail probabilities.

The incomplete beta is evaluated with the modified Lentz algorithm on
its continued fraction, vectorized over the argument so a whole map of
t values converges in one loop.
"""

import math

import numpy as np

_TINY = 1e-300
_TOL = 1e-12
_MAX_ITER = 1000


def _betacf(a, b, x):
    """Continued fraction for I_x(a, b); valid for x < (a + 1) / (a + b + 2)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _TOL
        if not active.any():
            break
    else:
        raise ArithmeticError("incomplete beta continued fraction did not converge")
    return h


def betainc(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)`` for scalar a, b > 0."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("x must lie in [0, 1]")
    out = np.zeros_like(x)
    out[x == 1] = 1.0
    inner = (x > 0) & (x < 1)
    if inner.any():
        xi = x[inner]
        log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        front = np.exp(a * np.log(xi) + b * np.log1p(-xi) - log_beta)
        direct = xi < (a + 1.0) / (a + b + 2.0)
        res = np.empty_like(xi)
        if direct.any():
            res[direct] = front[direct] * _betacf(a, b, xi[direct]) / a
        if (~direct).any():
            xs = 1.0 - xi[~direct]
            res[~direct] = 1.0 - front[~direct] * _betacf(b, a, xs) / b
        out[inner] = res
    return out[0] if scalar else out


def t_sf(t, df):
    """Upper tail probability P(T > t) for Student t with ``df`` degrees of freedom."""
    t = np.asarray(t, dtype=np.float64)
    # x = df / (df + t^2), written to stay finite for infinite t
    with np.errstate(over="ignore", invalid="ignore"):
        x = np.where(np.isinf(t), 0.0, df / (df + t * t))
    half = 0.5 * betainc(df / 2.0, 0.5, x)
    return np.where(t >= 0, half, 1.0 - half)


def t_to_p(t, df, two_sided=True):
    """P value for t statistics: one-sided upper tail, or two-sided."""
    if df < 1:
        raise ValueError("df must be at least 1")
    t = np.asarray(t, dtype=np.float64)
    if np.any(np.isnan(t)):
        raise ValueError("t values must not be NaN")
    if two_sided:
        with np.errstate(over="ignore", invalid="ignore"):
            x = np.where(np.isinf(t), 0.0, df / (df + t * t))
        p = betainc(df / 2.0, 0.5, x)
    else:
        p = t_sf(t, df)
    return np.clip(p, 0.0, 1.0)
