"""Numba-compiled channel kernels.

Scalar twins of the numpy kernels in _kernels_np, fused into single
passes over the component index.  Branching mirrors the numpy module
exactly (erfcx algebra, series switch at a = 30, tail clip at 37) so the
two backends agree to float round-off; parity is enforced by tests.

math.erfc underflows past ~26.6 and exp(x^2) overflows there too, so
erfcx carries its own asymptotic branch above x = 25.
"""

import math

import numpy as np
from numba import njit

VAR_FLOOR = 1e-13

_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INF = math.inf


@njit(cache=True)
def _erfcx(x):
    if x >= 25.0:
        u = 1.0 / (x * x)
        s = 1.0 + u * (-0.5 + u * (0.75 + u * (-1.875 + u * (6.5625 + u * -29.53125))))
        return s / (x * _SQRT_PI)
    if x >= 0.0:
        return math.exp(x * x) * math.erfc(x)
    return 2.0 * math.exp(x * x) - _erfcx(-x)


@njit(cache=True)
def _var_ratio_series(a):
    u = 1.0 / (a * a)
    return u * (1 + u * (-6 + u * (50 + u * (-518 + u * (6354 + u * (-89782 + u * 1435330))))))


@njit(cache=True)
def _upper_moments(a):
    R = _SQRT_2_OVER_PI / _erfcx(a / _SQRT2)
    if a >= 30.0:
        v = _var_ratio_series(a)
    else:
        v = 1.0 + R * (a - R)
    return R, v


@njit(cache=True)
def _trunc_std_scalar(alpha, beta):
    a = alpha if alpha >= -37.0 else -_INF
    b = beta if beta <= 37.0 else _INF

    flip = False
    if a == -_INF and b < _INF:          # (-inf, b] -> (-b, inf)
        a, b = -b, _INF
        flip = True
    elif a > -_INF and b < _INF and b <= 0.0:  # all-negative cell
        a, b = -b, -a
        flip = True

    if a == -_INF and b == _INF:
        return 0.0, 1.0

    if b == _INF:
        m, v = _upper_moments(a)
        return (-m if flip else m), v

    if a >= 0.0:
        d = math.exp(-(b - a) * (b + a) / 2.0)
        if d == 0.0:
            m, v = _upper_moments(a)
            return (-m if flip else m), v
        den = _erfcx(a / _SQRT2) - d * _erfcx(b / _SQRT2)
        r1 = _SQRT_2_OVER_PI * (1.0 - d) / den
        r2 = _SQRT_2_OVER_PI * (a - b * d) / den
        m = r1
        v = 1.0 + r2 - r1 * r1
        return (-m if flip else m), v

    # straddling cell, direct erf differences (no cancellation: opposite signs)
    Z = 0.5 * (math.erf(b / _SQRT2) - math.erf(a / _SQRT2))
    pa = _INV_SQRT_2PI * math.exp(-a * a / 2.0)
    pb = _INV_SQRT_2PI * math.exp(-b * b / 2.0)
    r1 = (pa - pb) / Z
    r2 = (a * pa - b * pb) / Z
    m = r1
    v = 1.0 + r2 - r1 * r1
    return (-m if flip else m), v


@njit(cache=True)
def trunc_std_moments(alpha, beta):
    n = alpha.shape[0]
    mean = np.empty(n)
    var = np.empty(n)
    for i in range(n):
        mean[i], var[i] = _trunc_std_scalar(alpha[i], beta[i])
    return mean, var


@njit(cache=True)
def interval_out_moments(p_hat, lo, hi, tau_p, sigma):
    n = p_hat.shape[0]
    s_hat = np.empty(n)
    tau_s = np.empty(n)
    sig2 = sigma * sigma
    for i in range(n):
        s2 = tau_p[i] + sig2
        s = math.sqrt(s2)
        a = -_INF if lo[i] == -_INF else (lo[i] - p_hat[i]) / s
        b = _INF if hi[i] == _INF else (hi[i] - p_hat[i]) / s
        m, v = _trunc_std_scalar(a, b)
        s_hat[i] = s * m / s2
        ts = (1.0 - v) / s2
        tau_s[i] = ts if ts > 0.0 else 0.0
    return s_hat, tau_s


@njit(cache=True)
def bg_posterior(r, tau_r, lam, slab_var):
    n = r.shape[0]
    x_hat = np.empty(n)
    tau_x = np.empty(n)
    pure_gaussian = lam >= 1.0
    log_prior_odds = 0.0 if pure_gaussian else math.log(lam / (1.0 - lam))
    for i in range(n):
        s0 = tau_r[i]
        s1 = slab_var + s0
        if pure_gaussian:
            pi = 1.0
        else:
            t = log_prior_odds + 0.5 * (math.log(s0 / s1) + r[i] * r[i] * (1.0 / s0 - 1.0 / s1))
            if t >= 0.0:
                pi = 1.0 / (1.0 + math.exp(-t))
            else:
                e = math.exp(t)
                pi = e / (1.0 + e)
        m1 = r[i] * slab_var / s1
        v1 = slab_var * s0 / s1
        x_hat[i] = pi * m1
        v = pi * v1 + pi * (1.0 - pi) * m1 * m1
        tau_x[i] = v if v > VAR_FLOOR else VAR_FLOOR
    return x_hat, tau_x
