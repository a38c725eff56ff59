"""Componentwise nonlinear steps: output moments for Gaussian and
quantized channels, and the Bernoulli-Gaussian input denoiser.

Every closed form here is certified against the quadrature oracle in
guamp.oracle before use (see the oracle-check CLI subcommand and the
certification grid in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidParameterError


@dataclass(frozen=True)
class OutputMoments:
    """Innovation s_hat and its negative p-derivative tau_s (>= 0)."""

    s_hat: float
    tau_s: float


@dataclass(frozen=True)
class DenoiserMoments:
    """Posterior mean and variance of one signal component."""

    x_hat: float
    tau_x: float


def gout_gaussian(p_hat, y, tau_p, sigma2):
    """Output step for the linear-Gaussian channel y = z + w.

    s_hat = (y - p_hat)/(tau_p + sigma2), tau_s = 1/(tau_p + sigma2):
    the truncated-moment machinery collapses to this analytic form.
    """
    if not tau_p > 0 or not sigma2 > 0:
        raise InvalidParameterError("tau_p and sigma2 must be > 0")
    denom = tau_p + sigma2
    return OutputMoments(s_hat=(y - p_hat) / denom, tau_s=1.0 / denom)


def gout_gaussian_vec(p_hat, y, tau_p, sigma2):
    """Vector form of :func:`gout_gaussian`; sigma2 may be a vector, which
    is how the AMP module treats per-component pseudo-observation noise."""
    denom = tau_p + sigma2
    return (y - p_hat) / denom, 1.0 / denom


def gout_interval(p_hat, lo, hi, tau_p, sigma):
    """Output step for an interval observation lo < z + w <= hi.

    lo may be -inf and hi +inf.  The computation degrades gracefully to
    asymptotic tail expansions rather than returning NaN; standardized
    cell edges beyond 37 combined standard deviations are treated as
    infinite and the variance ratio switches to a series past 30 (see
    guamp._kernels_np for the crossover analysis).
    """
    if not tau_p > 0 or not sigma > 0:
        raise InvalidParameterError("tau_p and sigma must be > 0")
    if not lo < hi:
        raise InvalidParameterError("cell needs lo < hi")
    s_hat, tau_s = kernels.interval_out_moments(
        np.array([float(p_hat)]),
        np.array([float(lo)]),
        np.array([float(hi)]),
        np.array([float(tau_p)]),
        float(sigma),
    )
    return OutputMoments(s_hat=float(s_hat[0]), tau_s=float(tau_s[0]))


def gout_interval_vec(p_hat, lo, hi, tau_p, sigma):
    return kernels.interval_out_moments(
        np.asarray(p_hat, float),
        np.asarray(lo, float),
        np.asarray(hi, float),
        np.asarray(tau_p, float),
        float(sigma),
    )


def bg_denoiser(r, tau_r, prior):
    """Spike-and-slab posterior under the pseudo-likelihood N(x; r, tau_r).

    Responsibility, slab mean and slab variance follow the conjugate
    Gaussian algebra; the responsibility is evaluated in the log domain.
    The returned variance is floored at 1e-13 to protect downstream
    reciprocals.
    """
    if not tau_r > 0:
        raise InvalidParameterError("tau_r must be > 0")
    x_hat, tau_x = kernels.bg_posterior(
        np.array([float(r)]), np.array([float(tau_r)]), prior.lam, prior.slab_var
    )
    return DenoiserMoments(x_hat=float(x_hat[0]), tau_x=float(tau_x[0]))


def bg_denoiser_vec(r, tau_r, prior):
    return kernels.bg_posterior(
        np.asarray(r, float), np.asarray(tau_r, float), prior.lam, prior.slab_var
    )
