"""Certification grids comparing every closed-form kernel against the
quadrature oracle.

The grid deliberately reaches configurations whose posterior mass sits a
hundred standard deviations from the cell (tau_p = 1e-3 with sigma =
0.05 and |p_hat| up to 5): exactly where naive implementations return
NaN and where the tail branches of the kernels must take over.
"""

from __future__ import annotations

import numpy as np

from .channels import bg_denoiser, gout_gaussian, gout_interval
from .model import PriorSpec
from .oracle import (
    bg_posterior_moments,
    gaussian_posterior_moments,
    interval_posterior_moments,
    output_moments_from_posterior,
)

P_HAT_GRID = tuple(float(v) for v in range(-5, 6))
TAU_P_GRID = (1e-3, 0.1, 1.0, 10.0)
SIGMA_GRID = (0.05, 0.5, 1.0)

ONEBIT_CELLS = ((0.0, np.inf), (-np.inf, 0.0))
TWOBIT_CELLS = ((-np.inf, -1.5), (-1.5, 0.0), (0.0, 1.5), (1.5, np.inf))

REL_TOL = 1e-8
_DENOM_FLOOR = 1e-12


def _rel(a, b):
    return abs(a - b) / max(abs(b), _DENOM_FLOOR)


def certify_gout_interval():
    """Max relative error of (s_hat, tau_s) over the full quantizer grid."""
    worst = (0.0, None)
    for cell in ONEBIT_CELLS + TWOBIT_CELLS:
        for p in P_HAT_GRID:
            for tp in TAU_P_GRID:
                for sg in SIGMA_GRID:
                    got = gout_interval(p, cell[0], cell[1], tp, sg)
                    mean, var = interval_posterior_moments(p, cell[0], cell[1], tp, sg)
                    s_ref, ts_ref = output_moments_from_posterior(mean, var, p, tp)
                    err = max(_rel(got.s_hat, s_ref), _rel(got.tau_s, ts_ref))
                    if err > worst[0]:
                        worst = (err, (cell, p, tp, sg))
    return worst


def certify_gout_gaussian():
    worst = (0.0, None)
    for y in (-2.0, 0.5, 3.0):
        for p in P_HAT_GRID:
            for tp in TAU_P_GRID:
                for sg in SIGMA_GRID:
                    got = gout_gaussian(p, y, tp, sg * sg)
                    mean, var = gaussian_posterior_moments(p, y, tp, sg * sg)
                    s_ref, ts_ref = output_moments_from_posterior(mean, var, p, tp)
                    err = max(_rel(got.s_hat, s_ref), _rel(got.tau_s, ts_ref))
                    if err > worst[0]:
                        worst = (err, (y, p, tp, sg))
    return worst


def certify_bg_denoiser():
    worst = (0.0, None)
    for lam, v0 in ((0.1, 10.0), (0.5, 2.0), (1.0, 1.0)):
        prior = PriorSpec(lam=lam, slab_var=v0)
        for r in P_HAT_GRID:
            for tr in TAU_P_GRID:
                got = bg_denoiser(r, tr, prior)
                mean, var = bg_posterior_moments(r, tr, lam, v0)
                err = max(_rel(got.x_hat, mean), _rel(got.tau_x, var))
                if err > worst[0]:
                    worst = (err, (lam, v0, r, tr))
    return worst


def run_certification():
    """All three grids; returns {op: (max_rel_err, worst_point)}."""
    return {
        "gout_interval": certify_gout_interval(),
        "gout_gaussian": certify_gout_gaussian(),
        "bg_denoiser": certify_bg_denoiser(),
    }
