"""Error metrics for estimates of the linear mix z = A x."""

import numpy as np

from .errors import DegenerateSignalError

DB_RATIO_FLOOR = 1e-30


def nmse(z, z_hat):
    """||z - z_hat||^2 / ||z||^2."""
    z = np.asarray(z, float)
    z_hat = np.asarray(z_hat, float)
    ref = float(np.dot(z, z))
    if ref == 0.0:
        raise DegenerateSignalError("reference vector is zero")
    diff = z - z_hat
    return float(np.dot(diff, diff)) / ref


def dnmse(z, z_hat):
    """min_c ||z - c z_hat||^2 / ||z||^2 = 1 - (z_hat.z)^2/(||z||^2 ||z_hat||^2).

    Scale-invariant in z_hat; returns 1 for z_hat = 0 (any c attains it).
    """
    z = np.asarray(z, float)
    z_hat = np.asarray(z_hat, float)
    ref = float(np.dot(z, z))
    if ref == 0.0:
        raise DegenerateSignalError("reference vector is zero")
    den = float(np.dot(z_hat, z_hat))
    if den == 0.0 or not np.isfinite(den):
        return 1.0
    cross = float(np.dot(z_hat, z))
    val = 1.0 - cross * cross / (ref * den)
    return val


def to_db(ratio):
    """10 log10 with guards: non-finite ratios map to +inf (the CSV
    sentinel), tiny ratios are floored so perfect recovery stays finite."""
    if not np.isfinite(ratio):
        return float("inf")
    return float(10.0 * np.log10(max(ratio, DB_RATIO_FLOOR)))
