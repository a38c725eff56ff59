"""Problem data model: correlated sensing matrices, sparse signals,
quantized observations and the SVD factorization used by the
unitary-transform solvers.

Randomness runs through numpy's Philox counter-based generator so that a
(master_seed, indices...) tuple reproduces the same problem on any
platform; see :func:`rng_from_key`.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DegenerateSignalError,
    InvalidParameterError,
    UnsupportedOperationError,
)

TWO_BIT_THRESHOLDS = (-1.5, 0.0, 1.5)


def rng_from_key(*key):
    """Philox generator keyed by a tuple of non-negative integers.

    Philox is counter-based, so the stream depends only on the key, not on
    global state or platform.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


@dataclass(frozen=True)
class ChannelSpec:
    """Observation channel: 'gaussian', 'onebit' (sign) or 'multibit'.

    ``thresholds`` is the ascending threshold vector for multibit
    quantizers; it stays empty for gaussian and onebit (onebit is the
    single-threshold-at-zero case).  ``noise_std`` is the pre-quantization
    noise standard deviation.
    """

    kind: str
    noise_std: float
    thresholds: tuple = ()

    def __post_init__(self):
        if self.kind not in ("gaussian", "onebit", "multibit"):
            raise InvalidParameterError(f"unknown channel kind {self.kind!r}")
        if not self.noise_std > 0:
            raise InvalidParameterError("noise_std must be > 0")
        th = np.asarray(self.thresholds, dtype=float)
        if self.kind == "multibit":
            if th.size == 0:
                raise InvalidParameterError("multibit channel needs thresholds")
            if np.any(np.diff(th) <= 0):
                raise InvalidParameterError("thresholds must be strictly ascending")
        elif th.size:
            raise InvalidParameterError(f"{self.kind} channel takes no thresholds")

    @property
    def noise_var(self):
        return self.noise_std**2


@dataclass(frozen=True)
class PriorSpec:
    """Bernoulli-Gaussian (spike and slab) signal prior."""

    lam: float
    slab_var: float
    kind: str = "bernoulli_gaussian"

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise InvalidParameterError("lambda must lie in (0, 1]")
        if not self.slab_var > 0:
            raise InvalidParameterError("slab_var must be > 0")
        if self.kind != "bernoulli_gaussian":
            raise InvalidParameterError(f"unknown prior kind {self.kind!r}")


@dataclass(frozen=True)
class GlmProblem:
    """One sensing instance y = f(A x + w)."""

    A: np.ndarray
    x_true: np.ndarray
    z_true: np.ndarray
    y: np.ndarray
    channel: ChannelSpec
    prior: PriorSpec
    noise_var: float
    seed: int

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class SvdFactors:
    """Economy SVD A = U diag(sigma) V^T truncated to numerical rank r.

    Q = diag(sigma) V^T is cached because the unitary-transform solvers
    iterate against it directly.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    r: int
    Q: np.ndarray = field(repr=False)


@lru_cache(maxsize=16)
def _corr_sqrt(size, rho):
    """Symmetric PSD square root of the exponential-decay correlation
    matrix R_ij = rho^|i-j|.

    Eigendecomposition (not Cholesky): the symmetric root is unique and
    independent of element order.  Negative eigenvalues from round-off are
    clipped at zero.  Returns None for rho == 0 (R is the identity).
    """
    if rho == 0.0:
        return None
    idx = np.arange(size)
    R = rho ** np.abs(np.subtract.outer(idx, idx))
    w, V = np.linalg.eigh(R)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def correlation_matrix(size, rho):
    """R with R_ij = rho^|i-j| (used by tests and fixture metadata)."""
    idx = np.arange(size)
    return rho ** np.abs(np.subtract.outer(idx, idx))


def generate_correlated_matrix(m, n, rho, rng):
    """Draw A = R1^(1/2) H R2^(1/2) with iid standard-normal H, then
    rescale so that ||A||_F^2 = n.

    The Frobenius normalization makes the per-measurement signal power
    ||A||_F^2 / m = n/m, which is what the shipped two-bit thresholds
    assume.
    """
    if m < 1 or n < 1:
        raise InvalidParameterError("m and n must be >= 1")
    if not (0.0 <= rho < 1.0):
        raise InvalidParameterError("rho must lie in [0, 1)")
    H = rng.standard_normal((m, n))
    RL = _corr_sqrt(m, float(rho))
    RR = _corr_sqrt(n, float(rho))
    A = H if RL is None else RL @ H @ RR
    fro = np.linalg.norm(A)
    if fro == 0.0:
        raise DegenerateSignalError("drawn matrix is zero")
    return A * (np.sqrt(n) / fro)


def generate_bg_signal(n, prior, rng):
    """Bernoulli-Gaussian draw: each entry is 0 w.p. 1-lambda, else
    N(0, slab_var).

    Slab values are drawn for every index regardless of the mask so the
    stream layout does not depend on the mask realization.
    """
    mask = rng.random(n) < prior.lam
    slab = rng.normal(0.0, np.sqrt(prior.slab_var), n)
    return np.where(mask, slab, 0.0)


def calibrate_noise(A, x, snr_db):
    """Noise variance giving the requested SNR = ||Ax||^2 / (m sigma^2)."""
    z = A @ x
    power = float(np.dot(z, z))
    if power == 0.0:
        raise DegenerateSignalError("||Ax|| = 0; SNR is undefined")
    m = A.shape[0]
    return power / (m * 10.0 ** (snr_db / 10.0))


def quantize(v, channel):
    """Map noisy linear outputs v = z + w to channel observations.

    onebit: sign with sign(0) = +1, values in {-1, +1}.
    multibit: right-closed cell index k in 0..K meaning
    v in (t_{k-1}, t_k], with t_{-1} = -inf and t_K = +inf.
    """
    v = np.asarray(v, dtype=float)
    if channel.kind == "onebit":
        return np.where(v >= 0.0, 1, -1).astype(np.int64)
    if channel.kind == "multibit":
        th = np.asarray(channel.thresholds, dtype=float)
        return np.searchsorted(th, v, side="left").astype(np.int64)
    raise UnsupportedOperationError("gaussian channel has no quantizer")


def cell_bounds(y, channel):
    """Per-observation interval (lo, hi] consistent with :func:`quantize`."""
    if channel.kind == "onebit":
        y = np.asarray(y)
        lo = np.where(y > 0, 0.0, -np.inf)
        hi = np.where(y > 0, np.inf, 0.0)
        return lo, hi
    if channel.kind == "multibit":
        y = np.asarray(y, dtype=np.int64)
        edges = np.concatenate(([-np.inf], np.asarray(channel.thresholds, float), [np.inf]))
        return edges[y], edges[y + 1]
    raise UnsupportedOperationError("gaussian channel has no quantizer cells")


def economy_svd(A):
    """Economy SVD truncated at the numerical rank.

    r counts singular values above max(m, n) * eps * sigma_max, the
    standard numerical-rank rule.
    """
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        raise DegenerateSignalError("cannot factor the zero matrix")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    tol = max(A.shape) * np.finfo(float).eps * s[0]
    r = int(np.count_nonzero(s > tol))
    U, s, Vt = U[:, :r], s[:r], Vt[:r]
    return SvdFactors(U=U, sigma=s, V=Vt.T, r=r, Q=s[:, None] * Vt)


def make_channel(kind, noise_std):
    """Channel from a harness-level name; 'twobit' is multibit with the
    shipped +-1.5 thresholds (absolute units, matching ||A||_F^2 = n)."""
    if kind == "onebit":
        return ChannelSpec("onebit", noise_std)
    if kind == "twobit":
        return ChannelSpec("multibit", noise_std, TWO_BIT_THRESHOLDS)
    if kind == "gaussian":
        return ChannelSpec("gaussian", noise_std)
    raise InvalidParameterError(f"unknown channel name {kind!r}")


def generate_problem(m, n, rho, lam, snr_db, channel_kind, seed_key):
    """Full seeded instance: matrix, signal, calibrated noise, observations.

    ``seed_key`` is a tuple of ints; each trial owns an independent Philox
    stream derived from it.  Draw order is fixed: H, signal mask, slab,
    noise.  The all-zero signal draw (probability (1-lambda)^n) retries
    with an extended key so downstream metrics stay well defined.
    """
    prior = PriorSpec(lam=lam, slab_var=1.0 / lam)
    for attempt in range(100):
        rng = rng_from_key(*seed_key, attempt) if attempt else rng_from_key(*seed_key)
        A = generate_correlated_matrix(m, n, rho, rng)
        x = generate_bg_signal(n, prior, rng)
        if np.any(x):
            break
    else:
        raise DegenerateSignalError("signal draw produced only zeros")
    z = A @ x
    noise_var = calibrate_noise(A, x, snr_db)
    channel = make_channel(channel_kind, np.sqrt(noise_var))
    w = rng.normal(0.0, np.sqrt(noise_var), m)
    v = z + w
    y = v if channel.kind == "gaussian" else quantize(v, channel)
    return GlmProblem(
        A=A,
        x_true=x,
        z_true=z,
        y=y,
        channel=channel,
        prior=prior,
        noise_var=noise_var,
        seed=int(seed_key[0]),
    )


def _write_csv_matrix(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def _read_csv_matrix(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    return np.asarray(rows, dtype=float)


def export_problem(problem, out_dir, rho=None, snr_db=None):
    """Write a problem directory (meta.json + A/x/y CSVs).

    CSV values use shortest round-trip decimal formatting so a reader in
    any language recovers the exact doubles.
    """
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "m": problem.m,
        "n": problem.n,
        "rho": rho,
        "seed": problem.seed,
        "channel": {
            "kind": problem.channel.kind,
            "thresholds": list(problem.channel.thresholds),
            "noise_std": problem.channel.noise_std,
        },
        "prior": {
            "kind": problem.prior.kind,
            "lambda": problem.prior.lam,
            "slab_var": problem.prior.slab_var,
        },
        "noise_var": problem.noise_var,
        "snr_db": snr_db,
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_csv_matrix(os.path.join(out_dir, "A.csv"), problem.A)
    _write_csv_matrix(os.path.join(out_dir, "x.csv"), problem.x_true[None, :])
    _write_csv_matrix(os.path.join(out_dir, "y.csv"), np.asarray(problem.y, float)[None, :])


def import_problem(in_dir):
    """Rebuild a GlmProblem from a directory written by export_problem."""
    with open(os.path.join(in_dir, "meta.json")) as fh:
        meta = json.load(fh)
    A = _read_csv_matrix(os.path.join(in_dir, "A.csv"))
    x = _read_csv_matrix(os.path.join(in_dir, "x.csv")).ravel()
    y = _read_csv_matrix(os.path.join(in_dir, "y.csv")).ravel()
    ch = meta["channel"]
    channel = ChannelSpec(ch["kind"], ch["noise_std"], tuple(ch["thresholds"]))
    if channel.kind != "gaussian":
        y = y.astype(np.int64)
    prior = PriorSpec(lam=meta["prior"]["lambda"], slab_var=meta["prior"]["slab_var"])
    return GlmProblem(
        A=A,
        x_true=x,
        z_true=A @ x,
        y=y,
        channel=channel,
        prior=prior,
        noise_var=meta["noise_var"],
        seed=int(meta["seed"] or 0),
    )


def atomic_write_text(path, text):
    """Write via a temp file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
