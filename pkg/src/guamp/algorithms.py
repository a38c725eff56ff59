"""Message-passing iteration engines.

Three solvers share the same componentwise kernels:

  guamp_run  -- two coupled modules exchanging extrinsic Gaussian
                messages: a generalized-AMP module over the orthonormal
                factor U (handles the nonlinear channel) and an AMP
                module over Q = diag(sigma) V^T (handles the prior).
  gamp_run   -- generalized AMP directly on A (baseline).
  uamp_run   -- AMP on the unitary-transformed linear model
                U^T y = Q x + U^T w (Gaussian channels only).

All runs are deterministic given the problem: no internal randomness,
and matrix products use fixed BLAS reduction order, so repeated runs are
bit-identical on a given build.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channels import bg_denoiser_vec, gout_gaussian_vec, gout_interval_vec
from .errors import UnsupportedOperationError
from .metrics import dnmse, nmse
from .model import cell_bounds, economy_svd

VAR_MIN = 1e-13
VAR_MAX = 1e13
MEAN_CLIP = 1e18


def clamp_var(v):
    """Force variance vectors into [1e-13, 1e13]; non-finite entries are
    treated as uninformative (upper bound)."""
    v = np.where(np.isfinite(v), v, VAR_MAX)
    return np.clip(v, VAR_MIN, VAR_MAX)


def _sanitize_mean(v):
    return np.clip(np.nan_to_num(v, nan=0.0, posinf=MEAN_CLIP, neginf=-MEAN_CLIP),
                   -MEAN_CLIP, MEAN_CLIP)


@dataclass(frozen=True)
class GaussianBeliefs:
    """Diagonal Gaussian message (mean, per-component variance)."""

    mean: np.ndarray
    var: np.ndarray


@dataclass(frozen=True)
class Operator:
    """A matrix with its entrywise square cached (both C-contiguous);
    the square drives the variance updates."""

    mat: np.ndarray
    sq: np.ndarray

    @classmethod
    def from_matrix(cls, M):
        M = np.ascontiguousarray(M, dtype=float)
        return cls(mat=M, sq=M * M)


def _as_operator(M):
    return M if isinstance(M, Operator) else Operator.from_matrix(M)


@dataclass(frozen=True)
class ModuleBState:
    """Generalized-AMP module state over the hidden rotation b (length r)
    with observations of z = U b (length m)."""

    b_hat: np.ndarray
    tau_b: np.ndarray
    s_hat: np.ndarray
    p_hat: np.ndarray
    tau_p: np.ndarray
    r_hat: np.ndarray
    tau_r: np.ndarray


@dataclass(frozen=True)
class ModuleAState:
    """AMP module state over the signal x (length n) with pseudo
    observations of b = Q x (length r)."""

    x_hat: np.ndarray
    tau_x: np.ndarray
    s_hat: np.ndarray
    tau_s: np.ndarray
    p_hat: np.ndarray
    tau_p: np.ndarray
    r_hat: np.ndarray
    tau_r: np.ndarray


@dataclass(frozen=True)
class TraceRow:
    """Per-outer-iteration measurements (ratios, not dB)."""

    outer_iter: int
    dnmse_z: float
    nmse_z: float
    nmse_x: float
    tau_x_mean: float
    var_min: float
    var_max: float
    diverged: bool


@dataclass
class IterationTrace:
    rows: list = field(default_factory=list)

    def append(self, row):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])


@dataclass(frozen=True)
class RunParams:
    t_max: int = 100
    t_a: int = 4
    t_b: int = 1


@dataclass
class RunResult:
    x_hat: np.ndarray
    trace: IterationTrace
    diverged: bool
    z_post: np.ndarray | None = None  # diagnostic; not consumed anywhere


def init_module_a(prior, Q):
    """Prior-mean start: x_hat = 0, tau_x = prior variance, zero
    innovations, p_hat = 0 with tau_p = |Q|^2 tau_x."""
    Q = _as_operator(Q)
    r, n = Q.mat.shape
    tau_x = clamp_var(np.full(n, prior.lam * prior.slab_var))
    return ModuleAState(
        x_hat=np.zeros(n),
        tau_x=tau_x,
        s_hat=np.zeros(r),
        tau_s=np.full(r, 1.0),
        p_hat=np.zeros(r),
        tau_p=clamp_var(Q.sq @ tau_x),
        r_hat=np.zeros(n),
        tau_r=np.full(n, 1.0),
    )


def init_module_b(ext_in, m):
    """b_hat = 0 with tau_b seeded from the incoming belief variance."""
    r = ext_in.mean.shape[0]
    return ModuleBState(
        b_hat=np.zeros(r),
        tau_b=clamp_var(ext_in.var.copy()),
        s_hat=np.zeros(m),
        p_hat=np.zeros(m),
        tau_p=np.full(m, 1.0),
        r_hat=np.zeros(r),
        tau_r=np.full(r, 1.0),
    )


def module_b_step(state, ext_in, y, channel, U):
    """One generalized-AMP sweep over b with prior N(ext_in.mean, ext_in.var).

    Output linear step (Onsager term uses the previous sweep's s_hat),
    channel output step, input linear step (uses this sweep's s_hat), and
    the Gaussian-product combine with the incoming belief.

    For the Gaussian channel the input linear step is available in closed
    form: column-orthonormal U makes the likelihood's extrinsic exactly
    N(U^T y, sigma^2 I) independent of the current state, which is also
    what makes this solver coincide with plain AMP on the transformed
    model.  The iterative form only approaches that value, so the exact
    one is used.
    """
    U = _as_operator(U)
    tau_p = clamp_var(U.sq @ state.tau_b)
    p_hat = U.mat @ state.b_hat - tau_p * state.s_hat

    if channel.kind == "gaussian":
        s_hat, tau_s = gout_gaussian_vec(p_hat, np.asarray(y, float), tau_p, channel.noise_var)
        tau_r = clamp_var(np.full(state.b_hat.shape[0], channel.noise_var))
        r_hat = U.mat.T @ np.asarray(y, float)
    else:
        lo, hi = cell_bounds(y, channel)
        s_hat, tau_s = gout_interval_vec(p_hat, lo, hi, tau_p, channel.noise_std)
        tau_r = clamp_var(1.0 / (U.sq.T @ tau_s))
        r_hat = state.b_hat + tau_r * (U.mat.T @ s_hat)

    denom = tau_r + ext_in.var
    b_hat = (r_hat * ext_in.var + ext_in.mean * tau_r) / denom
    tau_b = clamp_var(ext_in.var * tau_r / denom)

    return ModuleBState(
        b_hat=b_hat,
        tau_b=tau_b,
        s_hat=s_hat,
        p_hat=p_hat,
        tau_p=tau_p,
        r_hat=r_hat,
        tau_r=tau_r,
    )


def extrinsic_b_to_a(state):
    """The module's message toward the prior side: (r_hat, tau_r)."""
    return GaussianBeliefs(mean=state.r_hat.copy(), var=clamp_var(state.tau_r))


def module_a_step(state, ext_in, prior, Q):
    """One AMP sweep over x against pseudo-observations ext_in of b = Q x.

    Rotated order: the output step consumes the previous sweep's
    (p_hat, tau_p); the s_hat computed here feeds both the input linear
    step and the closing output linear step of the same sweep.
    """
    Q = _as_operator(Q)
    # output step against the pseudo-observations: the incoming belief
    # variance plays the per-component noise role
    denom = ext_in.var + state.tau_p
    s_hat = (ext_in.mean - state.p_hat) / denom
    tau_s = 1.0 / denom

    tau_r = clamp_var(1.0 / (Q.sq.T @ tau_s))
    r_hat = state.x_hat + tau_r * (Q.mat.T @ s_hat)
    x_hat, tau_x = bg_denoiser_vec(r_hat, tau_r, prior)
    tau_x = clamp_var(tau_x)
    tau_p = clamp_var(Q.sq @ tau_x)
    p_hat = Q.mat @ x_hat - tau_p * s_hat

    return ModuleAState(
        x_hat=x_hat,
        tau_x=tau_x,
        s_hat=s_hat,
        tau_s=tau_s,
        p_hat=p_hat,
        tau_p=tau_p,
        r_hat=r_hat,
        tau_r=tau_r,
    )


def extrinsic_a_to_b(state):
    """The module's message toward the channel side: (p_hat, tau_p)."""
    return GaussianBeliefs(mean=state.p_hat.copy(), var=clamp_var(state.tau_p))


def _state_arrays(*states):
    for st in states:
        for name in st.__dataclass_fields__:
            yield getattr(st, name)


def _variance_fields(state):
    if isinstance(state, ModuleBState):
        return (state.tau_b, state.tau_p, state.tau_r)
    return (state.tau_x, state.tau_p, state.tau_r)


def _sanitize_b(state):
    return ModuleBState(
        b_hat=_sanitize_mean(state.b_hat),
        tau_b=clamp_var(state.tau_b),
        s_hat=_sanitize_mean(state.s_hat),
        p_hat=_sanitize_mean(state.p_hat),
        tau_p=clamp_var(state.tau_p),
        r_hat=_sanitize_mean(state.r_hat),
        tau_r=clamp_var(state.tau_r),
    )


def _sanitize_a(state):
    return ModuleAState(
        x_hat=_sanitize_mean(state.x_hat),
        tau_x=clamp_var(state.tau_x),
        s_hat=_sanitize_mean(state.s_hat),
        tau_s=np.maximum(np.nan_to_num(state.tau_s, nan=0.0, posinf=1.0 / VAR_MIN), 0.0),
        p_hat=_sanitize_mean(state.p_hat),
        tau_p=clamp_var(state.tau_p),
        r_hat=_sanitize_mean(state.r_hat),
        tau_r=clamp_var(state.tau_r),
    )


class _RunMonitor:
    """Shared divergence/metric bookkeeping for all three solvers.

    A run is flagged diverged once its state stops being finite or an
    NMSE crosses +20 dB; the flag is sticky and the iteration continues
    so every run yields exactly t_max trace rows.
    """

    def __init__(self, problem, observer):
        self.problem = problem
        self.observer = observer
        self.trace = IterationTrace()
        self.diverged = False

    def record(self, it, x_hat, variance_vectors):
        z_hat = self.problem.A @ x_hat
        d = dnmse(self.problem.z_true, z_hat)
        nz = nmse(self.problem.z_true, z_hat)
        nx = nmse(self.problem.x_true, x_hat)
        finite = np.isfinite(d) and np.isfinite(nz) and np.isfinite(nx)
        if not finite or nz > 100.0 or nx > 100.0:  # +20 dB
            self.diverged = True
        vmin = min(float(np.min(v)) for v in variance_vectors)
        vmax = max(float(np.max(v)) for v in variance_vectors)
        row = TraceRow(
            outer_iter=it,
            dnmse_z=float(d) if np.isfinite(d) else float("inf"),
            nmse_z=float(nz) if np.isfinite(nz) else float("inf"),
            nmse_x=float(nx) if np.isfinite(nx) else float("inf"),
            tau_x_mean=float(np.mean(variance_vectors[0])),
            var_min=vmin,
            var_max=vmax,
            diverged=self.diverged,
        )
        self.trace.append(row)
        if self.observer is not None:
            self.observer(it, row)


def guamp_run(problem, params=None, observer=None, svd=None):
    """Alternate the two modules for t_max outer iterations.

    Each outer iteration runs t_b channel-module sweeps, passes the
    extrinsic belief to the prior module, runs t_a sweeps there, and
    sends the extrinsic back.  States persist across outer iterations.
    """
    params = params or RunParams()
    if svd is None:
        svd = economy_svd(problem.A)
    U = Operator.from_matrix(svd.U)
    Q = Operator.from_matrix(svd.Q)

    state_a = init_module_a(problem.prior, Q)
    belief_a2b = GaussianBeliefs(mean=np.zeros(svd.r), var=clamp_var(state_a.tau_p))
    state_b = init_module_b(belief_a2b, problem.m)

    mon = _RunMonitor(problem, observer)
    for t in range(1, params.t_max + 1):
        for _ in range(params.t_b):
            state_b = module_b_step(state_b, belief_a2b, problem.y, problem.channel, U)
        if not all(np.all(np.isfinite(a)) for a in _state_arrays(state_b)):
            mon.diverged = True
            state_b = _sanitize_b(state_b)
        belief_b2a = extrinsic_b_to_a(state_b)

        for _ in range(params.t_a):
            state_a = module_a_step(state_a, belief_b2a, problem.prior, Q)
        if not all(np.all(np.isfinite(a)) for a in _state_arrays(state_a)):
            mon.diverged = True
            state_a = _sanitize_a(state_a)
        belief_a2b = extrinsic_a_to_b(state_a)

        mon.record(
            t,
            state_a.x_hat,
            (state_a.tau_x, state_a.tau_p, state_a.tau_r,
             state_b.tau_b, state_b.tau_p, state_b.tau_r,
             belief_b2a.var, belief_a2b.var),
        )

    # posterior mean of z from the channel module, kept as a diagnostic
    z_post = state_b.p_hat + state_b.tau_p * state_b.s_hat
    return RunResult(x_hat=state_a.x_hat, trace=mon.trace, diverged=mon.diverged, z_post=z_post)


def gamp_run(problem, params=None, observer=None):
    """Vanilla generalized AMP on (A, y): the same four sweeps as the
    channel module, with A in place of U and the Bernoulli-Gaussian
    denoiser as the input nonlinear step.  No damping."""
    params = params or RunParams()
    A = Operator.from_matrix(problem.A)
    m, n = A.mat.shape
    prior = problem.prior

    x_hat = np.zeros(n)
    tau_x = clamp_var(np.full(n, prior.lam * prior.slab_var))
    s_hat = np.zeros(m)

    mon = _RunMonitor(problem, observer)
    for t in range(1, params.t_max + 1):
        tau_p = clamp_var(A.sq @ tau_x)
        p_hat = A.mat @ x_hat - tau_p * s_hat
        if problem.channel.kind == "gaussian":
            s_hat, tau_s = gout_gaussian_vec(
                p_hat, np.asarray(problem.y, float), tau_p, problem.channel.noise_var
            )
        else:
            lo, hi = cell_bounds(problem.y, problem.channel)
            s_hat, tau_s = gout_interval_vec(p_hat, lo, hi, tau_p, problem.channel.noise_std)
        tau_r = clamp_var(1.0 / (A.sq.T @ tau_s))
        r_hat = x_hat + tau_r * (A.mat.T @ s_hat)
        x_hat, tau_x = bg_denoiser_vec(r_hat, tau_r, prior)
        tau_x = clamp_var(tau_x)

        if not (np.all(np.isfinite(x_hat)) and np.all(np.isfinite(s_hat))
                and np.all(np.isfinite(r_hat)) and np.all(np.isfinite(p_hat))):
            mon.diverged = True
            x_hat = _sanitize_mean(x_hat)
            s_hat = _sanitize_mean(s_hat)
        mon.record(t, x_hat, (tau_x, tau_p, tau_r))

    return RunResult(x_hat=x_hat, trace=mon.trace, diverged=mon.diverged)


def uamp_run(problem, params=None, observer=None, svd=None):
    """AMP on the transformed linear model U^T y = Q x + U^T w.

    The transformed noise keeps covariance sigma^2 I because U has
    orthonormal columns, so the prior module iterates against the fixed
    pseudo-observations (U^T y, sigma^2).
    """
    params = params or RunParams()
    if problem.channel.kind != "gaussian":
        raise UnsupportedOperationError("the transformed linear model needs a gaussian channel")
    if svd is None:
        svd = economy_svd(problem.A)
    Q = Operator.from_matrix(svd.Q)
    b_tilde = svd.U.T @ np.asarray(problem.y, float)
    beliefs = GaussianBeliefs(mean=b_tilde, var=clamp_var(np.full(svd.r, problem.noise_var)))

    state = init_module_a(problem.prior, Q)
    mon = _RunMonitor(problem, observer)
    for t in range(1, params.t_max + 1):
        state = module_a_step(state, beliefs, problem.prior, Q)
        if not all(np.all(np.isfinite(a)) for a in _state_arrays(state)):
            mon.diverged = True
            state = _sanitize_a(state)
        mon.record(t, state.x_hat, (state.tau_x, state.tau_p, state.tau_r))
    return RunResult(x_hat=state.x_hat, trace=mon.trace, diverged=mon.diverged)


def reduction_check(problem, t_max=50):
    """Gaussian-channel identity check.

    Runs the two-module solver with t_a = t_b = 1 and measures, per outer
    iteration, how far the channel module's extrinsic is from
    (U^T y, sigma^2 1) and how far the x trajectory is from plain AMP on
    the transformed model.  Returns the three max deviations.
    """
    if problem.channel.kind != "gaussian":
        raise UnsupportedOperationError("reduction check needs a gaussian channel")
    svd = economy_svd(problem.A)
    U = Operator.from_matrix(svd.U)
    Q = Operator.from_matrix(svd.Q)
    b_tilde = svd.U.T @ np.asarray(problem.y, float)

    state_a = init_module_a(problem.prior, Q)
    belief_a2b = GaussianBeliefs(mean=np.zeros(svd.r), var=clamp_var(state_a.tau_p))
    state_b = init_module_b(belief_a2b, problem.m)

    ref_state = init_module_a(problem.prior, Q)
    ref_beliefs = GaussianBeliefs(mean=b_tilde, var=clamp_var(np.full(svd.r, problem.noise_var)))

    ext_mean_dev = 0.0
    ext_var_dev = 0.0
    traj_dev = 0.0
    for _ in range(t_max):
        state_b = module_b_step(state_b, belief_a2b, problem.y, problem.channel, U)
        belief_b2a = extrinsic_b_to_a(state_b)
        ext_mean_dev = max(ext_mean_dev, float(np.max(np.abs(belief_b2a.mean - b_tilde))))
        ext_var_dev = max(
            ext_var_dev, float(np.max(np.abs(belief_b2a.var - problem.noise_var)))
        )
        state_a = module_a_step(state_a, belief_b2a, problem.prior, Q)
        belief_a2b = extrinsic_a_to_b(state_a)

        ref_state = module_a_step(ref_state, ref_beliefs, problem.prior, Q)
        traj_dev = max(traj_dev, float(np.max(np.abs(state_a.x_hat - ref_state.x_hat))))
    return ext_mean_dev, ext_var_dev, traj_dev
