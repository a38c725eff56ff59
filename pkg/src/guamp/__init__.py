"""GUAMP: unitary-transform message passing for generalized linear models.

Solvers (guamp_run, gamp_run, uamp_run), the problem model, channel
kernels and the Monte Carlo harness.  See README.md for the CLI.
"""

from .algorithms import (
    GaussianBeliefs,
    IterationTrace,
    ModuleAState,
    ModuleBState,
    RunParams,
    RunResult,
    extrinsic_a_to_b,
    extrinsic_b_to_a,
    gamp_run,
    guamp_run,
    module_a_step,
    module_b_step,
    reduction_check,
    uamp_run,
)
from .channels import (
    DenoiserMoments,
    OutputMoments,
    bg_denoiser,
    bg_denoiser_vec,
    gout_gaussian,
    gout_gaussian_vec,
    gout_interval,
    gout_interval_vec,
)
from .harness import RunRecord, SweepConfig, config_from_dict, load_config, run_sweep
from .metrics import dnmse, nmse, to_db
from .model import (
    ChannelSpec,
    GlmProblem,
    PriorSpec,
    SvdFactors,
    calibrate_noise,
    cell_bounds,
    economy_svd,
    export_problem,
    generate_bg_signal,
    generate_correlated_matrix,
    generate_problem,
    import_problem,
    quantize,
    rng_from_key,
)
from .oracle import quadrature_oracle

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
