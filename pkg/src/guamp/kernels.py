"""Backend dispatch for the hot channel kernels.

The env flag GUAMP_NUMBA picks the implementation:

  GUAMP_NUMBA=0|false|off   pure numpy/scipy path
  GUAMP_NUMBA=1|true|on     numba path (ImportError if numba is missing)
  unset / auto              numba when importable, else numpy

Selection happens once at import.  Both backends expose the same three
functions and agree to float round-off; benchmarks/bench_kernels.py
compares their throughput.
"""

import os

from . import _kernels_np

VAR_FLOOR = _kernels_np.VAR_FLOOR


def _pick_backend():
    flag = os.environ.get("GUAMP_NUMBA", "auto").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return "numpy", _kernels_np
    if flag in ("1", "true", "on", "yes"):
        from . import _kernels_nb

        return "numba", _kernels_nb
    try:
        from . import _kernels_nb

        return "numba", _kernels_nb
    except ImportError:
        return "numpy", _kernels_np


BACKEND, _impl = _pick_backend()

trunc_std_moments = _impl.trunc_std_moments
interval_out_moments = _impl.interval_out_moments
bg_posterior = _impl.bg_posterior
