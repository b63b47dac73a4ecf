"""Kernel backend selection.

Two implementations of the hot evaluation kernels exist: a compiled
Cython core (``kernels_cy``, built at install time) and a pure-numpy
fallback (``kernels_np``). One is chosen once, at import:

* ``POMPC_BACKEND=numpy``  force the numpy fallback.
* ``POMPC_BACKEND=cython`` require the compiled core (ImportError if absent).
* unset / ``auto``         prefer the compiled core, fall back silently.

Both backends compute the same float64 arithmetic; results agree to
rounding (last-ulp BLAS summation-order differences), and every run is
bit-reproducible within a backend. ``benchmarks/bench_backends.py``
compares their throughput on planner-shaped workloads.
"""

import os

from . import kernels_np

_requested = os.environ.get("POMPC_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "numpy"):
    raise ValueError(
        f"POMPC_BACKEND must be auto, cython, or numpy (got {_requested!r})")

if _requested == "numpy":
    _impl = kernels_np
else:
    try:
        from . import kernels_cy as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = kernels_np

BACKEND = _impl.NAME

ACT_IDENTITY = kernels_np.ACT_IDENTITY
ACT_MISH = kernels_np.ACT_MISH
ACT_TANH = kernels_np.ACT_TANH

mlp_forward = _impl.mlp_forward
simnorm = _impl.simnorm
