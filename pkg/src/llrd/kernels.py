"""Kernel backend selection.

The iteration hot loops (Blahut-Arimoto, Sinkhorn scaling, symmetric NMF
updates) exist twice: a compiled Cython extension and a pure-numpy
fallback with identical semantics. The extension is used when importable;
set ``LLRD_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and the backend-parity tests).
"""

import os

if os.environ.get("LLRD_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

STATUS_OK = 0
STATUS_MAX_ITERS = 1
STATUS_SUPPORT = 2

ba_iterate = _impl.ba_iterate
sinkhorn_scale = _impl.sinkhorn_scale
symnmf_run = _impl.symnmf_run


def backend_name() -> str:
    """Name of the kernel backend in use ("cython" or "python")."""
    return BACKEND
