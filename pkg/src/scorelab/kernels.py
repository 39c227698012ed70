"""Kernel backend selection.

The compiled Cython extension is preferred when present; the pure-numpy
module is a drop-in fallback.  ``SCORELAB_KERNELS=numpy`` forces the
fallback, ``SCORELAB_KERNELS=cython`` makes a missing extension an error.
Both backends implement the same contract and agree to float64 roundoff
(see tests/test_kernels.py and benchmarks/bench_kernels.py).
"""

import os

_requested = os.environ.get("SCORELAB_KERNELS", "auto").lower()

if _requested in ("auto", "cython"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _kernels_py as _impl

        BACKEND = "numpy"
elif _requested in ("numpy", "py", "python"):
    from . import _kernels_py as _impl

    BACKEND = "numpy"
else:
    raise ValueError(f"unknown SCORELAB_KERNELS value {_requested!r}")

forward = _impl.forward
loss_grad = _impl.loss_grad
