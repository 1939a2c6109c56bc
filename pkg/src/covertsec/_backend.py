"""Select the time-stepping kernel at import.

The compiled extension is used when it was built; set
``COVERTSEC_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

BACKEND = "python"

if os.environ.get("COVERTSEC_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _ckernels as kernels

        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as kernels

simulate_loop = kernels.simulate_loop
affine2 = kernels.affine2

__all__ = ["BACKEND", "affine2", "simulate_loop"]
