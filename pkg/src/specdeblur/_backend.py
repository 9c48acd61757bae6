"""Kernel backend selection.

The numba-compiled kernels are used by default. Set the environment variable
SPECDEBLUR_DISABLE_NUMBA (to any non-empty value) before import to force the
pure-numpy fallback; it is also used automatically when numba is missing.
Both backends produce identical results: benchmarks/bench_kernels.py compares
their runtimes and outputs.
"""

import os

if os.environ.get("SPECDEBLUR_DISABLE_NUMBA"):
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"

correlate2d_valid = _impl.correlate2d_valid
ssim_map = _impl.ssim_map
