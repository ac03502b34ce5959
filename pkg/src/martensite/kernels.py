"""Hot loops, compiled when the extension is available.

Set ``MARTENSITE_PURE_PYTHON=1`` to force the NumPy reference code.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("MARTENSITE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

aa_epsilon = _impl.aa_epsilon
window_oscillation = _impl.window_oscillation
# vectorized int8 differences beat a compiled loop here (benchmarks/bench_kernels.py)
face_tv = _kernels_py.face_tv
face_jumps_2d = _impl.face_jumps_2d
