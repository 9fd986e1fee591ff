"""Primitive intersection kernels.

The numba backend is used by default; set RAYBAR_NO_NUMBA=1 (or fail to
import numba) to fall back to the pure-numpy implementation.  Both backends
compute identical results; ``benchmarks/kernel_bench.py`` compares their
throughput.
"""

from __future__ import annotations

import os

from ._numpy import DENOM_EPS, PLANE, SPHERE, T_EPS, TRIANGLE  # noqa: F401

if os.environ.get("RAYBAR_NO_NUMBA"):
    from . import _numpy as _impl
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover
        from . import _numpy as _impl
        BACKEND = "numpy"

intersect_subset = _impl.intersect_subset
trace_nearest = _impl.trace_nearest


def backend() -> str:
    return BACKEND
