"""Backend selection for the hot numeric kernels.

Set ``OSRF_BACKEND=numpy`` to force the pure-numpy path; the default is
``numba`` when it can be imported. The variable is read once at import.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

_requested = os.environ.get("OSRF_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"OSRF_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

HAVE_NUMBA = numba is not None
if HAVE_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # skip probing the system TBB, which may be too old and warns when it is
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
BACKEND = "numba" if (HAVE_NUMBA and _requested == "numba") else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def set_threads(n):
    """Cap numba worker threads (no-op on the numpy backend)."""
    if HAVE_NUMBA and n is not None:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
