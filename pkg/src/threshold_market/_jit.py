"""Backend selection for the hot kernels.

Set ``THRESHOLD_MARKET_NUMPY=1`` to bypass numba. The market kernel then
falls back to a vectorised numpy implementation and the queue/cascade event
loops run as plain Python on the same random buffers, so both paths produce
the same numbers.
"""
import os

ENV_FLAG = "THRESHOLD_MARKET_NUMPY"


def _numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = (
    os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes")
    and _numba_available()
)


def njit(fn):
    """``numba.njit(cache=True)`` when enabled, identity otherwise.

    The returned object always has ``py_func`` so the interpreted version is
    reachable for equivalence tests and benchmarks.
    """
    if USE_NUMBA:
        import numba

        return numba.njit(cache=True, nogil=True)(fn)
    fn.py_func = fn
    return fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
