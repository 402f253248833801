"""Kernel backend selection.

The hot inner loops (hypercube enumeration, dual coordinate ascent sweeps,
perceptron passes, the flow integrator) exist in two flavors: numba-compiled
loops and a pure NumPy/Python fallback.  Which one is active is decided once,
at import time, from the environment:

    EXACTLAB_BACKEND=numba   require numba, fail loudly if it is missing
    EXACTLAB_BACKEND=numpy   force the fallback path (no compilation)
    EXACTLAB_BACKEND=auto    use numba when importable (default)

Both paths compute identical results; see benchmarks/bench_backends.py for a
speed comparison.
"""

import os

_VALID = ("auto", "numba", "numpy")
_requested = os.environ.get("EXACTLAB_BACKEND", "auto").strip().lower()
if _requested not in _VALID:
    raise RuntimeError(
        f"EXACTLAB_BACKEND={_requested!r} is not one of {_VALID}"
    )

if _requested in ("auto", "numba"):
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:
        if _requested == "numba":
            raise
        NUMBA_ENABLED = False
        _njit = None
else:
    NUMBA_ENABLED = False
    _njit = None

BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def njit_or_python(func):
    """Compile with numba when that backend is active, else return func as is."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    return func
