"""Backend selection for the numeric hot loops.

The row-wise kernel evaluations and the built-in model batches exist in two
signature-identical implementations: a pure-numpy one and a numba ``@njit``
one.  The environment variable ``KBSENS_BACKEND`` picks which gets wired in
when the package is imported:

    KBSENS_BACKEND=auto    numba when importable, numpy otherwise (default)
    KBSENS_BACKEND=numba   require numba, fail loudly if unavailable
    KBSENS_BACKEND=numpy   force the pure-numpy path

Both paths compute the same quantities; summation order differs, so results
agree to floating-point rounding but are not bit-identical across backends.
Within one backend everything is deterministic.
"""

import os

from . import _accel_numpy

_MODE = os.environ.get("KBSENS_BACKEND", "auto").strip().lower()

if _MODE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"KBSENS_BACKEND must be one of auto/numba/numpy, got {_MODE!r}"
    )

impl = _accel_numpy
_backend_name = "numpy"

if _MODE in ("auto", "numba"):
    try:
        from . import _accel_numba

        impl = _accel_numba
        _backend_name = "numba"
    except ImportError as exc:
        if _MODE == "numba":
            raise RuntimeError(
                "KBSENS_BACKEND=numba but numba could not be imported"
            ) from exc


def active_backend() -> str:
    """Name of the implementation selected at import time, numba or numpy."""
    return _backend_name
