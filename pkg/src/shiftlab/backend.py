"""Backend selection for the pairwise-kernel hot loops.

The O(n^2) kernel sums behind the MMD estimators exist twice: a numba
@njit implementation and a blocked pure-numpy fallback. The env var
SHIFTLAB_BACKEND forces one ("numba" or "numpy"); unset, numba is used
when importable. Resolution happens once at import time.
"""
import os


def resolve_backend() -> str:
    choice = os.environ.get("SHIFTLAB_BACKEND", "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(
            f"SHIFTLAB_BACKEND must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = resolve_backend()
