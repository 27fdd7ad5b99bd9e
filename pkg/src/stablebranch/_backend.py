"""Backend selection for the hot loops.

Set ``STABLEBRANCH_BACKEND=numpy`` to force the vectorised pure-numpy kernels;
the default is ``numba`` whenever numba imports cleanly.
"""
import os

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

ENV_VAR = "STABLEBRANCH_BACKEND"


def backend_name():
    """Return ``"numba"`` or ``"numpy"`` according to the environment."""
    requested = os.environ.get(ENV_VAR, "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        return "numpy"
    return requested


def use_numba():
    return backend_name() == "numba"
