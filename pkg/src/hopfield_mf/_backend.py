"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the numpy
kernels in ``_pycore`` are used.  ``HOPFIELD_MF_BACKEND=python`` forces the
fallback, ``=compiled`` makes a missing extension an import error.
"""

import os

from . import _pycore

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_choice = os.environ.get("HOPFIELD_MF_BACKEND", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"HOPFIELD_MF_BACKEND must be auto, python or compiled, got {_choice!r}")
if _choice == "compiled" and _core is None:
    raise ImportError("HOPFIELD_MF_BACKEND=compiled but hopfield_mf._core is not built")

kernels = _pycore if (_choice == "python" or _core is None) else _core


def get(name=None):
    """Return the kernel module ``name`` ("python"/"compiled"), or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pycore
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend is not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")


def available():
    return ["python"] + (["compiled"] if _core is not None else [])


def workers():
    """Worker count from ``HOPFIELD_MF_WORKERS`` (default 1)."""
    raw = os.environ.get("HOPFIELD_MF_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"HOPFIELD_MF_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)
