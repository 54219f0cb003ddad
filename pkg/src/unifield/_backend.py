"""Pick the compiled kernels when available.

Set ``UNIFIELD_PURE=1`` to force the pure-Python kernels.
"""
import os

from . import _purecore

core = _purecore
NAME = "python"

if not os.environ.get("UNIFIELD_PURE"):
    try:
        from . import _core
    except ImportError:  # extension not built
        pass
    else:
        core = _core
        NAME = "compiled"


def get(name=None):
    """Return the kernel module by name (``"compiled"``/``"python"``); default is active."""
    if name is None:
        return core
    if name == "python":
        return _purecore
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
