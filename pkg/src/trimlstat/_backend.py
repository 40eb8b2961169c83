"""Kernel backend selection.

The compiled extension is used when it imports; ``TRIMLSTAT_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def available():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def get(name=None):
    """Kernel module by name (``"compiled"`` or ``"python"``); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("TRIMLSTAT_PURE_PYTHON", "").strip() not in ("", "0") or _compiled is None:
    kernels = _fallback
else:
    kernels = _compiled

BACKEND = kernels.NAME
