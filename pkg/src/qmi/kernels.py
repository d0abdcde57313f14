"""Kernel back-end selection.

The compiled extension is used when it imports; ``QMI_PURE_PYTHON=1`` forces
the pure-Python twins (handy for debugging and for the equivalence tests).
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("QMI_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

antitone_project = _impl.antitone_project
quantile_positions = _impl.quantile_positions


def get_backend(name):
    """Return the kernel module by name ("cython" or "python")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(name)
