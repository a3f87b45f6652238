"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
kernels are used.  Setting ``HOPFHJ_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("HOPFHJ_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py

BACKEND = kernels.NAME


def available_backends():
    """Mapping of backend name to kernel module, for side-by-side runs."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["compiled"] = _kernels
    return out
