"""Kernel backend selection: compiled extension when available, pure Python otherwise.

Set ADAMLAB_PURE=1 to force the pure backend (used by tests and benchmarks).
"""

import os

from . import _kernels_py

if os.environ.get("ADAMLAB_PURE") == "1":
    kernels = _kernels_py
    BACKEND = "pure"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "pure"


def get_backends():
    """Return {name: module} for every importable backend."""
    out = {"pure": _kernels_py}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
