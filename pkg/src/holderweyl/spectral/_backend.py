"""Kernel selection: compiled extension if importable, else pure Python.

Set ``HOLDERWEYL_BACKEND=python`` to force the fallback.
"""
import os

from . import _ldl_py

try:
    from . import _ldl_cy
except ImportError:  # extension not built
    _ldl_cy = None

KERNELS = {"python": _ldl_py}
if _ldl_cy is not None:
    KERNELS["cython"] = _ldl_cy


def _select():
    wanted = os.environ.get("HOLDERWEYL_BACKEND", "").strip().lower()
    if wanted:
        if wanted not in KERNELS:
            raise ImportError(f"HOLDERWEYL_BACKEND={wanted!r} is not available; have {sorted(KERNELS)}")
        return wanted
    return "cython" if "cython" in KERNELS else "python"


BACKEND = _select()
kernel = KERNELS[BACKEND]
