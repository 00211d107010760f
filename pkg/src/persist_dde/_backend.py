"""Selects the compiled kernel when it is importable, the pure-Python twin otherwise.

Set ``PERSIST_DDE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("PERSIST_DDE_PURE_PYTHON") == "1":
    rk4_family = _kernels_py.rk4_family
    BACKEND = "python"
else:
    try:
        from ._kernels import rk4_family
        BACKEND = "compiled"
    except ImportError:
        rk4_family = _kernels_py.rk4_family
        BACKEND = "python"

KERNELS = {"python": _kernels_py.rk4_family}
if BACKEND == "compiled":
    KERNELS["compiled"] = rk4_family
