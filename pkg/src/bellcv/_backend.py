"""Kernel backend selection.

The compiled extension is preferred; setting ``BELLCV_PURE_PYTHON=1`` or a
missing build selects the numpy fallback. Both expose the same functions.
"""
import os

from . import _pykernels as python_kernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and not os.environ.get("BELLCV_PURE_PYTHON"):
    kernels = compiled_kernels
    BACKEND = "cython"
else:
    kernels = python_kernels
    BACKEND = "python"

__all__ = ["kernels", "BACKEND", "python_kernels", "compiled_kernels"]
