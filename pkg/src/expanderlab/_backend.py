"""Kernel backend selection.

The compiled extension is preferred; set ``EXPANDERLAB_PURE_PYTHON=1`` to force
the pure-Python kernels (used by the benchmark and the backend-agreement tests).
"""
import os

BACKEND = "python"

if os.environ.get("EXPANDERLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._core import flow_step, integrate, sturm_count, thomas

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

if BACKEND == "python":
    from ._pykernels import flow_step, integrate, sturm_count, thomas

__all__ = ["BACKEND", "flow_step", "integrate", "sturm_count", "thomas"]
