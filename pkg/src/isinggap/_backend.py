"""Kernel selection: compiled ``_kernels`` when importable, else ``_fallback``.

Set ``ISINGGAP_PURE=1`` to force the pure-Python kernels.
"""
import os

from . import _fallback

if os.environ.get("ISINGGAP_PURE") == "1":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "compiled"
    except ImportError:
        kernels = _fallback
        BACKEND = "python"

jacobi_eigh = kernels.jacobi_eigh
log_weights = kernels.log_weights
glauber_run = kernels.glauber_run
influence_max = kernels.influence_max
