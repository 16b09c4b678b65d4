"""Kernel backend selection.

The compiled Cython CSR kernel is preferred; a numpy implementation is the
fallback. Set CLOCKHAM_BACKEND=python to force the fallback (used by the
benchmark to compare both).
"""
import os

BACKEND = "python"

if os.environ.get("CLOCKHAM_BACKEND", "").lower() not in ("python", "numpy"):
    try:
        from ._csr import csr_matvec  # noqa: F401

        BACKEND = "compiled"
    except ImportError:
        from .backend_numpy import csr_matvec  # noqa: F401
else:
    from .backend_numpy import csr_matvec  # noqa: F401
