"""Backend selection for the Lindblad right-hand-side primitives.

The compiled extension ``_ckernels`` is used when importable; otherwise the
NumPy/SciPy fallback.  Set ``OSCSWAP_KERNELS=python`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

_forced = os.environ.get("OSCSWAP_KERNELS", "").lower()

_compiled = None
if _forced != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _forced == "cython":
            raise

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "python"


def get(name: str | None = None):
    """Kernel module by name (default: the active backend)."""
    return BACKENDS[name or BACKEND]


class CSR:
    """CSR arrays in the index/data types the kernels expect."""

    __slots__ = ("indptr", "indices", "data", "n")

    def __init__(self, m):
        m = m.tocsr()
        m.sort_indices()
        self.indptr = np.ascontiguousarray(m.indptr, dtype=np.int32)
        self.indices = np.ascontiguousarray(m.indices, dtype=np.int32)
        self.data = np.ascontiguousarray(m.data, dtype=np.complex128)
        self.n = m.shape[0]

    @property
    def nnz(self):
        return self.data.size
