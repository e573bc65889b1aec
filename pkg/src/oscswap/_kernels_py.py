"""NumPy/SciPy implementation of the Lindblad right-hand-side primitives.

All functions accumulate into ``out`` in place.  ``rho`` must be Hermitian:
the Hamiltonian and anticommutator terms use ``rho A^dag = (A rho)^dag``.
CSR operands are passed as ``(indptr, indices, data, n)``.
"""

import numpy as np
import scipy.sparse as sp


def _csr(indptr, indices, data, n):
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def hermitian_product(out, rho, indptr, indices, data, coeff, work=None):
    """``out += c A rho + conj(c) (A rho)^dag``."""
    x = _csr(indptr, indices, data, rho.shape[0]) @ rho
    out += coeff * x
    out += np.conj(coeff) * x.conj().T


def sandwich(out, rho, indptr, indices, data, rate, work=None):
    """``out += rate A rho A^dag``."""
    a = _csr(indptr, indices, data, rho.shape[0])
    y = a @ rho
    out += rate * (a @ y.conj().T).conj().T


def diagonal_anticommutator(out, rho, k):
    """``out[i, j] -= (k[i] + k[j]) / 2 * rho[i, j]``."""
    out -= 0.5 * (k[:, None] + k[None, :]) * rho


BACKEND = "python"
