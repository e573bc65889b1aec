# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Lindblad right-hand-side primitives (same contract as _kernels_py)."""

import numpy as np

ctypedef double complex cplx

BACKEND = "cython"

cdef inline cplx conj(cplx z) noexcept nogil:
    return z.real - 1j * z.imag


cdef void _csr_times_dense(const int[::1] indptr, const int[::1] indices, const cplx[::1] data,
                           const cplx[:, ::1] rho, cplx[:, ::1] work) noexcept nogil:
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, j, p, c
    cdef cplx v
    for i in range(n):
        for c in range(n):
            work[i, c] = 0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(n):
                work[i, c] = work[i, c] + v * rho[j, c]


def hermitian_product(cplx[:, ::1] out, const cplx[:, ::1] rho, const int[::1] indptr,
                      const int[::1] indices, const cplx[::1] data, cplx coeff, cplx[:, ::1] work):
    """out += c A rho + conj(c) (A rho)^dag"""
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, j, ib, jb, i1, j1
    cdef Py_ssize_t B = 32
    cdef cplx cc = conj(coeff)
    with nogil:
        _csr_times_dense(indptr, indices, data, rho, work)
        ib = 0
        while ib < n:
            i1 = min(ib + B, n)
            jb = 0
            while jb < n:
                j1 = min(jb + B, n)
                for i in range(ib, i1):
                    for j in range(jb, j1):
                        out[i, j] = out[i, j] + coeff * work[i, j] + cc * conj(work[j, i])
                jb += B
            ib += B


def sandwich(cplx[:, ::1] out, const cplx[:, ::1] rho, const int[::1] indptr,
             const int[::1] indices, const cplx[::1] data, double rate, cplx[:, ::1] work):
    """out += rate A rho A^dag"""
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, k, p
    cdef cplx acc
    with nogil:
        _csr_times_dense(indptr, indices, data, rho, work)
        # out[i, k] += rate * sum_l work[i, l] conj(A[k, l])
        for i in range(n):
            for k in range(n):
                if indptr[k] == indptr[k + 1]:
                    continue
                acc = 0
                for p in range(indptr[k], indptr[k + 1]):
                    acc = acc + work[i, indices[p]] * conj(data[p])
                out[i, k] = out[i, k] + rate * acc


def diagonal_anticommutator(cplx[:, ::1] out, const cplx[:, ::1] rho, const double[::1] k):
    """out[i, j] -= (k[i] + k[j]) / 2 * rho[i, j]"""
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, j
    cdef double ki
    with nogil:
        for i in range(n):
            ki = k[i]
            for j in range(n):
                out[i, j] = out[i, j] - 0.5 * (ki + k[j]) * rho[i, j]
