# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels for the sparse Hermitian hot path.

Single-threaded by design: results must be bitwise reproducible, and the
accumulation order here matches the numpy fallback (row-major over stored
entries).
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def csr_matvec(cnp.int64_t[::1] indptr,
               cnp.int64_t[::1] indices,
               double complex[::1] data,
               double complex[::1] x,
               double complex[::1] out):
    """out <- A @ x for CSR-stored A. `out` must be zero-initialised."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t row, k
    cdef double complex acc
    for row in range(n):
        acc = 0
        for k in range(indptr[row], indptr[row + 1]):
            acc = acc + data[k] * x[indices[k]]
        out[row] = acc
    return None
