"""Pure-numpy CSR matvec, used when the compiled extension is unavailable."""
import numpy as np


def csr_matvec(indptr, indices, data, x, out):
    """out <- A @ x. Row ids are expanded once per call; fine for a fallback."""
    products = data * x[indices]
    rows = np.repeat(
        np.arange(indptr.shape[0] - 1, dtype=np.int64), np.diff(indptr)
    )
    n = out.shape[0]
    out.real[:] = np.bincount(rows, weights=products.real, minlength=n)
    out.imag[:] = np.bincount(rows, weights=products.imag, minlength=n)
