"""Sparse Hermitian linear algebra: operators, Krylov time evolution, eigensolving.

Operators are stored in canonical COO triplet form (sorted, duplicates summed)
with a CSR view for the matvec hot path; the matvec itself runs on the
compiled kernel when available (see `clockham._kernels`). State vectors are
plain 1-D complex numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from ._kernels import csr_matvec


class EigensolverConvergenceError(RuntimeError):
    """Raised when the iterative eigensolver exhausts its restart budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


def norm(v):
    return float(np.linalg.norm(v))


def normalized(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return np.asarray(v, dtype=complex) / n


def basis_state(dim, index):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def fidelity(a, b):
    """|<a|b>|, the phase-insensitive overlap magnitude."""
    return abs(np.vdot(a, b))


class SparseOperator:
    """Hermitian-flagged sparse operator over an explicit basis.

    Entries are canonicalized at construction: sorted by (row, col),
    duplicates summed, exact zeros dropped. With hermitian=True the entry
    table must be exactly conjugate-symmetric after canonicalization; all
    builders in this package emit (r, c, a) together with (c, r, conj(a)) so
    the check holds to the bit.
    """

    __slots__ = ("dim", "rows", "cols", "data", "hermitian",
                 "_indptr", "_norm_bound")

    def __init__(self, dim, entries=None, hermitian=True, *, _canonical=None):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = int(dim)
        self.hermitian = bool(hermitian)
        if _canonical is not None:
            rows, cols, data = _canonical
        else:
            rows, cols, data = self._canonicalize(entries)
        self.rows = rows
        self.cols = cols
        self.data = data
        self._indptr = None
        self._norm_bound = None
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= dim \
                    or self.cols.min() < 0 or self.cols.max() >= dim:
                raise ValueError("entry index out of range")
        if self.hermitian:
            self._check_conjugate_symmetry()

    @staticmethod
    def _canonicalize(entries):
        if entries is None:
            entries = []
        if isinstance(entries, tuple) and len(entries) == 3:
            rows, cols, data = entries
            rows = np.asarray(rows, dtype=np.int64)
            cols = np.asarray(cols, dtype=np.int64)
            data = np.asarray(data, dtype=complex)
        else:
            entries = list(entries)
            if entries:
                rows = np.array([e[0] for e in entries], dtype=np.int64)
                cols = np.array([e[1] for e in entries], dtype=np.int64)
                data = np.array([e[2] for e in entries], dtype=complex)
            else:
                rows = np.zeros(0, dtype=np.int64)
                cols = np.zeros(0, dtype=np.int64)
                data = np.zeros(0, dtype=complex)
        if rows.size == 0:
            return rows, cols, data
        order = np.lexsort((cols, rows))
        rows, cols, data = rows[order], cols[order], data[order]
        boundary = np.empty(rows.size, dtype=bool)
        boundary[0] = True
        np.not_equal(rows[1:], rows[:-1], out=boundary[1:])
        boundary[1:] |= cols[1:] != cols[:-1]
        starts = np.flatnonzero(boundary)
        summed = np.add.reduceat(data, starts)
        rows, cols = rows[starts], cols[starts]
        keep = summed != 0
        return rows[keep], cols[keep], summed[keep]

    def _check_conjugate_symmetry(self):
        order = np.lexsort((self.rows, self.cols))
        if not (np.array_equal(self.rows, self.cols[order])
                and np.array_equal(self.cols, self.rows[order])
                and np.array_equal(self.data, np.conj(self.data[order]))):
            raise ValueError("hermitian flag set but entries are not "
                             "conjugate-symmetric")

    @property
    def nnz(self):
        return int(self.data.size)

    @property
    def indptr(self):
        if self._indptr is None:
            counts = np.bincount(self.rows, minlength=self.dim)
            indptr = np.zeros(self.dim + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            self._indptr = indptr
        return self._indptr

    def norm_bound(self):
        """Gershgorin-style bound on the spectral norm."""
        if self._norm_bound is None:
            if self.nnz == 0:
                self._norm_bound = 0.0
            else:
                row_sums = np.bincount(self.rows, weights=np.abs(self.data),
                                       minlength=self.dim)
                self._norm_bound = float(row_sums.max())
        return self._norm_bound

    def matvec(self, v):
        v = np.ascontiguousarray(v, dtype=complex)
        if v.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: operator dim {self.dim}, "
                             f"vector shape {v.shape}")
        out = np.zeros(self.dim, dtype=complex)
        csr_matvec(self.indptr, self.cols, self.data, v, out)
        return out

    def to_dense(self):
        mat = np.zeros((self.dim, self.dim), dtype=complex)
        mat[self.rows, self.cols] = self.data
        return mat

    @classmethod
    def from_dense(cls, mat, hermitian=True, tol=0.0):
        mat = np.asarray(mat, dtype=complex)
        rows, cols = np.nonzero(np.abs(mat) > tol)
        return cls(mat.shape[0], (rows, cols, mat[rows, cols]),
                   hermitian=hermitian)

    @classmethod
    def identity(cls, dim):
        idx = np.arange(dim, dtype=np.int64)
        return cls(dim, (idx, idx, np.ones(dim, dtype=complex)))

    @classmethod
    def from_diagonal(cls, values):
        values = np.asarray(values, dtype=complex)
        idx = np.arange(values.size, dtype=np.int64)
        return cls(values.size, (idx, idx, values))

    def __add__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in operator sum")
        return SparseOperator(
            self.dim,
            (np.concatenate([self.rows, other.rows]),
             np.concatenate([self.cols, other.cols]),
             np.concatenate([self.data, other.data])),
            hermitian=self.hermitian and other.hermitian)

    def scaled(self, factor):
        hermitian = self.hermitian and float(np.imag(factor)) == 0.0
        return SparseOperator(
            self.dim, (self.rows, self.cols, self.data * factor),
            hermitian=hermitian)

    def __repr__(self):
        return (f"SparseOperator(dim={self.dim}, nnz={self.nnz}, "
                f"hermitian={self.hermitian})")


def apply(op, v):
    """op @ v with dimension checking."""
    return op.matvec(v)


def expectation(op, v):
    """<v|op|v>; real part only (callers use it on Hermitian operators)."""
    return float(np.real(np.vdot(v, op.matvec(v))))


def lanczos(op, start, max_steps=None, *, breakdown_tol=1e-12,
            reorthogonalize=True, ortho_against=None):
    """Iterative tridiagonalization of a Hermitian operator from `start`.

    Returns (alphas, betas, beta_out, V) where T = tridiag(betas, alphas,
    betas) is the projection of op onto the Krylov basis V (dim x j), and
    beta_out is the coupling out of the subspace (0.0 on breakdown, i.e.
    when the Krylov space closed).
    """
    dim = op.dim
    if max_steps is None:
        max_steps = dim
    max_steps = min(max_steps, dim)
    v = normalized(start)
    if ortho_against is not None and len(ortho_against):
        locked = np.asarray(ortho_against)
        v = v - locked.T @ (np.conj(locked) @ v)
        nv = np.linalg.norm(v)
        if nv < 1e-10:
            raise ValueError("start vector lies in the deflated subspace")
        v = v / nv
    else:
        locked = None

    basis = [v]
    alphas, betas = [], []
    scale = max(op.norm_bound(), 1.0)
    w = op.matvec(v)
    alpha = float(np.real(np.vdot(v, w)))
    alphas.append(alpha)
    w = w - alpha * v
    for _ in range(1, max_steps):
        if reorthogonalize:
            V = np.array(basis)
            for _pass in range(2):
                w = w - V.T @ (np.conj(V) @ w)
                if locked is not None:
                    w = w - locked.T @ (np.conj(locked) @ w)
        beta = float(np.linalg.norm(w))
        if beta <= breakdown_tol * scale:
            return (np.array(alphas), np.array(betas), 0.0,
                    np.array(basis).T)
        v_next = w / beta
        basis.append(v_next)
        betas.append(beta)
        w = op.matvec(v_next)
        alpha = float(np.real(np.vdot(v_next, w)))
        alphas.append(alpha)
        w = w - alpha * v_next - beta * basis[-2]
    if reorthogonalize:
        V = np.array(basis)
        for _pass in range(2):
            w = w - V.T @ (np.conj(V) @ w)
            if locked is not None:
                w = w - locked.T @ (np.conj(locked) @ w)
    beta_out = float(np.linalg.norm(w))
    if beta_out <= breakdown_tol * scale:
        beta_out = 0.0
    return np.array(alphas), np.array(betas), beta_out, np.array(basis).T


def evolve(op, v, t, *, tol=1e-12, max_krylov=40):
    """e^{-i op t} v via an adaptive short-step Krylov propagator.

    Per-step truncation error is held below `tol`; the overall accuracy
    against a dense exponential is ~1e-10 for the operator sizes this
    package produces.
    """
    if not op.hermitian:
        raise ValueError("evolve requires a Hermitian operator")
    v = np.asarray(v, dtype=complex)
    if v.shape != (op.dim,):
        raise ValueError(f"dimension mismatch: operator dim {op.dim}, "
                         f"vector shape {v.shape}")
    t = float(t)
    if t == 0.0 or op.nnz == 0:
        return v.copy()
    vnorm = np.linalg.norm(v)
    if vnorm == 0:
        return v.copy()

    psi = v / vnorm
    remaining = t
    hnorm = max(op.norm_bound(), 1e-30)
    while remaining != 0.0:
        alphas, betas, beta_out, V = lanczos(
            op, psi, max_steps=max_krylov, breakdown_tol=1e-13)
        m = len(alphas)
        if m == 1:
            evals = alphas.copy()
            evecs = np.ones((1, 1))
        else:
            evals, evecs = eigh_tridiagonal(alphas, betas)
        weights = evecs[0, :]

        def propagated(dt):
            return evecs @ (np.exp(-1j * evals * dt) * weights)

        if beta_out == 0.0:
            dt = remaining
        else:
            dt = np.sign(remaining) * min(abs(remaining),
                                          max(m / hnorm, 1e-12))
            for _ in range(80):
                samples = [propagated(dt * f)[-1] for f in (0.34, 0.67, 1.0)]
                est = beta_out * abs(dt) * max(abs(s) for s in samples)
                if est <= tol:
                    break
                dt *= 0.5
            else:
                raise RuntimeError("Krylov propagator failed to reach the "
                                   "requested step tolerance")
        psi = V @ propagated(dt)
        remaining -= dt
    return psi * vnorm


@dataclass
class EigenResult:
    """Ascending eigenpairs plus degenerate-cluster bookkeeping."""
    values: np.ndarray
    vectors: np.ndarray           # column i pairs with values[i]
    clusters: list = field(default_factory=list)

    @property
    def pairs(self):
        return [(float(self.values[i]), self.vectors[:, i])
                for i in range(len(self.values))]


def _cluster_indices(values, degeneracy_tol):
    clusters = []
    current = [0]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] <= degeneracy_tol:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)
    return clusters


def _fix_phases(vectors):
    for i in range(vectors.shape[1]):
        col = vectors[:, i]
        idx = int(np.argmax(np.abs(col)))
        ref = col[idx]
        if abs(ref) > 0:
            vectors[:, i] = col * (np.conj(ref) / abs(ref))
    return vectors


def _orthonormalize_clusters(vectors, clusters):
    # Deterministic tie-break inside degenerate clusters: Gram-Schmidt in
    # discovery order, then a fixed phase convention.
    for cluster in clusters:
        for j, idx in enumerate(cluster):
            col = vectors[:, idx]
            for prev in cluster[:j]:
                col = col - vectors[:, prev] * np.vdot(vectors[:, prev], col)
            vectors[:, idx] = col / np.linalg.norm(col)
    return _fix_phases(vectors)


def lowest_eigenpairs(op, k, degeneracy_tol=1e-8, *, residual_tol=1e-9,
                      dense_cutoff=2048, max_restarts=None, krylov_dim=None):
    """k lowest eigenpairs of a Hermitian operator, ascending.

    Dense path below `dense_cutoff`; restarted deflation Lanczos with full
    reorthogonalization above it. Eigenvalues closer than `degeneracy_tol`
    are grouped into one degenerate cluster (EigenResult.clusters).
    """
    if not op.hermitian:
        raise ValueError("lowest_eigenpairs requires a Hermitian operator")
    if not 1 <= k <= op.dim:
        raise ValueError(f"k must be in [1, {op.dim}], got {k}")

    if op.dim < dense_cutoff:
        values, vectors = eigh(op.to_dense())
        values = values[:k].astype(float)
        vectors = vectors[:, :k].astype(complex)
    else:
        values, vectors = _iterative_lowest(op, k, residual_tol,
                                            max_restarts, krylov_dim)
    clusters = _cluster_indices(values, degeneracy_tol)
    vectors = _orthonormalize_clusters(vectors, clusters)
    return EigenResult(values=values, vectors=vectors, clusters=clusters)


def _iterative_lowest(op, k, residual_tol, max_restarts, krylov_dim):
    """Implicitly restarted Lanczos (ARPACK) with deflation locking.

    Exactly degenerate copies are invisible to a single Krylov sequence, so
    converged vectors are locked by shifting them far up the spectrum and
    the solve repeats on the deflated operator until k pairs are found.
    Every returned pair is residual-verified against the original operator.
    """
    from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator
    from scipy.sparse.linalg import eigsh

    dim = op.dim
    rng = np.random.default_rng(0xC10C)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    shift = 4.0 * max(op.norm_bound(), 1.0)
    locked_vals, locked_vecs = [], []
    while len(locked_vecs) < k:
        locked = np.array(locked_vecs) if locked_vecs else None

        def matvec(x, locked=locked):
            y = op.matvec(np.asarray(x, dtype=complex).ravel())
            if locked is not None:
                y = y + shift * (locked.T @ (np.conj(locked) @ x))
            return y

        aop = LinearOperator((dim, dim), matvec=matvec, dtype=complex)
        want = min(k - len(locked_vecs) + 1, dim - 2)
        ncv = krylov_dim or min(dim, max(6 * want + 20, 40))
        maxiter = max_restarts if max_restarts is not None else 100 * dim
        try:
            vals, vecs = eigsh(aop, k=want, which="SA", v0=v0,
                               ncv=ncv, maxiter=maxiter,
                               tol=residual_tol * 1e-2)
        except ArpackNoConvergence as exc:
            raise EigensolverConvergenceError(
                f"ARPACK did not converge: {exc}") from exc
        # lock only the lowest verified pair per solve: a Krylov sequence
        # cannot see extra copies of a degenerate value, so the rest of the
        # returned pairs may skip over them; re-solving deflated finds the
        # true next-lowest each time
        progress = False
        resid = None
        for i in np.argsort(vals):
            y = vecs[:, i].astype(complex)
            for w in locked_vecs:
                y = y - w * np.vdot(w, y)
            ny = np.linalg.norm(y)
            if ny < 1e-6:
                continue
            y = y / ny
            lam = float(np.real(np.vdot(y, op.matvec(y))))
            resid = np.linalg.norm(op.matvec(y) - lam * y)
            if resid <= residual_tol:
                locked_vecs.append(y)
                locked_vals.append(lam)
                progress = True
                break
        if not progress:
            raise EigensolverConvergenceError(
                f"eigensolver stalled with {len(locked_vecs)} of {k} pairs "
                f"locked (residual {resid:.3e})", residuals=resid)
    order = np.argsort(locked_vals)[:k]
    values = np.array([locked_vals[i] for i in order])
    vectors = np.column_stack([locked_vecs[i] for i in order])
    return values, vectors
