import numpy as np
import pytest

from clockham import linalg
from clockham.linalg import SparseOperator

from oracles import dense_evolve


def random_hermitian(rng, dim, density=0.4):
    mat = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal(
        (dim, dim))
    mat[rng.random((dim, dim)) > density] = 0
    mat = (mat + mat.conj().T) / 2
    return mat


def sparse_from_dense_hermitian(mat):
    rows, cols = np.nonzero(mat)
    keep = rows <= cols
    entries = []
    for r, c in zip(rows[keep], cols[keep]):
        entries.append((int(r), int(c), mat[r, c]))
        if r != c:
            entries.append((int(c), int(r), np.conj(mat[r, c])))
    return SparseOperator(mat.shape[0], entries)


class TestSparseOperator:
    def test_duplicates_are_summed(self):
        op = SparseOperator(2, [(0, 1, 0.5), (0, 1, 0.5), (1, 0, 0.5),
                                (1, 0, 0.5)])
        assert op.nnz == 2
        assert op.to_dense()[0, 1] == 1.0

    def test_exact_zeros_dropped(self):
        op = SparseOperator(2, [(0, 1, 1.0), (0, 1, -1.0),
                                (1, 0, 1.0), (1, 0, -1.0)])
        assert op.nnz == 0

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            SparseOperator(2, [(0, 2, 1.0), (2, 0, 1.0)])

    def test_hermitian_flag_enforced(self):
        with pytest.raises(ValueError, match="conjugate-symmetric"):
            SparseOperator(2, [(0, 1, 1.0)])

    def test_conjugate_symmetry_exact(self):
        rng = np.random.default_rng(7)
        op = sparse_from_dense_hermitian(random_hermitian(rng, 24))
        order = np.lexsort((op.rows, op.cols))
        assert np.array_equal(op.data, np.conj(op.data[order]))

    def test_non_hermitian_allowed_with_flag(self):
        op = SparseOperator(2, [(0, 1, 1.0)], hermitian=False)
        assert op.nnz == 1

    def test_add_and_scale(self):
        x = SparseOperator(2, [(0, 1, 1.0), (1, 0, 1.0)])
        z = SparseOperator.from_diagonal([1, -1])
        s = x + z.scaled(2.0)
        expect = np.array([[2, 1], [1, -2]], dtype=complex)
        assert np.array_equal(s.to_dense(), expect)


class TestApply:
    def test_identity(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.array_equal(linalg.apply(SparseOperator.identity(8), v), v)

    def test_zero_operator(self):
        op = SparseOperator(4, [])
        v = np.ones(4, dtype=complex)
        assert np.array_equal(op.matvec(v), np.zeros(4))

    def test_pauli_x(self):
        x = SparseOperator(2, [(0, 1, 1.0), (1, 0, 1.0)])
        out = linalg.apply(x, np.array([1.0, 0.0], dtype=complex))
        assert np.array_equal(out, np.array([0.0, 1.0], dtype=complex))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            SparseOperator.identity(3).matvec(np.ones(4, dtype=complex))

    def test_matches_dense(self):
        rng = np.random.default_rng(3)
        mat = random_hermitian(rng, 40)
        op = sparse_from_dense_hermitian(mat)
        v = rng.standard_normal(40) + 1j * rng.standard_normal(40)
        assert np.linalg.norm(op.matvec(v) - mat @ v) < 1e-12


class TestEvolve:
    def test_pauli_x_quarter_period(self):
        x = SparseOperator(2, [(0, 1, 1.0), (1, 0, 1.0)])
        out = linalg.evolve(x, np.array([1.0, 0.0]), np.pi / 2)
        assert np.allclose(out, [0.0, -1.0j], atol=1e-12)

    def test_t_zero_is_identity(self):
        x = SparseOperator(2, [(0, 1, 1.0), (1, 0, 1.0)])
        v = np.array([0.6, 0.8], dtype=complex)
        assert np.array_equal(linalg.evolve(x, v, 0.0), v)

    def test_requires_hermitian(self):
        op = SparseOperator(2, [(0, 1, 1.0)], hermitian=False)
        with pytest.raises(ValueError, match="Hermitian"):
            linalg.evolve(op, np.array([1.0, 0.0]), 1.0)

    def test_matches_dense_oracle_8dim(self):
        rng = np.random.default_rng(11)
        op = sparse_from_dense_hermitian(random_hermitian(rng, 8, 1.0))
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        v /= np.linalg.norm(v)
        got = linalg.evolve(op, v, 1.3)
        assert np.linalg.norm(got - dense_evolve(op, v, 1.3)) < 1e-10

    @pytest.mark.parametrize("dim,t", [(64, 2.7), (257, 0.9), (512, 5.0)])
    def test_matches_dense_oracle_larger(self, dim, t):
        rng = np.random.default_rng(dim)
        op = sparse_from_dense_hermitian(random_hermitian(rng, dim, 0.05))
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        got = linalg.evolve(op, v, t)
        assert np.linalg.norm(got - dense_evolve(op, v, t)) < 1e-10

    def test_negative_time_inverts(self):
        rng = np.random.default_rng(5)
        op = sparse_from_dense_hermitian(random_hermitian(rng, 30, 0.2))
        v = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        v /= np.linalg.norm(v)
        back = linalg.evolve(op, linalg.evolve(op, v, 0.7), -0.7)
        assert np.linalg.norm(back - v) < 1e-10

    def test_norm_preserved(self):
        rng = np.random.default_rng(17)
        for trial in range(5):
            dim = int(rng.integers(4, 120))
            op = sparse_from_dense_hermitian(
                random_hermitian(rng, dim, 0.3))
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            w = linalg.evolve(op, v, float(rng.uniform(0.1, 6.0)))
            assert abs(np.linalg.norm(w) - 1.0) <= 1e-12

    def test_composition(self):
        rng = np.random.default_rng(23)
        op = sparse_from_dense_hermitian(random_hermitian(rng, 48, 0.2))
        v = rng.standard_normal(48) + 1j * rng.standard_normal(48)
        v /= np.linalg.norm(v)
        two_step = linalg.evolve(op, linalg.evolve(op, v, 1.1), 0.6)
        one_step = linalg.evolve(op, v, 1.7)
        assert np.linalg.norm(two_step - one_step) < 1e-9


class TestLowestEigenpairs:
    def test_diagonal(self):
        res = linalg.lowest_eigenpairs(
            SparseOperator.from_diagonal([3, 1, 2]), 1)
        assert res.values[0] == pytest.approx(1.0, abs=1e-12)
        assert abs(res.vectors[1, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_pauli_z_both(self):
        res = linalg.lowest_eigenpairs(
            SparseOperator.from_diagonal([1, -1]), 2)
        assert np.allclose(res.values, [-1.0, 1.0], atol=1e-12)
        assert abs(res.vectors[1, 0]) == pytest.approx(1.0, abs=1e-12)
        assert abs(res.vectors[0, 1]) == pytest.approx(1.0, abs=1e-12)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            linalg.lowest_eigenpairs(SparseOperator.identity(3), 4)

    def test_tridiagonal_matches_dense(self):
        n = 49
        entries = []
        for m in range(n):
            j = np.sqrt((m + 1) * (n - m))
            entries += [(m, m + 1, j), (m + 1, m, j)]
        op = SparseOperator(n + 1, entries)
        res = linalg.lowest_eigenpairs(op, 6)
        dense_vals = np.linalg.eigvalsh(op.to_dense())
        assert np.max(np.abs(res.values - dense_vals[:6])) < 1e-9

    def test_residuals_and_orthonormality(self):
        rng = np.random.default_rng(31)
        op = sparse_from_dense_hermitian(random_hermitian(rng, 90, 0.15))
        res = linalg.lowest_eigenpairs(op, 4)
        for lam, vec in res.pairs:
            assert np.linalg.norm(op.matvec(vec) - lam * vec) <= 1e-9
        gram = res.vectors.conj().T @ res.vectors
        assert np.max(np.abs(gram - np.eye(4))) <= 1e-9

    def test_degenerate_cluster_flagged(self):
        op = SparseOperator.from_diagonal([0.0, 0.0, 1.0, 2.0])
        res = linalg.lowest_eigenpairs(op, 3, degeneracy_tol=1e-8)
        assert res.clusters[0] == [0, 1]
        assert res.clusters[1] == [2]

    def test_iterative_path_with_degeneracy(self):
        # two uncoupled copies of a chain: doubly degenerate levels, above
        # the dense cutoff so the restarted Lanczos path runs
        n = 1200
        entries = []
        for copy in range(2):
            off = copy * n
            for m in range(n - 1):
                entries += [(off + m, off + m + 1, 1.0),
                            (off + m + 1, off + m, 1.0)]
        op = SparseOperator(2 * n, entries)
        res = linalg.lowest_eigenpairs(op, 2, dense_cutoff=64)
        dense_ground = -2 * np.cos(np.pi / (n + 1))
        assert np.allclose(res.values, dense_ground, atol=1e-9)
        assert res.clusters[0] == [0, 1]
        for lam, vec in res.pairs:
            assert np.linalg.norm(op.matvec(vec) - lam * vec) <= 1e-9
        gram = res.vectors.conj().T @ res.vectors
        assert np.max(np.abs(gram - np.eye(2))) <= 1e-9

    def test_nonconvergence_reported(self):
        # clustered spectrum with a starved iteration budget
        n = 1200
        entries = []
        for copy in range(2):
            off = copy * n
            for m in range(n - 1):
                entries += [(off + m, off + m + 1, 1.0),
                            (off + m + 1, off + m, 1.0)]
        op = SparseOperator(2 * n, entries)
        with pytest.raises(linalg.EigensolverConvergenceError):
            linalg.lowest_eigenpairs(op, 2, dense_cutoff=64,
                                     krylov_dim=6, max_restarts=2)


class TestLanczos:
    def test_chain_recovers_couplings(self):
        entries = []
        couplings = [1.0, 2.0, 0.5, 1.5]
        for m, j in enumerate(couplings):
            entries += [(m, m + 1, j), (m + 1, m, j)]
        op = SparseOperator(5, entries)
        alphas, betas, beta_out, _ = linalg.lanczos(
            op, linalg.basis_state(5, 0))
        assert np.allclose(betas, couplings, atol=1e-10)
        assert beta_out == 0.0
        assert np.allclose(alphas, 0.0, atol=1e-12)
