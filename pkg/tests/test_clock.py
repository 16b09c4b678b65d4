import numpy as np
import pytest

from clockham import clock, linalg, transfer
from clockham.circuit import (Circuit, Gate, Wire, bitflip_ec_circuit, cnot,
                              parse_circuit, simulate_dense)
from clockham.clock import (ArrivalShortfallError, DegeneracyMismatchError,
                            build_feynman, build_kitaev, history_state,
                            run_computation, spectral_gap)

from oracles import dense_evolve


def x_circuit():
    return parse_circuit("wire q0 qubit data\ngate X q0\n")


def identity_like_circuit():
    # X twice: the net work unitary is the identity
    return parse_circuit("wire q0 qubit data\ngate X q0\ngate X q0\n")


def random_small_circuit(rng):
    n = int(rng.integers(1, 3))
    wires = tuple(Wire(i, f"q{i}", 2, "data") for i in range(n))
    gates = []
    for _ in range(int(rng.integers(1, 5))):
        if n == 2 and rng.random() < 0.4:
            gates.append(cnot(*rng.permutation(2).tolist()))
        else:
            kind = ["X", "Y", "Z", "H"][int(rng.integers(0, 4))]
            gates.append(Gate(kind, (int(rng.integers(0, n)),)))
    return Circuit(wires, tuple(gates))


class TestBuildFeynman:
    def test_single_gate_transfer(self):
        h = build_feynman(x_circuit(), transfer.pst_couplings(1))
        v0 = h.initial_state(linalg.basis_state(2, 0))
        vt = linalg.evolve(h.operator, v0, np.pi / 2)
        block = h.clock_block(vt, 1)
        assert abs(block[1]) == pytest.approx(1.0, abs=1e-10)

    def test_scheme_length_checked(self):
        with pytest.raises(ValueError, match="D-1"):
            build_feynman(x_circuit(), transfer.pst_couplings(3))

    def test_identity_circuit_returns_input(self):
        circ = identity_like_circuit()
        h = build_feynman(circ, transfer.pst_couplings(2))
        out, _ = run_computation(h, linalg.basis_state(2, 0))
        assert abs(out[0]) == pytest.approx(1.0, abs=1e-8)

    def test_block_structure_tridiagonal_in_clock(self):
        circ = identity_like_circuit()
        h = build_feynman(circ, transfer.pst_couplings(2))
        w = h.work_dim
        blocks = np.abs(h.operator.to_dense()).reshape(3, w, 3, w).sum(
            axis=(1, 3))
        assert blocks[0, 2] == 0 and blocks[2, 0] == 0
        assert blocks[0, 1] > 0 and blocks[1, 2] > 0

    def test_unary_matches_register_on_shared_subspace(self):
        rng = np.random.default_rng(5)
        circ = random_small_circuit(rng)
        scheme = transfer.pst_couplings(circ.depth - 1)
        hr = build_feynman(circ, scheme)
        hu = build_feynman(circ, scheme, encoding="unary")
        state = rng.standard_normal(circ.work_dim) \
            + 1j * rng.standard_normal(circ.work_dim)
        state /= np.linalg.norm(state)
        t = 0.77
        vr = linalg.evolve(hr.operator, hr.initial_state(state), t)
        vu = linalg.evolve(hu.operator, hu.initial_state(state), t)
        for pos in range(circ.depth):
            assert np.linalg.norm(hr.clock_block(vr, pos)
                                  - hu.clock_block(vu, pos)) < 1e-10

    def test_unary_depth_cap(self):
        circ = Circuit((Wire(0, "q0", 2, "data"),),
                       tuple(Gate("X", (0,)) for _ in range(15)))
        with pytest.raises(ValueError, match="unary"):
            build_feynman(circ, transfer.pst_couplings(15),
                          encoding="unary")

    def test_clock_block_norms_sum_to_one(self):
        rng = np.random.default_rng(8)
        circ = random_small_circuit(rng)
        h = build_feynman(circ, transfer.pst_couplings(circ.depth - 1))
        v = h.initial_state(linalg.basis_state(circ.work_dim, 0))
        for t in (0.3, 0.9, 2.2):
            vt = linalg.evolve(h.operator, v, t)
            total = sum(
                float(np.real(np.vdot(h.clock_block(vt, p),
                                      h.clock_block(vt, p))))
                for p in range(h.depth))
            assert total == pytest.approx(1.0, abs=1e-12)


class TestRunComputation:
    def test_x_circuit(self):
        h = build_feynman(x_circuit(), transfer.pst_couplings(1))
        out, report = run_computation(h, linalg.basis_state(2, 0))
        assert abs(out[1]) == pytest.approx(1.0, abs=1e-8)
        assert report.arrival_probability >= 1 - 1e-8

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(6):
            circ = random_small_circuit(rng)
            h = build_feynman(circ, transfer.pst_couplings(circ.depth - 1))
            state = rng.standard_normal(circ.work_dim) \
                + 1j * rng.standard_normal(circ.work_dim)
            state /= np.linalg.norm(state)
            out, report = run_computation(h, state)
            oracle = simulate_dense(circ, state)[-1]
            assert linalg.fidelity(out, oracle) >= 1 - 1e-8
            assert report.arrival_probability >= 1 - 1e-8

    def test_ec_circuit_preserves_codeword(self):
        circ = bitflip_ec_circuit("flawed")
        h = build_feynman(circ, transfer.pst_couplings(circ.depth - 1))
        v = circ.basis_state([0, 0, 0, 0, 0])
        out, _ = run_computation(h, v)
        oracle = simulate_dense(circ, v)[-1]
        assert linalg.fidelity(out, oracle) >= 1 - 1e-8

    def test_non_pst_scheme_reports_shortfall(self):
        circ = identity_like_circuit()
        h = build_feynman(circ, transfer.CouplingScheme((1.0, 0.2)))
        with pytest.raises(ArrivalShortfallError) as err:
            run_computation(h, linalg.basis_state(2, 0))
        assert 0 < err.value.achieved < 1 - 1e-8


class TestHistoryState:
    def test_x_circuit_expansion(self):
        hist = history_state(x_circuit(), linalg.basis_state(2, 0))
        expect = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
        assert np.allclose(hist.state, expect, atol=1e-12)

    def test_block_weight_is_one_over_d(self):
        rng = np.random.default_rng(3)
        circ = random_small_circuit(rng)
        state = rng.standard_normal(circ.work_dim) \
            + 1j * rng.standard_normal(circ.work_dim)
        state /= np.linalg.norm(state)
        hist = history_state(circ, state)
        for t in range(circ.depth):
            block = hist.clock_block(t)
            assert float(np.real(np.vdot(block, block))) == pytest.approx(
                1 / circ.depth, abs=1e-12)

    def test_orthogonal_inputs_give_orthogonal_histories(self):
        circ = random_small_circuit(np.random.default_rng(10))
        h0 = history_state(circ, linalg.basis_state(circ.work_dim, 0))
        h1 = history_state(circ, linalg.basis_state(circ.work_dim, 1))
        assert abs(np.vdot(h0.state, h1.state)) <= 1e-12

    def test_history_overlap_equals_input_overlap(self):
        rng = np.random.default_rng(14)
        circ = random_small_circuit(rng)
        dim = circ.work_dim
        a = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        a /= np.linalg.norm(a)
        b = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        b /= np.linalg.norm(b)
        ha = history_state(circ, a)
        hb = history_state(circ, b)
        assert np.vdot(ha.state, hb.state) == pytest.approx(
            np.vdot(a, b), abs=1e-12)


class TestBuildKitaev:
    def test_annihilates_x_history(self):
        hk = build_kitaev(x_circuit())
        hist = history_state(x_circuit(), linalg.basis_state(2, 0))
        assert np.linalg.norm(hk.matvec(hist.state)) <= 1e-12

    def test_positive_semidefinite(self):
        circ = random_small_circuit(np.random.default_rng(6))
        vals = np.linalg.eigvalsh(build_kitaev(circ).to_dense())
        assert vals[0] >= -1e-12

    def test_ground_space_dim_equals_work_dim(self):
        for seed in (0, 1, 2):
            circ = random_small_circuit(np.random.default_rng(seed))
            hk = build_kitaev(circ)
            vals = np.linalg.eigvalsh(hk.to_dense())
            w = circ.work_dim
            assert np.sum(vals < 1e-10) == w
            assert vals[w] > 1e-6

    def test_history_states_zero_modes_random_inputs(self):
        rng = np.random.default_rng(33)
        for _ in range(5):
            circ = random_small_circuit(rng)
            hk = build_kitaev(circ)
            state = rng.standard_normal(circ.work_dim) \
                + 1j * rng.standard_normal(circ.work_dim)
            state /= np.linalg.norm(state)
            hist = history_state(circ, state)
            assert np.linalg.norm(hk.matvec(hist.state)) <= 1e-10

    def test_boundary_diagonal_weights(self):
        hk = build_kitaev(x_circuit())
        dense = hk.to_dense()
        assert dense[0, 0] == pytest.approx(0.5)
        assert dense[3, 3] == pytest.approx(0.5)


class TestSpectralGap:
    def test_pauli_z(self):
        op = linalg.SparseOperator.from_diagonal([1, -1])
        assert spectral_gap(op, 1) == pytest.approx(2.0, abs=1e-12)

    def test_kitaev_x_circuit_matches_dense(self):
        hk = build_kitaev(x_circuit())
        vals = np.linalg.eigvalsh(hk.to_dense())
        assert spectral_gap(hk, 2) == pytest.approx(
            float(vals[2] - vals[1]), abs=1e-9)

    def test_wrong_expected_degeneracy_reported(self):
        op = linalg.SparseOperator.from_diagonal([0.0, 0.0, 0.0, 1.0])
        with pytest.raises(DegeneracyMismatchError):
            spectral_gap(op, 2)

    def test_overlarge_cluster_reported(self):
        op = linalg.SparseOperator.from_diagonal([0.0, 1.0, 2.0, 3.0])
        with pytest.raises(DegeneracyMismatchError):
            spectral_gap(op, 2, degeneracy_tol=1e-8)
