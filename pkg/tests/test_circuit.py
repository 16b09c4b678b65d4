import numpy as np
import pytest

from clockham import circuit
from clockham.circuit import (Circuit, CircuitError, Gate, ParseError, Wire,
                              bitflip_ec_circuit, cnot, compose_rounds,
                              gate_unitary, insert_error, malignancy_scan,
                              mcx, parse_circuit, promote_to_qutrits,
                              serialize, simulate_dense)

from oracles import embed_controlled, embed_one_site


def two_qubit(*gates):
    wires = (Wire(0, "q0", 2, "data"), Wire(1, "q1", 2, "data"))
    return Circuit(wires, tuple(gates))


class TestParser:
    def test_minimal(self):
        c = parse_circuit("wire q0 qubit data\ngate X q0\n")
        assert len(c.wires) == 1 and len(c.gates) == 1
        assert c.depth == 2

    def test_empty_gate_list(self):
        c = parse_circuit("wire q0 qubit data\n")
        assert c.depth == 1

    def test_comments_and_blanks(self):
        c = parse_circuit("# header\n\nwire q0 qutrit ancilla  # inline\n")
        assert c.wires[0].dim == 3 and c.wires[0].role == "ancilla"

    def test_malformed_control_token(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_circuit("wire q0 qubit data\nwire q1 qubit data\n"
                          "gate X q0 ctrl* q1\n")

    def test_unknown_gate(self):
        with pytest.raises(ParseError, match="unknown gate"):
            parse_circuit("wire q0 qubit data\ngate FROB q0\n")

    def test_unknown_wire(self):
        with pytest.raises(ParseError, match="unknown wire"):
            parse_circuit("wire q0 qubit data\ngate X q9\n")

    def test_duplicate_reset_rejected(self):
        text = ("wire q0 qubit data\nwire a0 qubit ancilla\n"
                "gate CNOT q0 a0\nreset a0 @ 0\nreset a0 @ 1\n")
        with pytest.raises(ParseError, match="non-monotone"):
            parse_circuit(text)

    def test_reset_of_data_rejected(self):
        with pytest.raises(ParseError, match="data wire"):
            parse_circuit("wire q0 qubit data\nreset q0 @ 0\n")

    def test_round_trip_structural(self):
        text = ("wire q0 qubit data\nwire q1 qutrit data\n"
                "wire a0 qubit ancilla\n"
                "gate CNOT q0 a0\ngate X q1 ctrl+ q0 ctrl- a0\n"
                "gate SWAP q0 q1\nreset a0 @ 3\n")
        c = parse_circuit(text)
        assert parse_circuit(serialize(c)) == c

    def test_serializer_byte_stable(self):
        c = bitflip_ec_circuit("flawed")
        once = serialize(c)
        assert serialize(parse_circuit(once)) == once

    def test_ec_circuits_round_trip(self):
        for variant in ("flawed", "safe"):
            c = bitflip_ec_circuit(variant)
            assert parse_circuit(serialize(c)) == c


class TestGates:
    def test_target_control_overlap_rejected(self):
        with pytest.raises(CircuitError, match="disjoint"):
            Gate("X", (0,), ((0, 1),))

    def test_custom_must_be_unitary(self):
        with pytest.raises(CircuitError, match="unitary"):
            Gate("CUSTOM", (0,), matrix=np.array([[1, 1], [0, 1]]))

    def test_all_named_gates_unitary(self):
        dims = (2, 2)
        for kind in ("X", "Y", "Z", "H"):
            _, u = gate_unitary(Gate(kind, (0,)), dims)
            assert np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) <= 1e-12
        _, u = gate_unitary(Gate("SWAP", (0, 1)), dims)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-12

    def test_qutrit_embedding_identity_on_two(self):
        dims = (3,)
        wires, u = gate_unitary(Gate("X", (0,)), dims)
        assert u[2, 2] == 1.0
        assert u[2, 0] == u[2, 1] == 0.0
        assert u[0, 1] == u[1, 0] == 1.0

    def test_control_on_qutrit_fails_for_two(self):
        # |2> satisfies neither polarity, so the controlled gate acts as
        # identity on it
        dims = (3, 2)
        _, u = gate_unitary(Gate("X", (1,), ((0, 1),)), dims)
        block = u[4:6, 4:6]
        assert np.array_equal(block, np.eye(2))


class TestSimulateDense:
    def test_x_snapshots(self):
        c = parse_circuit("wire q0 qubit data\ngate X q0\n")
        snaps = simulate_dense(c, c.basis_state([0]))
        assert np.array_equal(snaps[0], [1, 0])
        assert np.array_equal(snaps[1], [0, 1])

    def test_cnot(self):
        c = two_qubit(cnot(0, 1))
        out = simulate_dense(c, c.basis_state([1, 0]))[-1]
        assert np.argmax(np.abs(out)) == 3

    def test_norm_preserved_every_snapshot(self):
        rng = np.random.default_rng(2)
        c = two_qubit(Gate("H", (0,)), cnot(0, 1), Gate("Y", (1,)),
                      Gate("SWAP", (0, 1)))
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v /= np.linalg.norm(v)
        for snap in simulate_dense(c, v):
            assert abs(np.linalg.norm(snap) - 1) <= 1e-12

    def test_three_gate_matches_matrix_product(self):
        rng = np.random.default_rng(9)
        c = two_qubit(Gate("H", (0,)), cnot(1, 0), Gate("Z", (1,)))
        dims = c.dims
        mats = [
            embed_one_site(circuit.GATE_MATRICES["H"], 0, dims),
            embed_controlled(circuit.GATE_MATRICES["X"], (0,), ((1, 1),),
                             dims),
            embed_one_site(circuit.GATE_MATRICES["Z"], 1, dims),
        ]
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v /= np.linalg.norm(v)
        expect = mats[2] @ mats[1] @ mats[0] @ v
        got = simulate_dense(c, v)[-1]
        assert np.linalg.norm(got - expect) < 1e-12

    def test_dimension_mismatch(self):
        c = two_qubit(cnot(0, 1))
        with pytest.raises(CircuitError, match="dimension"):
            simulate_dense(c, np.ones(3, dtype=complex))

    def test_qutrit_promotion_preserves_qubit_action(self):
        c = two_qubit(Gate("H", (0,)), cnot(0, 1))
        cq = promote_to_qutrits(c)
        v = c.basis_state([0, 0])
        vq = cq.basis_state([0, 0])
        out = simulate_dense(c, v)[-1]
        outq = simulate_dense(cq, vq)[-1]
        # the qubit amplitudes embed at qutrit indices with digits < 2
        embedded = np.zeros(9, dtype=complex)
        for idx in range(4):
            d0, d1 = idx >> 1, idx & 1
            embedded[d0 * 3 + d1] = out[idx]
        assert np.linalg.norm(outq - embedded) < 1e-12


class TestInsertError:
    def test_identity_error_simulates_identically(self):
        c = two_qubit(Gate("H", (0,)), cnot(0, 1))
        v = c.basis_state([0, 0])
        base = simulate_dense(c, v)
        with_err = simulate_dense(insert_error(c, 1, 0, "Z"), v)
        # Z on |+> component changes the state; identity comparison is for
        # an actual identity splice, done via the unmodified circuit
        assert len(base) == len(with_err)
        assert np.array_equal(base[0], with_err[0])

    def test_x_then_x_cancels(self):
        c = parse_circuit("wire q0 qubit data\ngate X q0\n")
        err = insert_error(c, 0, 0, "X")
        out = simulate_dense(err, c.basis_state([0]))[-1]
        assert abs(out[0]) == pytest.approx(1.0, abs=1e-12)

    def test_depth_unchanged(self):
        c = bitflip_ec_circuit("flawed")
        assert insert_error(c, 3, 1, "X").depth == c.depth

    def test_out_of_range(self):
        c = bitflip_ec_circuit("flawed")
        with pytest.raises(CircuitError):
            insert_error(c, c.depth, 0, "X")
        with pytest.raises(CircuitError):
            insert_error(c, 0, 99, "X")

    def test_malignant_location_diverges_in_two_positions(self):
        c = bitflip_ec_circuit("flawed")
        v = c.basis_state([0, 0, 0, 0, 0])
        clean = simulate_dense(c, v)[-1]
        erred = simulate_dense(insert_error(c, 2, 1, "X"), v)[-1]
        b_clean = int(np.argmax(np.abs(clean)))
        b_err = int(np.argmax(np.abs(erred)))
        # compare data digits
        digits = lambda b: [(b >> (4 - i)) & 1 for i in range(3)]
        diff = sum(x != y for x, y in zip(digits(b_clean), digits(b_err)))
        assert diff >= 2


class TestBitflipCircuits:
    @pytest.mark.parametrize("variant", ["flawed", "safe"])
    def test_no_error_is_identity_on_codewords(self, variant):
        c = bitflip_ec_circuit(variant)
        n_anc = len(c.ancilla_wires)
        for logical in (0, 1):
            v = c.basis_state([logical] * 3 + [0] * n_anc)
            out = simulate_dense(c, v)[-1]
            assert abs(np.vdot(v, out)) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("variant", ["flawed", "safe"])
    def test_every_single_data_x_corrected(self, variant):
        c = bitflip_ec_circuit(variant)
        n_anc = len(c.ancilla_wires)
        for logical in (0, 1):
            for q in range(3):
                v = c.basis_state([logical] * 3 + [0] * n_anc)
                out = simulate_dense(insert_error(c, 0, q, "X"), v)[-1]
                idx = int(np.argmax(np.abs(out)))
                width = 3 + n_anc
                data = [(idx >> (width - 1 - i)) & 1 for i in range(3)]
                assert data == [logical] * 3
                assert abs(out[idx]) == pytest.approx(1.0, abs=1e-12)

    def test_flawed_has_exactly_the_split_read_location(self):
        rep = malignancy_scan(bitflip_ec_circuit("flawed"), rounds=2)
        assert rep.malignant_locations == [(2, 1)]

    def test_flawed_malignant_stable_across_rounds(self):
        for rounds in (2, 3, 4):
            rep = malignancy_scan(bitflip_ec_circuit("flawed"),
                                  rounds=rounds)
            assert rep.malignant_locations == [(2, 1)]

    def test_safe_has_zero_malignant_locations(self):
        for rounds in (2, 3):
            rep = malignancy_scan(bitflip_ec_circuit("safe"), rounds=rounds)
            assert rep.malignant_locations == []

    def test_ancilla_after_final_use_is_benign(self):
        c = bitflip_ec_circuit("flawed")
        rep = malignancy_scan(c, rounds=2)
        last_step = c.depth - 1
        for anc in c.ancilla_wires:
            assert rep.classification[(last_step, anc)] == "benign"

    def test_malignant_location_flips_logical(self):
        c = bitflip_ec_circuit("flawed")
        two = compose_rounds(c, 2)
        v = two.basis_state([1, 1, 1] + [0] * 4)
        out = simulate_dense(insert_error(two, 2, 1, "X"), v)[-1]
        idx = int(np.argmax(np.abs(out)))
        data = [(idx >> (6 - i)) & 1 for i in range(3)]
        assert data == [0, 0, 0]

    def test_non_codeword_round_rejected(self):
        # a "round" that majority-flips the block outright
        bad = Circuit((Wire(0, "d0", 2, "data"), Wire(1, "d1", 2, "data"),
                       Wire(2, "d2", 2, "data")),
                      (Gate("X", (0,)), Gate("X", (1,))))
        with pytest.raises(CircuitError, match="codeword"):
            malignancy_scan(bad, rounds=2)


class TestComposeRounds:
    def test_fresh_ancillas_and_resets(self):
        c = bitflip_ec_circuit("flawed")
        two = compose_rounds(c, 2)
        assert len(two.wires) == 3 + 2 * 2
        assert two.depth == 2 * len(c.gates) + 1
        assert two.reset_by(len(c.gates)) == frozenset({3, 4})
        assert two.reset_by(two.depth - 1) == frozenset({3, 4, 5, 6})

    def test_single_round_is_same_depth(self):
        c = bitflip_ec_circuit("safe")
        assert compose_rounds(c, 1).depth == c.depth
