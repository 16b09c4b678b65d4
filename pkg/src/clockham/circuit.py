"""Circuit IR, text format, dense simulator and bit-flip EC circuits.

Wires are qubits or qutrits. Qubit gates on qutrit wires act on the
{|0>,|1>} subspace and as identity on |2>; a control is satisfied only when
the wire holds exactly the polarity value, so |2> fails both polarities.

Basis convention: wire 0 is the most significant digit, i.e. the basis index
of |d0 d1 ... dn> is d0*D1*...*Dn + d1*D2*...*Dn + ... + dn.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import SparseOperator

GATE_MATRICES = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "SWAP": np.array([[1, 0, 0, 0],
                      [0, 0, 1, 0],
                      [0, 1, 0, 0],
                      [0, 0, 0, 1]], dtype=complex),
    # |0> <-> |2| exchange on a qutrit; identity on |1>.
    "LEAK": np.array([[0, 0, 1], [0, 1, 0], [1, 0, 0]], dtype=complex),
}
SINGLE_TARGET_KINDS = ("X", "Y", "Z", "H", "LEAK")


class CircuitError(ValueError):
    pass


class ParseError(CircuitError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class Wire:
    index: int
    name: str
    dim: int            # 2 (qubit) or 3 (qutrit)
    role: str           # 'data' | 'ancilla'

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise CircuitError(f"wire dim must be 2 or 3, got {self.dim}")
        if self.role not in ("data", "ancilla"):
            raise CircuitError(f"wire role must be data|ancilla, got "
                               f"{self.role!r}")


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple            # wire indices
    controls: tuple = ()      # ((wire, polarity), ...), polarity in {0, 1}
    matrix: np.ndarray = None  # CUSTOM only: unitary on the targets' qubit space

    def __post_init__(self):
        tset, cset = set(self.targets), {w for w, _ in self.controls}
        if tset & cset:
            raise CircuitError("target and control wires must be disjoint")
        if len(tset) != len(self.targets):
            raise CircuitError("duplicate target wire")
        for _, pol in self.controls:
            if pol not in (0, 1):
                raise CircuitError(f"control polarity must be 0 or 1, "
                                   f"got {pol}")
        if self.kind == "CUSTOM":
            if self.matrix is None:
                raise CircuitError("CUSTOM gate requires a matrix")
            m = np.asarray(self.matrix)
            d = 2 ** len(self.targets)
            if m.shape != (d, d):
                raise CircuitError(f"CUSTOM matrix must be {d}x{d} for "
                                   f"{len(self.targets)} targets")
            if np.max(np.abs(m.conj().T @ m - np.eye(d))) > 1e-12:
                raise CircuitError("CUSTOM matrix is not unitary")
        elif self.kind in SINGLE_TARGET_KINDS:
            if len(self.targets) != 1:
                raise CircuitError(f"{self.kind} takes one target")
        elif self.kind == "SWAP":
            if len(self.targets) != 2:
                raise CircuitError("SWAP takes two targets")
        else:
            raise CircuitError(f"unknown gate kind {self.kind!r}")

    def base_matrix(self):
        if self.kind == "CUSTOM":
            return np.asarray(self.matrix, dtype=complex)
        return GATE_MATRICES[self.kind]

    def base_dims(self):
        """Single-wire dims the base matrix is defined over."""
        if self.kind == "LEAK":
            return (3,) * len(self.targets)
        return (2,) * len(self.targets)


def cnot(control, target):
    """CNOT sugar: X on `target` controlled (on |1>) by `control`."""
    return Gate("X", (target,), ((control, 1),))


def mcx(target, *controls):
    """Multi-controlled X; controls are (wire, polarity) pairs."""
    return Gate("X", (target,), tuple(controls))


@dataclass(frozen=True)
class Circuit:
    wires: tuple
    gates: tuple
    resets: tuple = ()        # ((wire, step), ...): wire is reset by `step`
    injected: tuple = ()      # ((step, wire, kind), ...): spliced errors

    def __post_init__(self):
        names = set()
        for i, w in enumerate(self.wires):
            if w.index != i:
                raise CircuitError("wire indices must be contiguous from 0")
            if w.name in names:
                raise CircuitError(f"duplicate wire name {w.name!r}")
            names.add(w.name)
        for g in self.gates:
            for w in g.targets + tuple(c for c, _ in g.controls):
                if not 0 <= w < len(self.wires):
                    raise CircuitError(f"gate wire {w} out of range")
        seen = set()
        for wire, step in self.resets:
            if not 0 <= wire < len(self.wires):
                raise CircuitError(f"reset wire {wire} out of range")
            if self.wires[wire].role != "ancilla":
                raise CircuitError(f"cannot reset data wire "
                                   f"{self.wires[wire].name!r}")
            if wire in seen:
                raise CircuitError(f"non-monotone reset: wire "
                                   f"{self.wires[wire].name!r} reset twice")
            seen.add(wire)
            if not 0 <= step <= len(self.gates):
                raise CircuitError(f"reset step {step} out of range")
        for step, wire, kind in self.injected:
            if not 0 <= step < self.depth:
                raise CircuitError(f"injected error step {step} out of range")
            if not 0 <= wire < len(self.wires):
                raise CircuitError(f"injected error wire {wire} out of range")

    @property
    def depth(self):
        """Total step count D: one snapshot per gate plus the input."""
        return len(self.gates) + 1

    @property
    def dims(self):
        return tuple(w.dim for w in self.wires)

    @property
    def work_dim(self):
        return int(np.prod(self.dims))

    @property
    def data_wires(self):
        return tuple(w.index for w in self.wires if w.role == "data")

    @property
    def ancilla_wires(self):
        return tuple(w.index for w in self.wires if w.role == "ancilla")

    def reset_by(self, step):
        """Set of wires marked reset at snapshot `step` (cumulative)."""
        return frozenset(w for w, s in self.resets if s <= step)

    def basis_state(self, digits):
        if len(digits) != len(self.wires):
            raise CircuitError("digit count does not match wire count")
        index = 0
        for w, d in zip(self.wires, digits):
            if not 0 <= d < w.dim:
                raise CircuitError(f"digit {d} out of range for wire "
                                   f"{w.name!r}")
            index = index * w.dim + d
        v = np.zeros(self.work_dim, dtype=complex)
        v[index] = 1.0
        return v


def _embed_base(gate, wire_dims):
    """Gate base matrix embedded to the targets' actual wire dims.

    Qubit gates on qutrit wires act on the {|0>,|1>} block and as identity
    on any component with a |2>; LEAK is native qutrit.
    """
    base = gate.base_matrix()
    tdims = tuple(wire_dims[t] for t in gate.targets)
    bdims = gate.base_dims()
    if gate.kind == "LEAK":
        if tdims != (3,):
            raise CircuitError("LEAK requires a qutrit wire")
        return base
    if tdims == bdims:
        return base
    full = np.eye(int(np.prod(tdims)), dtype=complex)
    # rows/cols of the embedded block: indices whose digits are all < 2
    block = []
    for idx in range(full.shape[0]):
        rem, digits = idx, []
        for d in reversed(tdims):
            digits.append(rem % d)
            rem //= d
        if all(dg < 2 for dg in digits):
            block.append(idx)
    block = np.array(block)
    full[np.ix_(block, block)] = base
    return full


def gate_unitary(gate, wire_dims):
    """Full controlled unitary on the gate's (controls + targets) wires.

    Returns (wires_tuple, matrix) where matrix acts on the tensor product of
    those wires in the returned order (controls first, then targets).
    """
    ctrl_wires = tuple(w for w, _ in gate.controls)
    pols = tuple(p for _, p in gate.controls)
    wires = ctrl_wires + gate.targets
    cdims = tuple(wire_dims[w] for w in ctrl_wires)
    base = _embed_base(gate, wire_dims)
    tdim = base.shape[0]
    cdim = int(np.prod(cdims)) if cdims else 1
    full = np.eye(cdim * tdim, dtype=complex)
    for cidx in range(cdim):
        rem, digits = cidx, []
        for d in reversed(cdims):
            digits.append(rem % d)
            rem //= d
        digits.reverse()
        if all(dg == p for dg, p in zip(digits, pols)):
            sl = slice(cidx * tdim, (cidx + 1) * tdim)
            full[sl, sl] = base
    return wires, full


def apply_unitary(state, matrix, wires, dims):
    """Apply `matrix` (over `wires`, in order) to a dense state vector."""
    tensor = state.reshape(dims)
    moved = np.moveaxis(tensor, wires, range(len(wires)))
    head = moved.shape[:len(wires)]
    flat = moved.reshape(int(np.prod(head)), -1)
    flat = matrix @ flat
    moved = flat.reshape(head + moved.shape[len(wires):])
    tensor = np.moveaxis(moved, range(len(wires)), wires)
    return tensor.reshape(-1)


def apply_gate(state, gate, dims):
    wires, matrix = gate_unitary(gate, dims)
    return apply_unitary(state, matrix, wires, dims)


def simulate_dense(circ, input_state):
    """All D snapshots of the dense evolution; snapshot 0 is the input.

    Injected errors attached to step t are applied after gate t, so snapshot
    t already reflects them.
    """
    state = np.asarray(input_state, dtype=complex)
    if state.shape != (circ.work_dim,):
        raise CircuitError(f"input dimension {state.shape} does not match "
                           f"wire dims (expect {circ.work_dim})")
    dims = circ.dims
    by_step = {}
    for step, wire, kind in circ.injected:
        by_step.setdefault(step, []).append(Gate(kind, (wire,)))
    snapshots = []
    for g in by_step.get(0, ()):
        state = apply_gate(state, g, dims)
    snapshots.append(state)
    for t, gate in enumerate(circ.gates, start=1):
        state = apply_gate(state, gate, dims)
        for g in by_step.get(t, ()):
            state = apply_gate(state, g, dims)
        snapshots.append(state)
    return snapshots


def circuit_unitary(circ):
    """Dense unitary of the whole circuit (desk-scale sizes only)."""
    dim = circ.work_dim
    u = np.eye(dim, dtype=complex)
    dims = circ.dims
    for gate in circ.gates:
        wires, matrix = gate_unitary(gate, dims)
        u = np.column_stack([
            apply_unitary(u[:, j], matrix, wires, dims) for j in range(dim)])
    return u


def gate_full_sparse(gate, dims):
    """SparseOperator of one gate on the full wire space (non-Hermitian)."""
    wires, matrix = gate_unitary(gate, dims)
    dim = int(np.prod(dims))
    # permutation-ish structure: apply to each basis column of the sub-block
    # via dense embedding at desk scale
    entries_r, entries_c, entries_a = [], [], []
    sub_dims = tuple(dims[w] for w in wires)
    sub_dim = int(np.prod(sub_dims))
    rest_wires = [w for w in range(len(dims)) if w not in wires]
    rest_dims = tuple(dims[w] for w in rest_wires)
    rest_dim = int(np.prod(rest_dims)) if rest_dims else 1
    strides = np.ones(len(dims), dtype=np.int64)
    for i in range(len(dims) - 2, -1, -1):
        strides[i] = strides[i + 1] * dims[i + 1]

    def offset(wire_list, digits):
        return int(sum(strides[w] * d for w, d in zip(wire_list, digits)))

    sub_digits = [np.unravel_index(i, sub_dims) if sub_dims else ()
                  for i in range(sub_dim)]
    rest_digits = [np.unravel_index(i, rest_dims) if rest_dims else ()
                   for i in range(rest_dim)]
    nz = np.nonzero(matrix)
    for r, c in zip(*nz):
        a = matrix[r, c]
        off_r = offset(wires, sub_digits[r])
        off_c = offset(wires, sub_digits[c])
        for rd in rest_digits:
            base = offset(rest_wires, rd)
            entries_r.append(base + off_r)
            entries_c.append(base + off_c)
            entries_a.append(a)
    return SparseOperator(dim, (np.array(entries_r), np.array(entries_c),
                                np.array(entries_a, dtype=complex)),
                          hermitian=False)


# ---------------------------------------------------------------------------
# text format


def serialize(circ):
    """Emit the line format; byte-stable for a given circuit."""
    if circ.injected:
        raise CircuitError("circuits with injected errors are not "
                           "serializable")
    lines = []
    for w in circ.wires:
        kind = "qubit" if w.dim == 2 else "qutrit"
        lines.append(f"wire {w.name} {kind} {w.role}")
    for g in circ.gates:
        if g.kind == "CUSTOM":
            raise CircuitError("CUSTOM gates are not serializable")
        parts = ["gate", g.kind]
        parts += [circ.wires[t].name for t in g.targets]
        for wirex, pol in g.controls:
            parts.append("ctrl+" if pol == 1 else "ctrl-")
            parts.append(circ.wires[wirex].name)
        lines.append(" ".join(parts))
    for wirex, step in sorted(circ.resets):
        lines.append(f"reset {circ.wires[wirex].name} @ {step}")
    return "\n".join(lines) + "\n"


def parse_circuit(text):
    wires, gates, resets = [], [], []
    by_name = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head == "wire":
            if len(tokens) != 4:
                raise ParseError("wire takes: name qubit|qutrit "
                                 "data|ancilla", line_no)
            name, kind, role = tokens[1:]
            if kind not in ("qubit", "qutrit"):
                raise ParseError(f"unknown wire kind {kind!r}", line_no)
            if role not in ("data", "ancilla"):
                raise ParseError(f"unknown wire role {role!r}", line_no)
            if name in by_name:
                raise ParseError(f"duplicate wire {name!r}", line_no)
            w = Wire(len(wires), name, 2 if kind == "qubit" else 3, role)
            by_name[name] = w.index
            wires.append(w)
        elif head == "gate":
            if len(tokens) < 3:
                raise ParseError("gate takes a kind and operands", line_no)
            kind = tokens[1].upper()
            rest = tokens[2:]
            operands, controls = [], []
            i = 0
            while i < len(rest):
                tok = rest[i]
                if tok in ("ctrl+", "ctrl-"):
                    if i + 1 >= len(rest):
                        raise ParseError(f"dangling control token "
                                         f"{tok!r}", line_no)
                    cname = rest[i + 1]
                    if cname not in by_name:
                        raise ParseError(f"unknown wire {cname!r}", line_no)
                    controls.append((by_name[cname], 1 if tok == "ctrl+"
                                     else 0))
                    i += 2
                elif tok.startswith("ctrl"):
                    raise ParseError(f"malformed control token {tok!r}",
                                     line_no)
                else:
                    if tok not in by_name:
                        raise ParseError(f"unknown wire {tok!r}", line_no)
                    operands.append(by_name[tok])
                    i += 1
            try:
                if kind == "CNOT":
                    if len(operands) != 2 or controls:
                        raise ParseError("CNOT takes control then target",
                                         line_no)
                    gates.append(cnot(operands[0], operands[1]))
                elif kind in SINGLE_TARGET_KINDS or kind == "SWAP":
                    gates.append(Gate(kind, tuple(operands),
                                      tuple(controls)))
                else:
                    raise ParseError(f"unknown gate {tokens[1]!r}", line_no)
            except CircuitError as exc:
                raise ParseError(str(exc), line_no) from exc
        elif head == "reset":
            if len(tokens) != 4 or tokens[2] != "@":
                raise ParseError("reset takes: wire @ step", line_no)
            name = tokens[1]
            if name not in by_name:
                raise ParseError(f"unknown wire {name!r}", line_no)
            try:
                step = int(tokens[3])
            except ValueError:
                raise ParseError(f"bad step {tokens[3]!r}", line_no) from None
            resets.append((by_name[name], step))
        else:
            raise ParseError(f"unknown directive {head!r}", line_no)
    try:
        return Circuit(tuple(wires), tuple(gates), tuple(resets))
    except CircuitError as exc:
        raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# circuit surgery


def insert_error(circ, step, wire, kind="X"):
    """Splice a single-site unitary at snapshot `step` on `wire`.

    The error is attached to the snapshot rather than counted as a step, so
    D and all snapshot indices are unchanged.
    """
    if not 0 <= step < circ.depth:
        raise CircuitError(f"error step {step} out of range [0, "
                           f"{circ.depth - 1}]")
    if not 0 <= wire < len(circ.wires):
        raise CircuitError(f"error wire {wire} out of range")
    if kind == "LEAK" and circ.wires[wire].dim != 3:
        raise CircuitError("LEAK errors require a qutrit wire")
    return replace(circ, injected=circ.injected + ((step, wire, kind),))


def promote_to_qutrits(circ):
    """Same circuit with every wire widened to a qutrit."""
    wires = tuple(replace(w, dim=3) for w in circ.wires)
    return replace(circ, wires=wires)


def compose_rounds(circ, rounds):
    """Repeat `circ` with fresh ancillas per round.

    Data wires are shared; round r's ancillas are marked reset at the step
    where round r ends. This is the Hamiltonian-model stand-in for ancilla
    reset: a finite supply of ancillas, present from the outset, each used
    in a single round.
    """
    if rounds < 1:
        raise CircuitError("rounds must be >= 1")
    if circ.injected:
        raise CircuitError("compose_rounds on an error-injected circuit")
    data = [w for w in circ.wires if w.role == "data"]
    ancillas = [w for w in circ.wires if w.role == "ancilla"]
    wires = [Wire(i, w.name, w.dim, "data") for i, w in enumerate(data)]
    wire_map_per_round = []
    for r in range(rounds):
        mapping = {w.index: i for i, w in enumerate(data)}
        for a in ancillas:
            idx = len(wires)
            suffix = f"_r{r + 1}" if rounds > 1 else ""
            wires.append(Wire(idx, a.name + suffix, a.dim, "ancilla"))
            mapping[a.index] = idx
        wire_map_per_round.append(mapping)
    gates, resets = [], []
    per_round = len(circ.gates)
    for r in range(rounds):
        mapping = wire_map_per_round[r]
        for g in circ.gates:
            gates.append(Gate(
                g.kind,
                tuple(mapping[t] for t in g.targets),
                tuple((mapping[c], p) for c, p in g.controls),
                g.matrix))
        end_step = per_round * (r + 1)
        for a in ancillas:
            resets.append((mapping[a.index], end_step))
    return Circuit(tuple(wires), tuple(gates), tuple(resets))


# ---------------------------------------------------------------------------
# bit-flip error correction (distance 3)
#
# Syndrome map shared by both variants: ancilla pattern 11 -> flip middle
# qubit, 10 -> flip first, 01 -> flip third.


def bitflip_ec_circuit(variant):
    """Coherent-feedback EC round for the 3-qubit bit-flip code.

    flawed: single-pass extraction of the (d0,d1) and (d1,d2) parities.
    The shared qubit d1 is read twice; an X between its two reads produces
    the stale syndrome 01, the correction adds a second data error, and the
    next round completes a logical flip. malignancy_scan certifies exactly
    this location.

    safe: the syndrome is extracted twice into fresh ancilla pairs and
    corrections fire only when both copies agree, so any single fault either
    leaves a correctable data error or suppresses the correction round.
    malignancy_scan certifies zero malignant locations.
    """
    if variant not in ("flawed", "safe"):
        raise CircuitError(f"variant must be flawed|safe, got {variant!r}")
    data = [Wire(0, "d0", 2, "data"), Wire(1, "d1", 2, "data"),
            Wire(2, "d2", 2, "data")]
    if variant == "flawed":
        wires = data + [Wire(3, "a0", 2, "ancilla"),
                        Wire(4, "a1", 2, "ancilla")]
        gates = (
            cnot(0, 3), cnot(1, 3),
            cnot(1, 4), cnot(2, 4),
            mcx(0, (3, 1), (4, 0)),
            mcx(1, (3, 1), (4, 1)),
            mcx(2, (3, 0), (4, 1)),
        )
        resets = ((3, len(gates)), (4, len(gates)))
    else:
        wires = data + [Wire(3, "a0", 2, "ancilla"),
                        Wire(4, "a1", 2, "ancilla"),
                        Wire(5, "b0", 2, "ancilla"),
                        Wire(6, "b1", 2, "ancilla")]
        gates = (
            cnot(0, 3), cnot(1, 3), cnot(1, 4), cnot(2, 4),
            cnot(0, 5), cnot(1, 5), cnot(1, 6), cnot(2, 6),
            mcx(0, (3, 1), (4, 0), (5, 1), (6, 0)),
            mcx(1, (3, 1), (4, 1), (5, 1), (6, 1)),
            mcx(2, (3, 0), (4, 1), (5, 0), (6, 1)),
        )
        resets = tuple((a, len(gates)) for a in (3, 4, 5, 6))
    return Circuit(tuple(wires), gates, resets)


# ---------------------------------------------------------------------------
# malignancy scan (classical basis-state propagation)

_CLASSICAL_FLIP = {"X": True, "Y": True, "Z": False}


def _classical_round(circ, bits, error=None):
    bits = list(bits)

    def flip(wire, kind):
        if kind not in _CLASSICAL_FLIP:
            raise CircuitError(f"gate kind {kind!r} is not basis-preserving")
        if _CLASSICAL_FLIP[kind]:
            bits[wire] ^= 1

    if error is not None and error[0] == 0:
        flip(error[1], "X")
    for t, g in enumerate(circ.gates, start=1):
        if g.kind in ("X", "Y", "Z"):
            if all(bits[c] == p for c, p in g.controls):
                flip(g.targets[0], g.kind)
        elif g.kind == "SWAP":
            if all(bits[c] == p for c, p in g.controls):
                a, b = g.targets
                bits[a], bits[b] = bits[b], bits[a]
        else:
            raise CircuitError(f"gate kind {g.kind!r} is not supported by "
                               f"the classical scan")
        if error is not None and error[0] == t:
            flip(error[1], "X")
    return bits


def _decode_majority(bits, data_wires):
    ones = sum(bits[w] for w in data_wires)
    return 1 if 2 * ones > len(data_wires) else 0


@dataclass
class MalignancyReport:
    depth: int
    classification: dict       # (step, wire) -> 'malignant' | 'benign'

    @property
    def malignant_locations(self):
        return sorted(loc for loc, v in self.classification.items()
                      if v == "malignant")


def malignancy_scan(circ, rounds=2):
    """Classify every single-X location of an EC circuit.

    A location is malignant when, after `rounds` applications of the circuit
    (ancillas reset between rounds) with the X inserted in the first round,
    the data block majority-decodes to the wrong logical state for either
    codeword input.
    """
    if rounds < 2:
        raise CircuitError("rounds must be >= 2")
    data_wires = circ.data_wires
    anc_wires = circ.ancilla_wires
    n = len(circ.wires)
    for logical in (0, 1):
        bits = [logical if w in data_wires else 0 for w in range(n)]
        out = _classical_round(circ, bits)
        if _decode_majority(out, data_wires) != logical:
            raise CircuitError("non-codeword behavior: clean round does not "
                               "preserve the codeword")
    classification = {}
    for step in range(circ.depth):
        for wire in range(n):
            malignant = False
            for logical in (0, 1):
                bits = [logical if w in data_wires else 0 for w in range(n)]
                bits = _classical_round(circ, bits, error=(step, wire))
                for a in anc_wires:
                    bits[a] = 0
                for _ in range(rounds - 1):
                    bits = _classical_round(circ, bits)
                    for a in anc_wires:
                        bits[a] = 0
                if _decode_majority(bits, data_wires) != logical:
                    malignant = True
            classification[(step, wire)] = ("malignant" if malignant
                                            else "benign")
    return MalignancyReport(depth=circ.depth, classification=classification)
