"""Topological-condition experiments on logical history states.

The degenerate eigenstates built from the two codeword inputs are compared
under single-site errors. The unrevised check is the plain matrix element
between the two history states; the revised check discards (partial-traces)
every ancilla marked reset by each step before taking the state-overlap
fidelity, then averages with weight 1/D. The revised form reduces to the
magnitude of the unrevised per-step inner product when nothing has been
reset and the states are pure.

Also here: the Ising |22><22| penalty for the qutrit lattice, energy
penalties on decoded ancilla flags for the propagation-form operator, the
classical error-counting model for concatenated penalties, and the
survival-time formula.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh as dense_eigh
from scipy.linalg import svdvals

from . import clock, linalg
from .circuit import (Gate, apply_gate, insert_error, malignancy_scan,
                      promote_to_qutrits, simulate_dense)
from .linalg import SparseOperator


class FaultError(ValueError):
    pass


# ---------------------------------------------------------------------------
# reduced-state overlap machinery


def reduced_root_fidelity(a, b, dims, discard):
    """F(rho_a, rho_b) = ||sqrt(rho_a) sqrt(rho_b)||_tr after discarding
    the given wires; equals |<a|b>| for pure states (nothing discarded).

    For pure joint states the reduced-state fidelity is the nuclear norm of
    the cross overlap matrix, computed on whichever side (kept or discarded)
    is smaller, so no large density matrix is ever formed.
    """
    discard = sorted(set(discard))
    a = np.asarray(a)
    b = np.asarray(b)
    if not discard:
        return float(abs(np.vdot(a, b)))
    n = len(dims)
    keep = [w for w in range(n) if w not in discard]
    kept_dim = int(np.prod([dims[w] for w in keep])) if keep else 1
    disc_dim = int(np.prod([dims[w] for w in discard]))

    def as_matrix(v):
        t = np.moveaxis(v.reshape(dims), keep + discard, range(n))
        return t.reshape(kept_dim, disc_dim)

    ma, mb = as_matrix(a), as_matrix(b)
    if disc_dim <= kept_dim:
        g = ma.conj().T @ mb
        if not np.any(g):
            return 0.0
        return float(np.sum(svdvals(g)))
    rho_a = ma @ ma.conj().T
    rho_b = mb @ mb.conj().T
    w, u = dense_eigh(rho_a)
    w = np.clip(w, 0.0, None)
    sq = (u * np.sqrt(w)) @ u.conj().T
    m = sq @ rho_b @ sq
    ev = np.clip(np.linalg.eigvalsh(m), 0.0, None)
    return float(np.sum(np.sqrt(ev)))


# ---------------------------------------------------------------------------
# logical pairs


@dataclass
class LogicalPair:
    circuit: object
    input0: np.ndarray
    input1: np.ndarray
    history0: clock.HistoryState
    history1: clock.HistoryState
    snapshots0: list
    snapshots1: list

    @property
    def depth(self):
        return self.circuit.depth


def codeword_input(circ, logical):
    digits = []
    for w in circ.wires:
        if w.role == "data":
            digits.append(1 if logical else 0)
        else:
            digits.append(0)
    return circ.basis_state(digits)


def make_logical_pair(circ, qutrit=False):
    """History-state pair for the two encoded codeword inputs."""
    if qutrit:
        circ = promote_to_qutrits(circ)
    input0 = codeword_input(circ, 0)
    input1 = codeword_input(circ, 1)
    h0 = clock.history_state(circ, input0, input_label="0_L")
    h1 = clock.history_state(circ, input1, input_label="1_L")
    if abs(np.vdot(input0, input1)) > 1e-12:
        raise FaultError("codeword inputs are not orthogonal")
    return LogicalPair(circuit=circ, input0=input0, input1=input1,
                       history0=h0, history1=h1,
                       snapshots0=simulate_dense(circ, input0),
                       snapshots1=simulate_dense(circ, input1))


def direct_overlap(pair, operator, wire):
    """Unrevised matrix element <history0| V_wire |history1> (complex)."""
    circ = pair.circuit
    if not 0 <= wire < len(circ.wires):
        raise FaultError(f"wire {wire} out of range")
    gate = Gate(operator, (wire,)) if operator != "I" else None
    total = 0.0 + 0.0j
    for s0, s1 in zip(pair.snapshots0, pair.snapshots1):
        v = s1 if gate is None else apply_gate(s1, gate, circ.dims)
        total += np.vdot(s0, v)
    return total / pair.depth


def revised_overlap(pair, step, wire, operator="X"):
    """Ancilla-traced topological condition for one error location.

    The erroneous branch is the forward simulation of the error-inserted
    circuit on input1 (its snapshots coincide with the clean ones before the
    error step); each step contributes the reduced-state fidelity against
    the clean input0 branch after discarding every wire marked reset by that
    step, and the result is the 1/D-weighted sum.
    """
    circ = pair.circuit
    depth = pair.depth
    if operator == "I":
        erroneous = pair.snapshots1
    else:
        erroneous = simulate_dense(insert_error(circ, step, wire, operator),
                                   pair.input1)
    dims = circ.dims
    total = 0.0
    for t in range(depth):
        total += reduced_root_fidelity(pair.snapshots0[t], erroneous[t],
                                       dims, circ.reset_by(t))
    return total / depth


# ---------------------------------------------------------------------------
# exhaustive location scan


@dataclass
class OverlapRow:
    step: int
    wire: int
    operator: str
    overlap: float
    bound: float
    malignant: bool


@dataclass
class OverlapReport:
    depth: int
    variant: str
    rows: list

    @property
    def max_overlap(self):
        return max((r.overlap for r in self.rows), default=0.0)

    @property
    def malignant_overlaps(self):
        return [r.overlap for r in self.rows if r.malignant]

    def summary(self):
        return {"max_overlap": self.max_overlap, "D": self.depth,
                "variant": self.variant}

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["step", "wire", "operator", "overlap",
                         "bound_1_over_D", "malignant_flag"])
        for r in self.rows:
            writer.writerow([r.step, r.wire, r.operator,
                             f"{r.overlap:.17g}", f"{r.bound:.17g}",
                             int(r.malignant)])
        return buf.getvalue()


def _scan_one_kind(pair, operator, flags):
    circ = pair.circuit
    depth = pair.depth
    dims = circ.dims
    bound = 1.0 / depth
    # per-step fidelity of the clean pair: reused for every step before the
    # error location (the erroneous branch coincides with the clean one
    # there)
    clean_f = [reduced_root_fidelity(pair.snapshots0[t], pair.snapshots1[t],
                                     dims, circ.reset_by(t))
               for t in range(depth)]
    prefix = np.concatenate([[0.0], np.cumsum(clean_f)])
    rows = []
    for step in range(depth):
        for wire in range(len(circ.wires)):
            if operator == "LEAK" and circ.wires[wire].dim != 3:
                raise FaultError("leakage scan requires a qutrit circuit")
            erroneous = simulate_dense(
                insert_error(circ, step, wire, operator), pair.input1)
            total = prefix[step]
            for t in range(step, depth):
                total += reduced_root_fidelity(
                    pair.snapshots0[t], erroneous[t], dims, circ.reset_by(t))
            rows.append(OverlapRow(
                step=step, wire=wire, operator=operator,
                overlap=total / depth, bound=bound,
                malignant=flags.get((step, wire), False)
                if operator == "X" else False))
    return rows


def overlap_scan(circ, *, variant="", operators=("X",), rounds=None,
                 scan_rounds=2, location_cap=4096):
    """Revised overlap over every single-site error location of `circ`.

    `circ` is scanned as given (compose rounds beforehand for multi-round
    experiments). Leakage locations run on the qutrit promotion of the
    circuit. Rows are ordered by (operator, step, wire); single-X locations
    carry the malignancy classification of the scanned circuit.
    """
    if circ.depth * len(circ.wires) > location_cap:
        raise FaultError(f"location count {circ.depth * len(circ.wires)} "
                         f"exceeds cap {location_cap}")
    flags = {loc: True for loc in
             malignancy_scan(circ, rounds=scan_rounds).malignant_locations}
    rows = []
    pair_qubit = make_logical_pair(circ)
    pair_qutrit = None
    for op in operators:
        if op == "LEAK":
            if pair_qutrit is None:
                pair_qutrit = make_logical_pair(circ, qutrit=True)
            rows += _scan_one_kind(pair_qutrit, op, flags)
        else:
            rows += _scan_one_kind(pair_qubit, op, flags)
    return OverlapReport(depth=circ.depth, variant=variant, rows=rows)


# ---------------------------------------------------------------------------
# Ising protection of the qutrit background


def lattice_edges(rows, cols):
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append(((r, c), (r, c + 1)))
            if r + 1 < rows:
                edges.append(((r, c), (r + 1, c)))
    return edges


def ising_energy(occupied, rows, cols):
    """Energy of an occupancy pattern under edge_count - sum |22><22|.

    The all-|2> configuration has energy 0; any island of non-|2> sites
    pays one unit per edge it touches (boundary edges plus its internal
    edges).
    """
    occupied = set(occupied)
    energy = 0
    for (a, b) in lattice_edges(rows, cols):
        if a in occupied or b in occupied:
            energy += 1
    return energy


def add_ising_penalty(op, basis):
    """op + the Ising penalty, diagonal on an orbit basis.

    Every orbit configuration has a definite |2> pattern, so the penalty
    sum of nearest-neighbor |22| projectors (offset so all-|2> sits at 0)
    is diagonal with the configuration's ising_energy on each block.
    """
    w = basis.work_dim
    if op.dim != basis.size * w:
        raise FaultError("operator does not live on the orbit basis")
    diag = np.empty(op.dim, dtype=complex)
    for i, pat in enumerate(basis.patterns):
        diag[i * w:(i + 1) * w] = ising_energy(pat, basis.rows, basis.cols)
    return op + SparseOperator.from_diagonal(diag)


# ---------------------------------------------------------------------------
# energy penalties on decoded flags


@dataclass
class PenaltySpec:
    base_strength: float = 1.0       # J
    mode: str = "equal"              # 'equal' | 'scaled'
    distance: int = 3                # code distance d; scaled uses (d+1)^m
    flag_levels: dict = field(default_factory=dict)   # wire -> level m

    def strength_for(self, wire):
        if self.base_strength <= 0:
            raise FaultError("penalty strength must be positive")
        level = self.flag_levels.get(wire, 1)
        if self.mode == "equal":
            return self.base_strength
        if self.mode == "scaled":
            return (self.distance + 1) ** level * self.base_strength
        raise FaultError(f"unknown penalty mode {self.mode!r}")


def flag_decode_steps(circ):
    """Step from which each ancilla's value is final (its last gate use)."""
    last_use = {w: 0 for w in circ.ancilla_wires}
    for t, g in enumerate(circ.gates, start=1):
        for w in g.targets + tuple(c for c, _ in g.controls):
            if w in last_use:
                last_use[w] = t
    return last_use


def penalty_operator(circ, spec):
    """sum_flags strength |1><1|_flag, diagonal on clock (x) work space.

    Each flag is penalized on the clock steps at/after its decode step
    (where its value is final and no longer affects the computation) and at
    step 0 (where it holds the raw input and has not yet affected it).
    Without the step-0 term the penalized ground space is larger than the
    two codeword histories: an ancilla preloaded with the poison value that
    cancels its own syndrome would end the round back at |0>. Penalizing
    mid-round steps is not an option, since extraction transients there are
    codeword-dependent and would spuriously penalize a logical state.
    """
    depth = circ.depth
    work = circ.work_dim
    dims = circ.dims
    strides = np.ones(len(dims), dtype=np.int64)
    for i in range(len(dims) - 2, -1, -1):
        strides[i] = strides[i + 1] * dims[i + 1]
    idx = np.arange(work)
    decode = flag_decode_steps(circ)
    diag = np.zeros(depth * work)
    for wire, step in decode.items():
        digit = (idx // strides[wire]) % dims[wire]
        mask = (digit == 1).astype(float) * spec.strength_for(wire)
        steps = set(range(step, depth)) | {0}
        for t in steps:
            diag[t * work:(t + 1) * work] += mask
    return SparseOperator.from_diagonal(diag.astype(complex))


@dataclass
class PenaltyReport:
    ground_dim: int
    ground_spread: float
    gap: float
    energy_rises: dict

    def to_json(self):
        return {"ground_dim": self.ground_dim,
                "ground_spread": self.ground_spread,
                "gap": self.gap,
                "energy_rises": {k: v for k, v in self.energy_rises.items()}}


def apply_penalties(hk, circ, spec, *, degeneracy_tol=1e-8, n_pairs=4):
    """Penalized propagation-form operator plus its spectrum report.

    The codeword history states stay exact zero modes (their flags are never
    set), every other basis-input history state rises by its penalty
    expectation, and the rise is exactly linear in the base strength.
    Accepts a circuit or a LogicalPair.
    """
    if hasattr(circ, "circuit"):
        circ = circ.circuit
    pen = penalty_operator(circ, spec)
    if pen.dim != hk.dim:
        raise FaultError("penalty operator dimension does not match")
    hp = hk + pen
    res = linalg.lowest_eigenpairs(hp, min(n_pairs, hp.dim - 1),
                                   degeneracy_tol=degeneracy_tol)
    ground = res.clusters[0]
    spread = float(res.values[ground[-1]] - res.values[ground[0]])
    gap = (float(res.values[ground[-1] + 1] - res.values[ground[-1]])
           if ground[-1] + 1 < len(res.values) else float("nan"))
    rises = {}
    data = circ.data_wires
    for bits in range(2 ** len(data)):
        digits = [0] * len(circ.wires)
        for i, w in enumerate(data):
            digits[w] = (bits >> (len(data) - 1 - i)) & 1
        label = "".join(str(digits[w]) for w in data)
        hist = clock.history_state(circ, circ.basis_state(digits))
        rises[label] = linalg.expectation(pen, hist.state)
    return hp, PenaltyReport(ground_dim=len(ground), ground_spread=spread,
                             gap=gap, energy_rises=rises)


# ---------------------------------------------------------------------------
# classical error accounting


@dataclass
class CountingReport:
    mode: str
    tau: int
    levels: int
    base_strength: float
    energies: list
    final_counters: list
    overflowed: int

    @property
    def max_energy(self):
        return max(self.energies, default=0.0)

    def to_json(self):
        return {"mode": self.mode, "tau": self.tau, "levels": self.levels,
                "J": self.base_strength, "max_energy": self.max_energy,
                "final_energy": self.energies[-1] if self.energies else 0.0,
                "final_counters": list(self.final_counters),
                "overflowed": self.overflowed}


def counting_model(errors, *, mode="equal", tau=2, levels=8,
                   base_strength=1.0):
    """Error counters across concatenation levels with threshold tau.

    Each event increments level 1; a counter reaching tau resets and
    propagates one effective error to the next level (overflow past the top
    level is counted, the stored information is lost there). Energy after
    each event is sum_m c_m w_m with w_m = J in equal mode and
    w_m = tau^(m-1) J in scaled mode; the scaled ladder is calibrated so
    every absorbed error costs exactly J.
    """
    if tau < 2:
        raise FaultError("tau must be >= 2")
    if levels < 1:
        raise FaultError("levels must be >= 1")
    if isinstance(errors, int):
        n_events = errors
    else:
        n_events = len(list(errors))
    counters = [0] * levels
    if mode == "equal":
        weights = [base_strength] * levels
    elif mode == "scaled":
        weights = [tau ** m * base_strength for m in range(levels)]
    else:
        raise FaultError(f"unknown counting mode {mode!r}")
    energies = []
    overflowed = 0
    for _ in range(n_events):
        m = 0
        while True:
            counters[m] += 1
            if counters[m] < tau:
                break
            counters[m] = 0
            m += 1
            if m == levels:
                overflowed += 1
                break
        energies.append(float(sum(c * w for c, w in zip(counters, weights))))
    return CountingReport(mode=mode, tau=tau, levels=levels,
                          base_strength=base_strength, energies=energies,
                          final_counters=counters, overflowed=overflowed)


# ---------------------------------------------------------------------------
# survival time


@dataclass(frozen=True)
class AnalysisParams:
    epsilon_c: float      # fault-tolerance threshold per qubit per gate
    block_size: int       # N
    depth: int            # D
    penalty: float        # J
    temperature: float    # T, with k_B = 1

    def __post_init__(self):
        if min(self.epsilon_c, self.block_size, self.depth, self.penalty,
               self.temperature) <= 0:
            raise FaultError("all parameters must be positive")
        if self.epsilon_c >= 1:
            raise FaultError("epsilon_c must be below 1")


def survival_time(params):
    """exp(eps_C N D J / T): the stored-information survival estimate."""
    return math.exp(params.epsilon_c * params.block_size * params.depth
                    * params.penalty / params.temperature)
