"""Clock Hamiltonians: continuous-time realization of circuits.

Two constructions over clock (x) work space:

* the hopping form J_t (|t+1><t| (x) U_{t+1} + h.c.), which moves a clock
  excitation down a chain while applying successive gates — with an
  engineered coupling scheme the computation completes perfectly at the
  transfer time t0;
* the frustration-free projector form whose zero-energy ground space is
  spanned exactly by the history states (equal-weight superpositions over
  the computation's snapshots).

The clock is an integer register by default (the dynamics never leave the
single-excitation clock sector, so the register encoding is exact and
exponentially smaller); a physical-unary mode embeds the clock into D
qubits to validate the raising/lowering-operator construction at small D.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, transfer
from .circuit import gate_full_sparse, simulate_dense
from .linalg import SparseOperator


class ClockError(ValueError):
    pass


class ArrivalShortfallError(RuntimeError):
    """Clock excitation failed to arrive; carries the achieved probability."""

    def __init__(self, achieved, threshold):
        super().__init__(
            f"clock arrival probability {achieved:.3e} below "
            f"{threshold:.3e}; the coupling scheme does not transfer "
            f"perfectly")
        self.achieved = achieved


@dataclass
class ClockHamiltonian:
    circuit: object
    scheme: transfer.CouplingScheme
    encoding: str               # 'register' | 'unary'
    operator: SparseOperator
    work_dim: int
    depth: int
    _t0: float = None

    @property
    def t0(self):
        if self._t0 is None:
            t0, _ = transfer.locate_transfer_time(self.scheme)
            self._t0 = t0
        return self._t0

    def clock_block(self, state, t):
        """Work-space amplitudes living at clock position t."""
        if self.encoding == "register":
            return state[t * self.work_dim:(t + 1) * self.work_dim]
        offset = _unary_clock_index(t, self.depth) * self.work_dim
        return state[offset:offset + self.work_dim]

    def initial_state(self, work_state):
        work_state = np.asarray(work_state, dtype=complex)
        if work_state.shape != (self.work_dim,):
            raise ClockError("work-state dimension mismatch")
        v = np.zeros(self.operator.dim, dtype=complex)
        if self.encoding == "register":
            v[:self.work_dim] = work_state
        else:
            offset = _unary_clock_index(0, self.depth) * self.work_dim
            v[offset:offset + self.work_dim] = work_state
        return v


def _unary_clock_index(t, depth):
    """Basis index of the one-hot clock word with the excitation at t."""
    return 1 << (depth - 1 - t)


def _gate_operators(circ):
    dims = circ.dims
    return [gate_full_sparse(g, dims) for g in circ.gates]


def build_feynman(circ, scheme, encoding="register", unary_depth_cap=12):
    """Hopping-form clock Hamiltonian for `circ` with couplings `scheme`."""
    depth = circ.depth
    if len(scheme) != depth - 1:
        raise ClockError(f"scheme length {len(scheme)} != D-1 = {depth - 1}")
    if encoding not in ("register", "unary"):
        raise ClockError(f"unknown encoding {encoding!r}")
    work = circ.work_dim
    gate_ops = _gate_operators(circ)
    rows, cols, amps = [], [], []
    if encoding == "register":
        dim = depth * work
        for t, (j, g) in enumerate(zip(scheme.couplings, gate_ops)):
            up_r = (t + 1) * work + g.rows
            up_c = t * work + g.cols
            rows.append(up_r)
            cols.append(up_c)
            amps.append(j * g.data)
            rows.append(up_c)
            cols.append(up_r)
            amps.append(np.conj(j * g.data))
    else:
        if depth > unary_depth_cap:
            raise ClockError(f"unary encoding capped at D <= "
                             f"{unary_depth_cap}")
        dim = (1 << depth) * work
        for t, (j, g) in enumerate(zip(scheme.couplings, gate_ops)):
            bit_t = 1 << (depth - 1 - t)
            bit_t1 = 1 << (depth - 2 - t)
            # every clock word with qubit t set and t+1 clear participates
            for word in range(1 << depth):
                if word & bit_t and not word & bit_t1:
                    word_up = (word ^ bit_t) | bit_t1
                    up_r = word_up * work + g.rows
                    up_c = word * work + g.cols
                    rows.append(up_r)
                    cols.append(up_c)
                    amps.append(j * g.data)
                    rows.append(up_c)
                    cols.append(up_r)
                    amps.append(np.conj(j * g.data))
    op = SparseOperator(dim, (np.concatenate(rows), np.concatenate(cols),
                              np.concatenate(amps)))
    return ClockHamiltonian(circuit=circ, scheme=scheme, encoding=encoding,
                            operator=op, work_dim=work, depth=depth)


@dataclass
class RunReport:
    depth: int
    t0: float
    arrival_probability: float

    def to_json(self):
        return {"D": self.depth, "t0": self.t0,
                "clock_arrival_probability": self.arrival_probability}


def run_computation(h, work_input, *, arrival_floor=1 - 1e-8):
    """Evolve |clock 0>|input> for t0 and read the final clock block.

    Returns (work_state, RunReport). Raises ArrivalShortfallError with the
    achieved probability when the scheme does not achieve perfect transfer.
    """
    v0 = h.initial_state(linalg.normalized(work_input))
    vt = linalg.evolve(h.operator, v0, h.t0)
    block = h.clock_block(vt, h.depth - 1)
    prob = float(np.real(np.vdot(block, block)))
    if prob < arrival_floor:
        raise ArrivalShortfallError(prob, arrival_floor)
    return block / np.sqrt(prob), RunReport(
        depth=h.depth, t0=h.t0, arrival_probability=prob)


@dataclass
class HistoryState:
    state: np.ndarray
    depth: int
    work_dim: int
    input_label: str = ""

    def clock_block(self, t):
        return self.state[t * self.work_dim:(t + 1) * self.work_dim]


def history_state(circ, work_input, input_label=""):
    """(1/sqrt(D)) sum_t |t>|psi_t> over the register-encoded clock."""
    snaps = simulate_dense(circ, np.asarray(work_input, dtype=complex))
    depth = circ.depth
    state = np.concatenate(snaps) / np.sqrt(depth)
    return HistoryState(state=state, depth=depth, work_dim=circ.work_dim,
                        input_label=input_label)


def build_kitaev(circ):
    """Frustration-free propagation form on clock (x) work space.

    sum_t [ (P_t + P_{t+1})/2 (x) 1 - (|t+1><t| (x) U_{t+1} + h.c.)/2 ]:
    positive semidefinite, annihilates every history state, and carries the
    half-strength boundary terms on the first and last steps.
    """
    depth = circ.depth
    work = circ.work_dim
    dim = depth * work
    gate_ops = _gate_operators(circ)
    rows, cols, amps = [], [], []
    eye = np.arange(work, dtype=np.int64)
    diag_weight = np.zeros(depth)
    for t in range(depth - 1):
        diag_weight[t] += 0.5
        diag_weight[t + 1] += 0.5
    for t in range(depth):
        if diag_weight[t]:
            rows.append(t * work + eye)
            cols.append(t * work + eye)
            amps.append(np.full(work, diag_weight[t], dtype=complex))
    for t, g in enumerate(gate_ops):
        up_r = (t + 1) * work + g.rows
        up_c = t * work + g.cols
        rows.append(up_r)
        cols.append(up_c)
        amps.append(-0.5 * g.data)
        rows.append(up_c)
        cols.append(up_r)
        amps.append(np.conj(-0.5 * g.data))
    return SparseOperator(dim, (np.concatenate(rows), np.concatenate(cols),
                                np.concatenate(amps)))


class DegeneracyMismatchError(RuntimeError):
    """The requested ground-space dimension does not match the spectrum."""


def spectral_gap(op, ground_dim, *, degeneracy_tol=1e-8):
    """Gap between the assumed ground cluster and the next eigenvalue.

    Verifies the ground cluster is degenerate within `degeneracy_tol` and
    actually terminates at `ground_dim` (otherwise the caller's expected
    degeneracy is wrong, which is reported, not silently absorbed).
    """
    if ground_dim < 1 or ground_dim >= op.dim:
        raise ValueError("ground_dim must be in [1, dim)")
    res = linalg.lowest_eigenpairs(op, ground_dim + 1,
                                   degeneracy_tol=degeneracy_tol)
    vals = res.values
    spread = float(vals[ground_dim - 1] - vals[0])
    gap = float(vals[ground_dim] - vals[ground_dim - 1])
    if spread > degeneracy_tol:
        raise DegeneracyMismatchError(
            f"ground cluster spread {spread:.3e} exceeds "
            f"{degeneracy_tol:.1e}; expected degeneracy {ground_dim} "
            f"is wrong")
    if gap <= degeneracy_tol:
        raise DegeneracyMismatchError(
            f"eigenvalue {ground_dim} sits within the ground cluster "
            f"(gap {gap:.3e}); expected degeneracy {ground_dim} is wrong")
    return gap
