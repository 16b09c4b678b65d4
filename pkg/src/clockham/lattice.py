"""Implicit-clock qutrit lattice: conditional-move terms, orbit subspaces,
evolution, and equivalence against the circuit model.

Geometry: a rows x cols lattice of qutrits, all |2> except an active band of
work qutrits (one contiguous column interval) that starts in row 0. A move
term pulls the qutrit at (r-1, m) down into (r, m) when the serpentine order
allows it: even destination rows fill left to right (the site at (r, m-1)
must be occupied, (r, m+1) still |2>), odd rows mirrored. Band edges act as
walls: the "already filled" condition is waived at the entry column and the
"still empty" condition at the exit column, which keeps the evolution
propagating forward two rows per down-up pair of traversals.

On top of the paper-form conditions, a term here also requires the source
occupied and the destination empty; with open boundaries this removes
identity (diagonal) action on configurations mid-transfer and keeps the
orbit graph of a single band an exact path. The accompanying two-qutrit
unitary acts between the qutrit being moved and its source-row neighbor on
the not-yet-moved side; at the last column of a traversal that neighbor is
a wall and the slot degrades to a single-qutrit unitary on the moved site.

Every unitary acts on the {|0>,|1>} subspace and as identity on any |2>
component, so the number of |2>s is conserved and the dynamics stay inside
the orbit subspace; occupancy patterns and the work register factorize, and
simulation lives on (orbit size) x 2^w, never the full 3^(rows cols) space.
The full space is used only by the brute-force oracles on tiny lattices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg, transfer
from .circuit import simulate_dense
from .linalg import SparseOperator


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class MoveTerm:
    dest: tuple                 # (r, m)
    source: tuple               # (r-1, m)
    filled_neighbor: tuple = None   # must be occupied; None = wall (waived)
    empty_neighbor: tuple = None    # must be |2>;     None = wall (waived)
    gate_sites: tuple = ()      # (moved site, partner) or (moved site,)

    @property
    def partner(self):
        """Gate partner in the source row; must be occupied when present.

        This is the neighborhood-blocking condition: the region cannot move
        until the computational qubit the gate acts with is present. It also
        kills spurious backward branches at open boundaries, keeping a
        single band's orbit an exact path.
        """
        return self.gate_sites[1] if len(self.gate_sites) == 2 else None

    @property
    def end_of_row(self):
        return self.filled_neighbor is None or self.empty_neighbor is None


def band_terms(rows, band, row_lo=1, row_hi=None):
    """Move terms for one column band, destination rows row_lo..row_hi-1."""
    lo, hi = band
    if hi - lo < 1:
        raise LatticeError("band must contain at least one column")
    if row_hi is None:
        row_hi = rows
    terms = []
    for r in range(row_lo, row_hi):
        rightward = r % 2 == 0
        for m in range(lo, hi):
            if rightward:
                filled = (r, m - 1) if m - 1 >= lo else None
                empty = (r, m + 1) if m + 1 < hi else None
                nb = (r - 1, m + 1) if m + 1 < hi else None
            else:
                filled = (r, m + 1) if m + 1 < hi else None
                empty = (r, m - 1) if m - 1 >= lo else None
                nb = (r - 1, m - 1) if m - 1 >= lo else None
            gate_sites = ((r - 1, m), nb) if nb is not None else ((r - 1, m),)
            terms.append(MoveTerm(dest=(r, m), source=(r - 1, m),
                                  filled_neighbor=filled, empty_neighbor=empty,
                                  gate_sites=gate_sites))
    return terms


def build_rl_terms(program, rows, cols):
    """Terms of a single full-width band over the whole lattice."""
    if rows < 2:
        raise LatticeError("need at least 2 rows")
    program.validate(cols)
    return band_terms(rows, (0, cols))


def _shared_conditions(term, occupied):
    # these commute with the swap and the gate, so forward and reverse
    # applications share them
    return ((term.filled_neighbor is None
             or term.filled_neighbor in occupied)
            and (term.empty_neighbor is None
                 or term.empty_neighbor not in occupied)
            and (term.partner is None or term.partner in occupied))


def term_applies(term, occupied):
    return (term.source in occupied
            and term.dest not in occupied
            and _shared_conditions(term, occupied))


def term_applies_reverse(term, occupied):
    return (term.dest in occupied
            and term.source not in occupied
            and _shared_conditions(term, occupied))


def apply_term(term, occupied):
    """Forward image of an occupancy pattern, or None if annihilated."""
    if not term_applies(term, occupied):
        return None
    return (occupied - {term.source}) | {term.dest}


@dataclass(frozen=True)
class LatticeProgram:
    """Per-move-location two-qutrit unitaries, qubit-level matrices.

    moves maps (dest_row, dest_col) -> matrix: 4x4 acting on (moved wire,
    neighbor wire) for interior slots, 2x2 for end-of-row slots. Unassigned
    locations default to identity. All matrices act as identity on |2>
    components once embedded.
    """
    moves: dict = field(default_factory=dict)

    def validate(self, cols=None):
        for loc, mat in self.moves.items():
            m = np.asarray(mat, dtype=complex)
            if m.shape not in ((2, 2), (4, 4)):
                raise LatticeError(f"gate at {loc} must be 2x2 or 4x4")
            if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > 1e-12:
                raise LatticeError(f"gate at {loc} is not unitary")
        return self

    def gate_for(self, term):
        mat = self.moves.get(term.dest)
        want = 4 if len(term.gate_sites) == 2 else 2
        if mat is None:
            return np.eye(want, dtype=complex)
        mat = np.asarray(mat, dtype=complex)
        if mat.shape[0] != want:
            raise LatticeError(
                f"gate at {term.dest} has dimension {mat.shape[0]}, slot "
                f"expects {want}")
        return mat


@dataclass
class OrbitBasis:
    patterns: list               # frozensets of occupied sites
    index: dict                  # pattern -> position
    depth: np.ndarray            # BFS distance from the initial pattern
    edges: list                  # (from_idx, to_idx, MoveTerm)
    rows: int
    cols: int
    work_cols: tuple             # columns carrying work qubits

    @property
    def size(self):
        return len(self.patterns)

    @property
    def graph_depth(self):
        return int(self.depth.max())

    @property
    def work_dim(self):
        return 2 ** len(self.work_cols)

    def is_path(self):
        if len(self.edges) != self.size - 1:
            return False
        degree = np.zeros(self.size, dtype=int)
        for i, j, _ in self.edges:
            degree[i] += 1
            degree[j] += 1
        return degree.max() <= 2


def initial_pattern(band):
    lo, hi = band
    return frozenset((0, c) for c in range(lo, hi))


def orbit_subspace(init_occupied, terms, *, cap=4096):
    """Breadth-first closure of occupancy patterns under all move terms."""
    init_occupied = frozenset(init_occupied)
    if not init_occupied:
        raise LatticeError("no active region: the all-|2> lattice has no "
                           "dynamics")
    patterns = [init_occupied]
    index = {init_occupied: 0}
    depth = [0]
    edges = []
    seen_edges = set()
    queue = [0]
    while queue:
        next_queue = []
        for i in queue:
            pat = patterns[i]
            for term in terms:
                for forward in (True, False):
                    if forward:
                        if not term_applies(term, pat):
                            continue
                        new = (pat - {term.source}) | {term.dest}
                    else:
                        if not term_applies_reverse(term, pat):
                            continue
                        new = (pat - {term.dest}) | {term.source}
                    if new not in index:
                        if len(patterns) >= cap:
                            raise LatticeError(
                                f"orbit cap {cap} exceeded")
                        index[new] = len(patterns)
                        patterns.append(new)
                        depth.append(depth[i] + 1)
                        next_queue.append(index[new])
                    j = index[new]
                    key = (min(i, j), max(i, j), term.dest)
                    if key not in seen_edges:
                        seen_edges.add(key)
                        if forward:
                            edges.append((i, j, term))
                        else:
                            edges.append((j, i, term))
        queue = next_queue
    rows = 1 + max(r for pat in patterns for r, _ in pat)
    cols = 1 + max(c for pat in patterns for _, c in pat)
    work_cols = tuple(sorted(c for _, c in init_occupied))
    return OrbitBasis(patterns=patterns, index=index,
                      depth=np.array(depth), edges=edges,
                      rows=rows, cols=cols, work_cols=work_cols)


def _embed_qubit_matrix(mat, wires, n_wires):
    """Dense 2^n embedding of a small qubit matrix on the given wires."""
    dim = 2 ** n_wires
    out = np.zeros((dim, dim), dtype=complex)
    others = [w for w in range(n_wires) if w not in wires]
    k = len(wires)
    for rest in itertools.product((0, 1), repeat=len(others)):
        for rdig in itertools.product((0, 1), repeat=k):
            for cdig in itertools.product((0, 1), repeat=k):
                a = mat[int("".join(map(str, rdig)), 2),
                        int("".join(map(str, cdig)), 2)]
                if a == 0:
                    continue
                rbits = [0] * n_wires
                cbits = [0] * n_wires
                for w, d in zip(others, rest):
                    rbits[w] = cbits[w] = d
                for w, d in zip(wires, rdig):
                    rbits[w] = d
                for w, d in zip(wires, cdig):
                    cbits[w] = d
                r = int("".join(map(str, rbits)), 2)
                c = int("".join(map(str, cbits)), 2)
                out[r, c] = a
    return out


def _term_work_matrix(term, program, work_cols):
    """The term's unitary embedded on the work register (wire = column)."""
    mat = program.gate_for(term)
    wires = tuple(work_cols.index(site[1]) for site in term.gate_sites)
    return _embed_qubit_matrix(mat, wires, len(work_cols))


def lattice_hamiltonian(basis, program, scheme):
    """Hermitian operator on orbit (x) work space, couplings by depth.

    Each orbit edge at depth d carries coupling scheme[d] and the edge
    term's unitary on the work register; for a path orbit with engineered
    couplings this is exactly a perfect-transfer chain dressed with gates.
    """
    program.validate(basis.cols)
    if len(scheme) != basis.graph_depth:
        raise LatticeError(f"scheme length {len(scheme)} != orbit depth "
                           f"{basis.graph_depth}")
    w = basis.work_dim
    dim = basis.size * w
    rows, cols, amps = [], [], []
    for i, j, term in basis.edges:
        d = int(min(basis.depth[i], basis.depth[j]))
        coupling = scheme[d]
        umat = _term_work_matrix(term, program, basis.work_cols)
        lo, hi = (i, j) if basis.depth[i] < basis.depth[j] else (j, i)
        nz = np.nonzero(umat)
        for r, c in zip(*nz):
            rows.append(hi * w + r)
            cols.append(lo * w + c)
            amps.append(coupling * umat[r, c])
            rows.append(lo * w + c)
            cols.append(hi * w + r)
            amps.append(np.conj(coupling * umat[r, c]))
    return SparseOperator(dim, (np.array(rows), np.array(cols),
                                np.array(amps, dtype=complex)))


# ---------------------------------------------------------------------------
# full-space oracle (tiny lattices only)


def full_space_term(term, program, rows, cols):
    """R_l (+ its adjoint to make it Hermitian) on the 3^(rows*cols) space."""
    n = rows * cols
    dim = 3 ** n
    if dim > 3 ** 9:
        raise LatticeError("full-space oracle limited to 9 sites")

    def site_id(site):
        return site[0] * cols + site[1]

    gate = program.gate_for(term)
    pair = len(term.gate_sites) == 2
    entries_r, entries_c, entries_a = [], [], []
    for idx in range(dim):
        digits = []
        rem = idx
        for _ in range(n):
            digits.append(rem % 3)
            rem //= 3
        digits.reverse()
        if digits[site_id(term.source)] == 2:
            continue
        if digits[site_id(term.dest)] != 2:
            continue
        if term.filled_neighbor is not None \
                and digits[site_id(term.filled_neighbor)] == 2:
            continue
        if term.empty_neighbor is not None \
                and digits[site_id(term.empty_neighbor)] != 2:
            continue
        if term.partner is not None and digits[site_id(term.partner)] == 2:
            continue
        moved = site_id(term.gate_sites[0])
        nbr = site_id(term.gate_sites[1]) if pair else None
        src_digit = digits[moved]
        nb_digit = digits[nbr] if pair else None
        targets = []
        if pair and nb_digit != 2:
            col_in = src_digit * 2 + nb_digit
            for rdig in range(4):
                a = gate[rdig, col_in]
                if a != 0:
                    targets.append((rdig >> 1, rdig & 1, a))
        elif pair:
            targets.append((src_digit, nb_digit, 1.0))
        else:
            for rdig in range(2):
                a = gate[rdig, src_digit]
                if a != 0:
                    targets.append((rdig, None, a))
        for new_src, new_nb, a in targets:
            out = list(digits)
            out[moved] = new_src
            if pair and new_nb is not None:
                out[nbr] = new_nb
            out[site_id(term.dest)] = out[moved]
            out[moved] = 2
            out_idx = 0
            for d in out:
                out_idx = out_idx * 3 + d
            entries_r.append(out_idx)
            entries_c.append(idx)
            entries_a.append(a)
    forward = SparseOperator(dim, (np.array(entries_r, dtype=np.int64),
                                   np.array(entries_c, dtype=np.int64),
                                   np.array(entries_a, dtype=complex)),
                             hermitian=False)
    return forward


def full_space_hamiltonian(terms, program, rows, cols, coupling_fn=None):
    """sum_l J_l (R_l + R_l^dagger) on the full lattice space."""
    n = rows * cols
    dim = 3 ** n
    all_r, all_c, all_a = [], [], []
    for term in terms:
        j = 1.0 if coupling_fn is None else float(coupling_fn(term))
        fwd = full_space_term(term, program, rows, cols)
        all_r += [fwd.rows, fwd.cols]
        all_c += [fwd.cols, fwd.rows]
        all_a += [j * fwd.data, np.conj(j * fwd.data)]
    return SparseOperator(dim, (np.concatenate(all_r), np.concatenate(all_c),
                                np.concatenate(all_a)))


def brute_force_reachable(init_digits, terms, program, rows, cols):
    """Reachable basis labels under repeated term application (both ways)."""
    n = rows * cols
    dim = 3 ** n
    ops = []
    for term in terms:
        fwd = full_space_term(term, program, rows, cols)
        ops.append(fwd)
        ops.append(SparseOperator(dim, (fwd.cols, fwd.rows,
                                        np.conj(fwd.data)), hermitian=False))
    start = 0
    for d in init_digits:
        start = start * 3 + d
    frontier = {start}
    seen = {start}
    while frontier:
        nxt = set()
        for idx in frontier:
            v = np.zeros(dim, dtype=complex)
            v[idx] = 1.0
            for op in ops:
                img = op.matvec(v)
                for out in np.flatnonzero(np.abs(img) > 1e-12):
                    if int(out) not in seen:
                        seen.add(int(out))
                        nxt.add(int(out))
        frontier = nxt
    return seen


# ---------------------------------------------------------------------------
# circuit compilation and equivalence


def _slot_column(r, band):
    """The move location carrying the pair-gate slot for destination row r."""
    lo, hi = band
    return lo if r % 2 == 0 else hi - 1


def compile_circuit(circ):
    """Map a 1- or 2-qubit circuit onto a lattice program.

    Wire m rides column m; gate i is attached to row transfer i's gate slot
    (the first move of the traversal, whose source-row neighbor covers both
    wires), identity elsewhere. Returns (rows, band, program).
    """
    from .circuit import gate_unitary

    w = len(circ.wires)
    if w not in (1, 2):
        raise LatticeError("lattice compilation supports 1- and 2-qubit "
                           "circuits")
    if any(wire.dim != 2 for wire in circ.wires):
        raise LatticeError("lattice compilation expects qubit circuits")
    gates = circ.gates
    rows = max(len(gates), 1) + 1
    band = (0, w)
    moves = {}
    for i, gate in enumerate(gates, start=1):
        wires, mat = gate_unitary(gate, circ.dims)
        if w == 1:
            moves[(i, 0)] = mat
        else:
            col = _slot_column(i, band)
            # slot wire order: (moved wire = col, neighbor wire)
            moved = col
            neighbor = 1 - col
            if wires == (moved, neighbor):
                slot_mat = mat
            elif wires == (neighbor, moved):
                swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0],
                                 [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
                slot_mat = swap @ mat @ swap
            elif len(wires) == 1:
                slot_mat = _embed_qubit_matrix(
                    mat, (0 if wires[0] == moved else 1,), 2)
            else:
                raise LatticeError(f"cannot place gate on wires {wires}")
            moves[(i, col)] = slot_mat
    return rows, band, LatticeProgram(moves).validate(w)


def lattice_vs_circuit_check(circ, input_state=None, *, cap=4096):
    """Evolve the compiled program and compare with the dense circuit oracle.

    Returns a report dict with orbit_size, depth and the transported-row
    fidelity against simulate_dense's final snapshot.
    """
    rows, band, program = compile_circuit(circ)
    terms = band_terms(rows, band)
    basis = orbit_subspace(initial_pattern(band), terms, cap=cap)
    scheme = transfer.pst_couplings(basis.graph_depth)
    op = lattice_hamiltonian(basis, program, scheme)
    w = basis.work_dim
    if input_state is None:
        input_state = linalg.basis_state(w, 0)
    input_state = linalg.normalized(np.asarray(input_state, dtype=complex))
    v0 = np.zeros(op.dim, dtype=complex)
    v0[:w] = input_state
    t0, _ = transfer.locate_transfer_time(scheme)
    vt = linalg.evolve(op, v0, t0)
    final_idx = int(np.argmax(basis.depth))
    block = vt[final_idx * w:(final_idx + 1) * w]
    arrival = float(np.real(np.vdot(block, block)))
    oracle = simulate_dense(circ, input_state)[-1]
    fid = abs(np.vdot(block, oracle))
    return {
        "orbit_size": basis.size,
        "depth": basis.graph_depth,
        "t0": t0,
        "arrival_probability": arrival,
        "fidelity": float(fid),
    }


# ---------------------------------------------------------------------------
# parallel threads


@dataclass(frozen=True)
class ThreadScenario:
    rows: int
    band_a: tuple
    band_b: tuple
    merge_row: int

    def __post_init__(self):
        if self.band_a[1] != self.band_b[0]:
            raise LatticeError("bands must be adjacent column intervals")
        if not 1 <= self.merge_row < self.rows:
            raise LatticeError("merge row out of range")

    @property
    def merged_band(self):
        return (self.band_a[0], self.band_b[1])

    def terms(self):
        pre = []
        for band in (self.band_a, self.band_b):
            pre += band_terms(self.rows, band, 1, self.merge_row)
        post = band_terms(self.rows, self.merged_band, self.merge_row,
                          self.rows)
        return pre + post

    def initial(self):
        return initial_pattern(self.merged_band)


def _thread_done(pattern, band, merge_row):
    lo, hi = band
    return not any(r < merge_row - 1 for (r, c) in pattern
                   if lo <= c < hi)


def thread_blocking_check(scenario, *, cap=8192):
    """Structural orbit-graph checks for two-thread recombination.

    * merge_frontier: configurations from which the first move past the
      merge row applies; a single frontier means the threads recombine at
      one point.
    * advance_requires_termination: every configuration with content past
      the merge row has both threads terminated.
    * blocking_configs: configurations where exactly one thread has
      terminated and no move past the merge row applies (the finished
      thread waits).
    """
    terms = scenario.terms()
    basis = orbit_subspace(scenario.initial(), terms, cap=cap)
    merge_row = scenario.merge_row
    past_terms = [t for t in terms if t.dest[0] > merge_row]
    frontier = set()
    blocking = 0
    advance_ok = True
    for idx, pat in enumerate(basis.patterns):
        past = any(r > merge_row for (r, c) in pat)
        if past:
            if not (_thread_done(pat, scenario.band_a, merge_row)
                    and _thread_done(pat, scenario.band_b, merge_row)):
                advance_ok = False
        movable = any(term_applies(t, pat) for t in past_terms)
        if movable:
            frontier.add(idx)
        done_a = _thread_done(pat, scenario.band_a, merge_row)
        done_b = _thread_done(pat, scenario.band_b, merge_row)
        if done_a != done_b and not movable and not past:
            blocking += 1
    entry = {i for i in frontier
             if not any(r > merge_row for (r, c) in basis.patterns[i])}
    return {
        "orbit_size": basis.size,
        "merge_frontier": sorted(entry),
        "single_frontier": len(entry) == 1,
        "advance_requires_termination": advance_ok,
        "blocking_configs": blocking,
        "blocking_detected": blocking > 0,
    }
