"""Command-line interface: one subcommand per experiment.

Each run emits a single JSON document (sorted keys) to stdout, or to --out;
the overlap scan additionally writes its per-location CSV. Exit codes:
0 success, 1 a criterion or bound failed, 2 usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import acceptance, circuit, clock, fault, lattice, linalg, transfer


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _emit(payload, args):
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_circuit(args):
    if getattr(args, "builtin", None):
        circ = circuit.bitflip_ec_circuit(args.builtin)
        rounds = getattr(args, "rounds", 1) or 1
        if rounds > 1:
            circ = circuit.compose_rounds(circ, rounds)
        return circ
    path = getattr(args, "circuit", None)
    if not path:
        raise SystemExit2("either --circuit or --builtin is required")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SystemExit2(f"cannot read circuit file: {exc}")
    return circuit.parse_circuit(text)


def _input_state(circ, digits):
    if digits is None:
        digits = "0" * len(circ.wires)
    if len(digits) != len(circ.wires):
        raise SystemExit2(f"--input needs {len(circ.wires)} digits")
    return circ.basis_state([int(c) for c in digits])


class SystemExit2(Exception):
    """Usage or I/O error: exit code 2."""


def cmd_pst(args):
    if args.N < 1:
        raise SystemExit2("N must be >= 1")
    scheme = transfer.pst_couplings(args.N)
    t0, peak = transfer.locate_transfer_time(scheme)
    payload = {
        "N": args.N,
        "t0": t0,
        "peak_fidelity": peak,
        "spectrum": list(transfer.chain_spectrum(scheme)),
        "couplings": scheme.to_json(),
    }
    if args.t is not None:
        payload["fidelity_at_t"] = transfer.transfer_fidelity(scheme, args.t)
    return payload, 0


def cmd_grid(args):
    if args.N < 1:
        raise SystemExit2("N must be >= 1")
    axis = transfer.pst_couplings(args.N)
    spec = transfer.HypercubeSpec((axis, axis))
    op = transfer.hypercube_hamiltonian(spec, dim_cap=args.cap_dim)
    lo, hi = transfer.hypercube_corners(spec)
    t0, _ = transfer.locate_transfer_time(axis)
    v = linalg.evolve(op, linalg.basis_state(op.dim, lo), t0)
    chain = transfer.chain_hamiltonian(axis)
    u1 = linalg.evolve(chain, linalg.basis_state(args.N + 1, 0), t0)
    payload = {
        "N": args.N,
        "t0": t0,
        "corner_fidelity": float(abs(v[hi])),
        "tensor_factorization_error": float(
            np.linalg.norm(v - np.kron(u1, u1))),
    }
    return payload, 0


def cmd_clock_run(args):
    circ = _load_circuit(args)
    state = _input_state(circ, args.input)
    h = clock.build_feynman(circ, transfer.pst_couplings(circ.depth - 1))
    out, report = clock.run_computation(h, state,
                                        arrival_floor=1 - args.tolerance)
    oracle = circuit.simulate_dense(circ, state)[-1]
    hk = clock.build_kitaev(circ)
    gap = clock.spectral_gap(hk, circ.work_dim)
    payload = report.to_json()
    payload["fidelity"] = linalg.fidelity(out, oracle)
    payload["gap"] = gap
    return payload, 0


def cmd_history_verify(args):
    circ = _load_circuit(args)
    state = _input_state(circ, args.input)
    hk = clock.build_kitaev(circ)
    hist = clock.history_state(circ, state)
    gap = clock.spectral_gap(hk, circ.work_dim)
    payload = {
        "D": circ.depth,
        "work_dim": circ.work_dim,
        "kitaev_residual": float(np.linalg.norm(hk.matvec(hist.state))),
        "gap": gap,
    }
    return payload, 0


def cmd_lattice_run(args):
    circ = _load_circuit(args)
    report = lattice.lattice_vs_circuit_check(circ, cap=args.cap_dim)
    return report, 0


def cmd_overlap(args):
    base = circuit.bitflip_ec_circuit(args.variant)
    composed = circuit.compose_rounds(base, args.rounds)
    operators = tuple(args.operators.split(","))
    report = fault.overlap_scan(composed, variant=args.variant,
                                operators=operators)
    csv_path = args.csv or (args.out + ".csv" if args.out else None)
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(report.to_csv())
    payload = report.summary()
    payload["csv"] = csv_path
    if not csv_path:
        payload["rows"] = [[r.step, r.wire, r.operator, r.overlap,
                            r.bound, r.malignant] for r in report.rows]
    return payload, 0


def cmd_penalty_spectrum(args):
    circ = circuit.bitflip_ec_circuit(args.variant)
    hk = clock.build_kitaev(circ)
    spec = fault.PenaltySpec(base_strength=args.J, mode=args.mode)
    _, report = fault.apply_penalties(hk, circ, spec)
    payload = report.to_json()
    payload["variant"] = args.variant
    payload["J"] = args.J
    payload["mode"] = args.mode
    return payload, 0


def cmd_counting_model(args):
    report = fault.counting_model(args.events, mode=args.mode, tau=args.tau,
                                  levels=args.levels,
                                  base_strength=args.J)
    payload = report.to_json()
    if args.events <= 64:
        payload["energies"] = report.energies
    return payload, 0


def cmd_survival(args):
    params = fault.AnalysisParams(epsilon_c=args.epsilon, block_size=args.N,
                                  depth=args.D, penalty=args.J,
                                  temperature=args.T)
    return {"survival_time": fault.survival_time(params),
            "exponent": args.epsilon * args.N * args.D * args.J / args.T}, 0


def cmd_couplings_solve(args):
    if args.target_uniform:
        target = transfer.CouplingScheme((args.uniform_value,)
                                         * args.target_uniform)
    else:
        try:
            values = json.loads(args.target)
        except json.JSONDecodeError as exc:
            raise SystemExit2(f"bad --target JSON: {exc}")
        target = transfer.CouplingScheme(tuple(values))
    report = transfer.solve_couplings(target, n=args.n,
                                      max_iter=args.max_iter)
    payload = report.to_json()
    payload["history"] = report.history
    payload["diagnostics"] = transfer.eq1_diagnostics(
        args.n or len(target) // 2)
    return payload, 0


def cmd_suite(args):
    results = acceptance.run_suite(args.filter, seed=args.seed)
    payload = {
        name: {"passed": r.passed, "elapsed": r.elapsed,
               "details": _jsonable(r.details)}
        for name, r in results
    }
    failed = [name for name, r in results if not r.passed]
    payload_all = {"criteria": payload, "failed": failed,
                   "passed": not failed}
    return payload_all, (1 if failed else 0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="clockham",
        description="Quantum computations as fixed local Hamiltonian "
                    "dynamics: transfer chains, clock Hamiltonians, "
                    "implicit-clock lattices and topological tests of "
                    "error-correction circuits.")
    parser.add_argument("--config", help="JSON file with flag defaults")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", "-o", help="write the JSON report here")
    common.add_argument("--format", choices=("json",), default="json")
    common.add_argument("--cap-dim", type=int, default=1 << 22,
                        dest="cap_dim")
    common.add_argument("--tolerance", type=float, default=1e-8)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pst", parents=[common],
                       help="perfect-transfer chain report")
    p.add_argument("N", type=int)
    p.add_argument("--t", type=float, default=None)
    p.set_defaults(fn=cmd_pst)

    p = sub.add_parser("grid", parents=[common],
                       help="2D hypercube corner transfer")
    p.add_argument("--n", dest="N", type=int, default=3)
    p.set_defaults(fn=cmd_grid)

    for name, fn in (("clock-run", cmd_clock_run),
                     ("history-verify", cmd_history_verify),
                     ("lattice-run", cmd_lattice_run)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--circuit", help="circuit text file")
        p.add_argument("--builtin", choices=("flawed", "safe"))
        p.add_argument("--rounds", type=int, default=1)
        p.add_argument("--input", help="basis digits, one per wire")
        p.set_defaults(fn=fn)

    p = sub.add_parser("overlap", parents=[common],
                       help="revised topological-condition scan")
    p.add_argument("--variant", choices=("flawed", "safe"), required=True)
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--operators", default="X",
                   help="comma list from X,Z,LEAK")
    p.add_argument("--csv", help="write the per-location CSV here")
    p.set_defaults(fn=cmd_overlap)

    p = sub.add_parser("penalty-spectrum", parents=[common])
    p.add_argument("--variant", choices=("flawed", "safe"), default="safe")
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--mode", choices=("equal", "scaled"), default="equal")
    p.set_defaults(fn=cmd_penalty_spectrum)

    p = sub.add_parser("counting-model", parents=[common])
    p.add_argument("--events", type=int, default=100)
    p.add_argument("--mode", choices=("equal", "scaled"), default="equal")
    p.add_argument("--tau", type=int, default=2)
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--J", type=float, default=1.0)
    p.set_defaults(fn=cmd_counting_model)

    p = sub.add_parser("survival", parents=[common])
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--D", type=int, default=10)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--T", type=float, default=1.0)
    p.set_defaults(fn=cmd_survival)

    p = sub.add_parser("couplings-solve", parents=[common])
    p.add_argument("--target", help="JSON array of target couplings")
    p.add_argument("--target-uniform", type=int, default=None,
                   dest="target_uniform",
                   help="length of an all-equal target")
    p.add_argument("--uniform-value", type=float, default=1.0,
                   dest="uniform_value")
    p.add_argument("--n", type=int, default=None,
                   help="axis length (couplings per axis)")
    p.add_argument("--max-iter", type=int, default=400, dest="max_iter")
    p.set_defaults(fn=cmd_couplings_solve)

    p = sub.add_parser("suite", parents=[common],
                       help="run every acceptance criterion")
    p.add_argument("--filter", help="run only criteria whose name "
                                    "contains this substring")
    p.set_defaults(fn=cmd_suite)
    return parser


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            with open(argv[idx + 1]) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError, IndexError) as exc:
            print(f"error: bad --config: {exc}", file=sys.stderr)
            return 2
        for key, value in defaults.items():
            argv += [f"--{key.replace('_', '-')}", str(value)]
        del argv[idx:idx + 2]
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        payload, code = args.fn(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (circuit.ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(payload, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
