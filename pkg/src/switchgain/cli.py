"""``switchgain`` command line.

Exit codes: 0 success, 1 invalid input, 2 infeasible or unstable (analysis
aborted), 3 inconclusive. ``stability`` maps its verdict onto the same
codes (stable 0, unstable 2, unknown 3).
"""
from __future__ import annotations

import argparse
import logging
import sys as _sys
import warnings

import numpy as np

from . import gain, io, realization, stability, storage
from .dissipation import verify_dissipation
from .examples import PendulumParameters, build_pendulum_example
from .levelsets import NotDefiniteError, emit_level_sets
from .system import InvalidSystemError, path_from_labels, validate_system

EXIT_OK, EXIT_INVALID, EXIT_ABORT, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def _emit(payload, out: str | None) -> None:
    text = io.dumps(payload)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.replace(",", " ").split()])


def cmd_validate(args) -> int:
    import json

    with open(args.system) as fh:
        data = json.load(fh)
    try:
        sys = io.system_from_dict(data)
        report = validate_system(sys)
    except InvalidSystemError as exc:
        report = exc.report
    _emit({"ok": report.ok, "violations": [v.__dict__ for v in report.violations]}, args.out)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_minimize(args) -> int:
    sys = io.load_system(args.system)
    reduced, report = realization.minimize(sys, args.tol)
    if args.out:
        io.save_system(reduced, args.out)
    payload = report.to_dict()
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(io.dumps(payload) + "\n")
    print(io.dumps(payload))
    return EXIT_OK


def cmd_stability(args) -> int:
    sys = io.load_system(args.system)
    cert = stability.quadratic_cjsr_bound(sys, args.horizon, args.tol)
    verdict = stability.classify(cert, args.tol)
    _emit({"verdict": verdict.value, "certificate": cert.to_dict()}, args.out)
    return {
        stability.Verdict.STABLE: EXIT_OK,
        stability.Verdict.UNSTABLE: EXIT_ABORT,
        stability.Verdict.UNKNOWN: EXIT_INCONCLUSIVE,
    }[verdict]


def cmd_lower(args) -> int:
    sys = io.load_system(args.system)
    value, path = gain.lower_bound_with_path(sys, args.horizon, args.p)
    _emit({"p": "inf" if args.p == "inf" else int(args.p), "K": args.horizon, "lower": value, "path": list(path.labels) if path else None}, args.out)
    return EXIT_OK


def cmd_upper(args) -> int:
    sys = io.load_system(args.system)
    ub = gain.upper_bound_bisect(sys, args.horizon, args.tol)
    check = verify_dissipation(sys, ub.certificate, ub.gamma, args.samples, args.seed)
    _emit(
        {
            "K": args.horizon,
            "upper": ub.gamma,
            "bisection_steps": ub.steps,
            "inconclusive_steps": ub.inconclusive_steps,
            "verification": check.to_dict(),
            "certificate": ub.certificate.to_dict(),
        },
        args.out,
    )
    return EXIT_OK


def cmd_bracket(args) -> int:
    sys = io.load_system(args.system)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        br = gain.gain_bracket(
            sys, args.horizon, args.tol, lower_horizon=args.lower_horizon, stability_horizon=args.stability_horizon
        )
    payload = br.to_dict(include_certificate=args.certificate)
    payload["warnings"] = [str(w.message) for w in caught]
    _emit(payload, args.out)
    return EXIT_OK


def cmd_storage(args) -> int:
    sys = io.load_system(args.system)
    if args.minimize:
        sys, _ = realization.minimize(sys)
    st = storage.truncated_storage(sys, args.gamma, args.horizon).pruned()
    data = emit_level_sets(sys, st, args.node, args.resolution)
    data.write_csv(args.out)
    print(
        io.dumps(
            {
                "node": args.node,
                "dim": data.dim,
                "gamma": args.gamma,
                "K": args.horizon,
                "pieces": len(st.pieces[args.node]),
                "sections": [s.name for s in data.sections],
                "csv": args.out,
            }
        )
    )
    return EXIT_OK


def cmd_worst_case(args) -> int:
    sys = io.load_system(args.system)
    labels = [int(t) for t in args.path.replace(",", " ").split()]
    pi = path_from_labels(sys, labels)
    run = storage.worst_case_disturbance(sys, pi, args.gamma, _parse_vector(args.x0))
    _emit(run.to_dict(), args.out)
    return EXIT_OK


def cmd_example_pendulum(args) -> int:
    params = PendulumParameters(
        mass=args.mass, length=args.length, gravity=args.gravity, damping=args.damping, rate_hz=args.rate
    )
    sys = build_pendulum_example(params)
    if args.minimize:
        sys, _ = realization.minimize(sys)
    if args.out:
        io.save_system(sys, args.out)
    print(io.dumps({"parameters": params.to_dict(), "dims": sys.dims, "out": args.out}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchgain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_system(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("system", help="system JSON file")
        p.add_argument("--out", help="also write the result here")
        p.set_defaults(func=func)
        return p

    with_system("validate", cmd_validate, "check a system file")

    p = with_system("minimize", cmd_minimize, "compute a minimal rectangular realization")
    p.add_argument("--tol", type=float, default=None, help="relative rank tolerance")
    p.add_argument("--report", help="write the minimization report here")

    p = with_system("stability", cmd_stability, "quadratic internal-stability test")
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-4)

    p = with_system("lower", cmd_lower, "lower bound on the gain")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--p", default="2", choices=["1", "2", "inf"])

    p = with_system("upper", cmd_upper, "certified upper bound on the L2 gain")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)

    p = with_system("bracket", cmd_bracket, "minimize, check stability, bound the L2 gain")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--lower-horizon", type=int, default=None)
    p.add_argument("--stability-horizon", type=int, default=1)
    p.add_argument("--certificate", action="store_true", help="include the storage certificate")

    p = sub.add_parser("storage", help="truncated storage level sets as CSV")
    p.add_argument("system")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--node", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=360)
    p.add_argument("--minimize", action="store_true", help="minimize the system first")
    p.set_defaults(func=cmd_storage)

    p = with_system("worst-case", cmd_worst_case, "replay the worst-case disturbance along a path")
    p.add_argument("--path", required=True, help="comma separated edge labels")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--x0", required=True, help="comma separated initial state")

    p = sub.add_parser("example-pendulum", help="write the delayed-control pendulum system")
    p.add_argument("--out")
    p.add_argument("--minimize", action="store_true")
    defaults = PendulumParameters()
    p.add_argument("--mass", type=float, default=defaults.mass)
    p.add_argument("--length", type=float, default=defaults.length)
    p.add_argument("--gravity", type=float, default=defaults.gravity)
    p.add_argument("--damping", type=float, default=defaults.damping)
    p.add_argument("--rate", type=float, default=defaults.rate_hz)
    p.set_defaults(func=cmd_example_pendulum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (storage.StorageDomainError, NotDefiniteError, gain.UnstableSystemError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_ABORT
    except gain.NoUpperBoundError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INCONCLUSIVE
    except (OSError, KeyError, ValueError) as exc:
        # schema errors, invalid systems, bad paths and bad arguments
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INVALID

if __name__ == "__main__":
    _sys.exit(main())
