"""Delayed-control pendulum: minimal realization, gain bracket, storage level sets.

Usage::

    python3 scripts/pendulum_example.py --horizon 4 --out-dir results/
    python3 scripts/pendulum_example.py --witness          # periodic long-path lower bounds
    python3 scripts/pendulum_example.py --sweep            # gap floor over physical parameters

Upper-bound cost grows quickly with the horizon (about 4 minutes at K = 12).
"""
from __future__ import annotations

import argparse
import itertools
import json
import time
from pathlib import Path

import numpy as np

from switchgain.examples import PendulumParameters, build_pendulum_example
from switchgain.gain import gain_bracket, lower_bound
from switchgain.levelsets import emit_level_sets
from switchgain.realization import minimize
from switchgain.storage import truncated_storage
from switchgain.system import path_from_labels, path_matrices

PERIODIC_PATTERNS = ([2, 4, 5], [2, 3], [1], [2, 4, 5, 1], [2, 3, 1])


def periodic_path_norm(sys, pattern, length: int) -> float:
    labels = (pattern * (length // len(pattern) + 1))[:length]
    return float(np.linalg.norm(path_matrices(sys, path_from_labels(sys, labels)).D, 2))


def best_periodic_norm(sys, length: int) -> float:
    return max(periodic_path_norm(sys, pattern, length) for pattern in PERIODIC_PATTERNS)


def run_pipeline(args) -> None:
    params = PendulumParameters()
    raw = build_pendulum_example(params)
    sys, report = minimize(raw)
    print(f"raw dims {dict(raw.dims)} -> minimal dims {dict(sys.dims)}")

    start = time.perf_counter()
    br = gain_bracket(sys, args.horizon, args.tol, lower_horizon=args.lower_horizon)
    print(f"K={args.horizon}: lower={br.lower:.5f} upper={br.upper:.5f} gap={br.relative_gap:.3f} "
          f"({time.perf_counter() - start:.1f}s)")

    gamma = 1.05 * br.upper
    storage = truncated_storage(sys, gamma, sys.total_dim).pruned()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for node in sys.node_names:
        if sys.dims[node] in (2, 3):
            emit_level_sets(sys, storage, node, args.resolution).write_csv(out_dir / f"levelset_{node}.csv")
    summary = {"parameters": params.to_dict(), "minimize": report.to_dict(), "bracket": br.to_dict(), "storage_gamma": gamma}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    print(f"wrote level sets and summary to {out_dir}")


def run_witness(args) -> None:
    sys, _ = minimize(build_pendulum_example())
    print(f"exhaustive lower bound K=12: {lower_bound(sys, 12):.4f}")
    for K in (12, 20, 30, 40, 60, 100, 300):
        print(f"periodic (2,4,5) path, length {K:>3}: ||D||_2 = {periodic_path_norm(sys, [2, 4, 5], K):.4f}")


def run_sweep(args) -> None:
    # gap(K) >= 1 - lower_K / p, since upper >= true gain >= any path norm p
    for length, damping in itertools.product((0.1, 0.25, 0.5, 1.0, 2.0), (0.0, 0.5, 2.0)):
        sys, _ = minimize(build_pendulum_example(PendulumParameters(length=length, damping=damping)))
        lo = lower_bound(sys, args.horizon)
        p = best_periodic_norm(sys, 400)
        print(f"length={length:<5} damping={damping:<4} lower{args.horizon}={lo:.4f} long-path={p:.4f} "
              f"gap floor={1 - lo / p:.3f}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=int, default=4)
    parser.add_argument("--lower-horizon", type=int, default=None)
    parser.add_argument("--tol", type=float, default=1e-3)
    parser.add_argument("--resolution", type=int, default=360)
    parser.add_argument("--out-dir", default="pendulum_out")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--witness", action="store_true", help="long periodic-path lower bounds")
    mode.add_argument("--sweep", action="store_true", help="gap floor over length and damping")
    args = parser.parse_args()
    if args.witness:
        run_witness(args)
    elif args.sweep:
        args.horizon = 12 if args.horizon == 4 else args.horizon
        run_sweep(args)
    else:
        run_pipeline(args)


if __name__ == "__main__":
    main()
