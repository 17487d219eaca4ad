"""Cross-check the gain bracket against the H-infinity norm of a discrete LTI system.

Usage::

    python3 scripts/lti_check.py --a 0.5 --b 1 --c 1 --d 0 --lower-horizon 50
"""
from __future__ import annotations

import argparse

import numpy as np

from switchgain.gain import gain_bracket
from switchgain.system import EdgeSpec, NodeSpec, SwitchingSystem


def hinf_scalar(a: float, b: float, c: float, d: float, points: int = 200_000) -> float:
    z = np.exp(1j * np.linspace(0.0, np.pi, points))
    return float(np.max(np.abs(c * b / (z - a) + d)))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, default in (("a", 0.5), ("b", 1.0), ("c", 1.0), ("d", 0.0)):
        parser.add_argument(f"--{name}", type=float, default=default)
    parser.add_argument("--horizon", type=int, default=1)
    parser.add_argument("--lower-horizon", type=int, default=20)
    parser.add_argument("--tol", type=float, default=1e-4)
    args = parser.parse_args()

    sys = SwitchingSystem(
        (NodeSpec("v", 1),),
        (EdgeSpec("v", "v", 1, [[args.a]], [[args.b]], [[args.c]], [[args.d]]),),
        1,
        1,
    )
    br = gain_bracket(sys, args.horizon, args.tol, lower_horizon=args.lower_horizon)
    ref = hinf_scalar(args.a, args.b, args.c, args.d)
    print(f"H-infinity (frequency grid): {ref:.6f}")
    print(f"bracket: [{br.lower:.6f}, {br.upper:.6f}]  contains reference: {br.lower <= ref <= br.upper + args.tol}")


if __name__ == "__main__":
    main()
