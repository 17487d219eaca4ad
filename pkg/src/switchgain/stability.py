"""Sufficient internal-stability test with lifted quadratic multinorms.

Upper bound: smallest ``rho`` (by bisection) such that some family
``P_v > 0`` satisfies ``A_pi^T P_end A_pi <= rho^(2T) P_start`` on every
path of length ``T``. Lower bound: ``max rho(A_c)^(1/|c|)`` over closed walks
``c`` of length at most ``T + 2``. Only the upper bound can certify
stability and only the lower bound can certify instability; a gap between
them is reported as is.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import lmi
from .system import SwitchingSystem, enumerate_paths

MAX_BISECTION_STEPS = 40


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNKNOWN = "unknown"


@dataclass
class StabilityCertificate:
    rho_upper: float
    rho_lower: float
    horizon: int
    P: dict[str, np.ndarray] = field(default_factory=dict)
    lower_cycle: tuple[int, ...] = ()
    inconclusive_steps: int = 0

    @property
    def flagged(self) -> bool:
        return self.inconclusive_steps > 0

    def to_dict(self) -> dict:
        return {
            "rho_upper": self.rho_upper,
            "rho_lower": self.rho_lower,
            "horizon": self.horizon,
            "lower_cycle": list(self.lower_cycle),
            "inconclusive_steps": self.inconclusive_steps,
            "P": {v: M.tolist() for v, M in self.P.items()},
        }


def _path_A(pi) -> np.ndarray:
    M = np.eye(pi.edges[0].A.shape[1])
    for e in pi.edges:
        M = e.A @ M
    return M


def cycle_lower_bound(sys: SwitchingSystem, max_length: int) -> tuple[float, tuple[int, ...]]:
    best, arg = 0.0, ()
    for length in range(1, max_length + 1):
        for v in sys.node_names:
            if sys.dims[v] == 0:
                continue
            for pi in enumerate_paths(sys, length, start=v, end=v):
                rho = max(abs(np.linalg.eigvals(_path_A(pi)))) ** (1.0 / length)
                if rho > best:
                    best, arg = float(rho), pi.labels
    return best, arg


def _lifted_problem(sys: SwitchingSystem, T: int, rho: float) -> lmi.LmiProblem:
    prob = lmi.LmiProblem()
    for v in sys.node_names:
        n = sys.dims[v]
        prob.add_variable(v, n)
        # homogeneous in P, so P >= I is the same as P > 0
        prob.add_constraint(-np.eye(n), [(v, np.eye(n), 1.0)], "psd", name=f"P_{v}")
    for pi in enumerate_paths(sys, T):
        A = _path_A(pi) / rho**T
        n0 = A.shape[1]
        if n0 == 0:
            continue
        prob.add_constraint(
            np.zeros((n0, n0)),
            [(pi.target, A, 1.0), (pi.source, np.eye(n0), -1.0)],
            "nsd",
            name=f"path {pi.labels}",
        )
    return prob


def quadratic_cjsr_bound(sys: SwitchingSystem, T: int = 1, tol: float = 1e-4, backend: str | None = None) -> StabilityCertificate:
    if T < 1:
        raise ValueError("lift horizon T must be >= 1")
    rho_lower, cycle = cycle_lower_bound(sys, T + 2)
    norms = [np.linalg.norm(e.A, 2) if e.A.size else 0.0 for e in sys.edges]
    hi = max(norms, default=0.0)
    identity = {v: np.eye(n) for v, n in sys.dims.items()}
    cert = StabilityCertificate(hi, rho_lower, T, identity, cycle)
    if hi == 0.0:
        return cert
    lo = min(rho_lower, hi)
    steps = 0
    while hi - lo > tol and steps < MAX_BISECTION_STEPS:
        steps += 1
        mid = 0.5 * (lo + hi)
        if mid <= 0.0:
            break
        res = lmi.solve_feasibility(_lifted_problem(sys, T, mid), backend)
        if res.feasible:
            hi = mid
            cert.P = res.witness
        else:
            if res.status is lmi.Status.INCONCLUSIVE:
                cert.inconclusive_steps += 1
            lo = mid
    cert.rho_upper = float(hi)
    return cert


def classify(cert: StabilityCertificate, tol: float = 1e-4) -> Verdict:
    if cert.rho_upper < 1.0 - tol:
        return Verdict.STABLE
    if cert.rho_lower > 1.0 + tol:
        return Verdict.UNSTABLE
    return Verdict.UNKNOWN


def check_internal_stability(sys: SwitchingSystem, T: int = 1, tol: float = 1e-4, backend: str | None = None) -> Verdict:
    return classify(quadratic_cjsr_bound(sys, T, tol, backend), tol)
