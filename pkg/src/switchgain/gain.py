"""Certified brackets on the L2 induced gain.

* Lower bound at horizon ``K``: the largest induced norm of ``D_pi`` over all
  paths with ``K`` edges. Nondecreasing in ``K`` and converging to the gain.
* Upper bound at horizon ``K``: smallest ``gamma`` for which path-dependent
  quadratic storages ``X_pi`` (one per length-``K`` path, attached to the
  path's first node) satisfy, for every length-``K+1`` path ``rho`` with
  first edge ``(A, B, C, D)``, ``pi1 = rho(1:K)`` and ``pi2 = rho(2:K+1)``::

      [A B]^T X_pi2 [A B] + [C D]^T [C D] - diag(X_pi1, gamma^2 I) <= 0.

  Nonincreasing in ``K`` and converging to the gain from above.

The LMIs are assembled with the input scaled by ``1 / gamma`` (``B/gamma``,
``D/gamma`` against level 1); this is a congruence, so the witness ``X`` is
the same as for the unscaled inequality, but the problem stays well
conditioned when the gain is far from 1.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import lmi
from .realization import MinimizationReport, minimize
from .stability import StabilityCertificate, Verdict, classify, quadratic_cjsr_bound
from .system import EdgeSpec, Path, SwitchingSystem, enumerate_paths, iter_path_matrices

log = logging.getLogger(__name__)


class NoUpperBoundError(RuntimeError):
    pass


class UnstableSystemError(RuntimeError):
    def __init__(self, certificate: StabilityCertificate):
        self.certificate = certificate
        super().__init__(
            f"system is not internally stable: a closed walk has growth rate {certificate.rho_lower:.6g} > 1"
        )


def _parse_p(p) -> float:
    value = p
    if isinstance(p, str):
        text = p.strip().lower()
        try:
            value = math.inf if text in ("inf", "infinity", "oo") else float(text)
        except ValueError:
            value = None
    if value is not None and (value in (1, 2) or value == math.inf):
        return float(value)
    raise ValueError(f"p={p!r} is not supported: induced norms are only computed for p in {{1, 2, inf}}")


def _induced_norm(D: np.ndarray, p: float) -> float:
    if D.size == 0:
        return 0.0
    if p == 2:
        return float(np.linalg.norm(D, 2))
    if p == 1:
        return float(np.abs(D).sum(axis=0).max())
    return float(np.abs(D).sum(axis=1).max())


def lower_bound_with_path(sys: SwitchingSystem, K: int, p=2) -> tuple[float, Path | None]:
    """Exact maximum of ``||D_pi||_p`` over every path with ``K`` edges, and a maximizer."""
    if K < 1:
        raise ValueError("horizon K must be >= 1")
    p = _parse_p(p)
    best, arg = 0.0, None
    for pi, pm in iter_path_matrices(sys, K):
        value = _induced_norm(pm.D, p)
        if value > best or arg is None:
            best, arg = value, pi
    return best, arg


def lower_bound(sys: SwitchingSystem, K: int, p=2) -> float:
    return lower_bound_with_path(sys, K, p)[0]


@dataclass
class HorizonCertificate:
    gamma: float
    K: int
    X: dict[tuple[int, ...], np.ndarray]
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "K": self.K,
            "residual": self.residual,
            "X": [{"path": list(k), "matrix": v.tolist()} for k, v in self.X.items()],
        }


def _var(labels: tuple[int, ...]) -> str:
    return "X" + ",".join(map(str, labels))


def _dissipation_terms(edge: EdgeSpec, gamma: float):
    """Constant part and left factors of the scaled dissipation block of one edge."""
    A, B, C, D = edge.matrices()
    n = A.shape[1]
    Bs, Ds = B / gamma, D / gamma
    d = B.shape[1]
    CD = np.hstack([C, Ds])
    constant = CD.T @ CD
    constant[n:, n:] -= np.eye(d)
    AB = np.hstack([A, Bs])
    first = np.hstack([np.eye(n), np.zeros((n, d))])
    return constant, AB, first


def horizon_problem(sys: SwitchingSystem, K: int, gamma: float) -> lmi.LmiProblem:
    if K < 1:
        raise ValueError("horizon K must be >= 1")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    prob = lmi.LmiProblem()
    for pi in enumerate_paths(sys, K):
        n = sys.dims[pi.source]
        name = prob.add_variable(_var(pi.labels), n)
        prob.add_constraint(np.zeros((n, n)), [(name, np.eye(n), 1.0)], "pd", name=f"{name}>0")
    for rho in enumerate_paths(sys, K + 1):
        labels = rho.labels
        constant, AB, first = _dissipation_terms(rho.edges[0], gamma)
        prob.add_constraint(
            constant,
            [(_var(labels[1:]), AB, 1.0), (_var(labels[:K]), first, -1.0)],
            "nsd",
            name=f"pair {labels}",
        )
    return prob


@dataclass
class HorizonResult:
    status: lmi.Status
    certificate: HorizonCertificate | None = None
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is lmi.Status.FEASIBLE


def horizon_upper_bound_feasible(
    sys: SwitchingSystem, K: int, gamma: float, backend: str | None = None
) -> HorizonResult:
    prob = horizon_problem(sys, K, gamma)
    res = lmi.solve_feasibility(prob, backend)
    if not res.feasible:
        return HorizonResult(res.status, None, res.reason)
    X = {pi.labels: res.witness[_var(pi.labels)] for pi in enumerate_paths(sys, K)}
    return HorizonResult(res.status, HorizonCertificate(float(gamma), K, X, res.residual), res.reason)


@dataclass
class UpperBound:
    gamma: float
    certificate: HorizonCertificate
    K: int
    steps: int = 0
    inconclusive_steps: int = 0

    def __iter__(self):
        # unpacks as (gamma, certificate)
        return iter((self.gamma, self.certificate))


def upper_bound_bisect(
    sys: SwitchingSystem,
    K: int,
    tol: float = 1e-3,
    backend: str | None = None,
    max_doublings: int = 60,
    floor: float | None = None,
) -> UpperBound:
    """Smallest certified ``gamma`` at horizon ``K``, to absolute accuracy ``tol``."""
    lo = lower_bound(sys, K) if floor is None else floor
    hi = max(1.0, 2.0 * lo)
    cert = None
    inconclusive = 0
    for _ in range(max_doublings + 1):
        res = horizon_upper_bound_feasible(sys, K, hi, backend)
        if res.feasible:
            cert = res.certificate
            break
        inconclusive += res.status is lmi.Status.INCONCLUSIVE
        lo = max(lo, hi) if res.status is lmi.Status.INFEASIBLE else lo
        hi *= 2.0
    if cert is None:
        raise NoUpperBoundError(f"no upper bound certified at horizon K={K}")
    steps = 0
    while hi - lo > tol:
        steps += 1
        mid = 0.5 * (lo + hi)
        res = horizon_upper_bound_feasible(sys, K, mid, backend)
        log.debug("K=%d gamma=%.6g -> %s", K, mid, res.status.value)
        if res.feasible:
            hi, cert = mid, res.certificate
        else:
            inconclusive += res.status is lmi.Status.INCONCLUSIVE
            lo = mid
    return UpperBound(float(hi), cert, K, steps, inconclusive)


@dataclass
class GainBracket:
    p: int
    lower: float
    lower_K: int
    upper: float | None
    upper_K: int | None
    stability: Verdict
    was_minimal: bool
    minimization: MinimizationReport | None = None
    stability_certificate: StabilityCertificate | None = None
    certificate: HorizonCertificate | None = None
    lower_path: tuple[int, ...] = ()
    minimal_system: SwitchingSystem | None = field(default=None, repr=False)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def relative_gap(self) -> float:
        """``(upper - lower) / upper``."""
        return self.width / self.upper if self.upper else 0.0

    def to_dict(self, include_certificate: bool = False) -> dict:
        out = {
            "p": self.p,
            "lower": self.lower,
            "lower_K": self.lower_K,
            "lower_path": list(self.lower_path),
            "upper": self.upper,
            "upper_K": self.upper_K,
            "relative_gap": self.relative_gap if self.upper is not None else None,
            "stability": self.stability.value,
            "was_minimal": self.was_minimal,
            "minimization": self.minimization.to_dict() if self.minimization else None,
            "stability_certificate": self.stability_certificate.to_dict() if self.stability_certificate else None,
        }
        if include_certificate and self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        return out


def gain_bracket(
    sys: SwitchingSystem,
    K: int,
    tol: float = 1e-3,
    lower_horizon: int | None = None,
    stability_horizon: int = 1,
    backend: str | None = None,
) -> GainBracket:
    """Minimize, check stability, then bound the L2 gain from both sides.

    Raises :class:`UnstableSystemError` when a closed walk proves
    instability; warns and continues when stability is undecided.
    """
    sys.require_valid()
    reduced, report = minimize(sys)
    cert = quadratic_cjsr_bound(reduced, stability_horizon, backend=backend)
    verdict = classify(cert)
    if verdict is Verdict.UNSTABLE:
        raise UnstableSystemError(cert)
    if verdict is Verdict.UNKNOWN:
        warnings.warn(
            f"internal stability not certified (rho in [{cert.rho_lower:.4g}, {cert.rho_upper:.4g}]); "
            "the gain may be unbounded",
            RuntimeWarning,
            stacklevel=2,
        )
    lower_K = lower_horizon or K
    lower, lower_path = lower_bound_with_path(reduced, lower_K)
    floor = lower if lower_K == K else lower_bound(reduced, K)
    upper = upper_bound_bisect(reduced, K, tol, backend, floor=floor)
    return GainBracket(
        p=2,
        lower=lower,
        lower_K=lower_K,
        upper=upper.gamma,
        upper_K=K,
        stability=verdict,
        was_minimal=report.iterations <= 1 and report.history[0] == report.final_dims,
        minimization=report,
        stability_certificate=cert,
        certificate=upper.certificate,
        lower_path=lower_path.labels if lower_path is not None else (),
        minimal_system=reduced,
    )


def node_storage_problem(sys: SwitchingSystem, gamma: float) -> lmi.LmiProblem:
    """One quadratic ``Q_v`` per node, dissipative at level ``gamma`` on every edge."""
    prob = lmi.LmiProblem()
    for v in sys.node_names:
        n = sys.dims[v]
        prob.add_variable(v, n)
        prob.add_constraint(np.zeros((n, n)), [(v, np.eye(n), 1.0)], "pd", name=f"Q_{v}>0")
    for e in sorted(sys.edges, key=lambda e: e.label):
        constant, AB, first = _dissipation_terms(e, gamma)
        prob.add_constraint(constant, [(e.target, AB, 1.0), (e.source, first, -1.0)], "nsd", name=f"edge {e.label}")
    return prob


def node_storage_feasible(sys: SwitchingSystem, gamma: float, backend: str | None = None):
    res = lmi.solve_feasibility(node_storage_problem(sys, gamma), backend)
    return res, (res.witness if res.feasible else None)


def scale_dynamics(sys: SwitchingSystem, factor: float) -> SwitchingSystem:
    """Multiply every ``A`` and ``B`` by ``factor`` (``C``, ``D`` unchanged)."""
    return sys.with_parts(edges=[e.replace(A=factor * e.A, B=factor * e.B) for e in sys.edges])


@dataclass
class ScaledCheckResult:
    passed: bool
    scaled_status: lmi.Status
    node_status: lmi.Status | None
    node_storage: dict[str, np.ndarray] | None
    n: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n": self.n,
            "scaled_status": self.scaled_status.value,
            "node_status": self.node_status.value if self.node_status else None,
            "node_storage": {v: Q.tolist() for v, Q in self.node_storage.items()} if self.node_storage else None,
        }


def converse_scaled_check(sys: SwitchingSystem, backend: str | None = None) -> ScaledCheckResult:
    """Certify gain <= 1 of the sqrt(n)-inflated system, then extract node quadratics.

    A certificate at level 1 for ``(sqrt(n) A, sqrt(n) B, C, D)`` guarantees
    that the original system admits one quadratic storage per node at level 1;
    that storage is then computed on the original system.
    """
    if not sys.is_square:
        raise ValueError("the converse check needs every node to have the same state dimension")
    n = sys.nodes[0].dim
    inflated = scale_dynamics(sys, math.sqrt(n))
    first = horizon_upper_bound_feasible(inflated, 1, 1.0, backend)
    if not first.feasible:
        return ScaledCheckResult(False, first.status, None, None, n)
    res, Q = node_storage_feasible(sys, 1.0, backend)
    return ScaledCheckResult(res.feasible, first.status, res.status, Q, n)
