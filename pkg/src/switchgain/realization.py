"""Unobservable / reachable subspaces and minimal rectangular realizations.

The unobservable subspace at node ``v`` is the set of states producing zero
output along every path leaving ``v``; it is the limit of::

    C_{v,1}   = ker( sum_{(v,u,s)} C_s^T C_s )
    C_{v,k+1} = C_{v,1}  intersected with  { x : A_s x in C_{u,k} for every (v,u,s) }

We carry the accumulated Gramian in factored form ``S^T S`` (stacked and
QR-compressed), so that rank decisions are made on singular values of ``S``
rather than on their squares. Reachable subspaces are the orthogonal
complements of the unobservable subspaces of the dual system.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from .system import SwitchingSystem, dual_system

EPS = np.finfo(float).eps


@dataclass
class SubspaceFamily:
    kind: str  # "unobservable" or "reachable"
    bases: dict[str, np.ndarray]
    iterations: int = 0
    ambiguous: bool = False
    # smallest ratio (nonzero singular value / threshold) seen when deciding ranks
    rank_margin: float = np.inf

    def dims(self) -> dict[str, int]:
        return {v: B.shape[1] for v, B in self.bases.items()}


@dataclass
class MinimizationReport:
    history: list[dict[str, int]] = field(default_factory=list)
    ambiguous: bool = False

    @property
    def final_dims(self) -> dict[str, int]:
        return self.history[-1]

    @property
    def iterations(self) -> int:
        return len(self.history) - 1

    @property
    def zero_dim_nodes(self) -> list[str]:
        return [v for v, n in self.final_dims.items() if n == 0]

    def to_dict(self) -> dict:
        return {
            "history": self.history,
            "final_dims": self.final_dims,
            "iterations": self.iterations,
            "zero_dim_nodes": self.zero_dim_nodes,
            "ambiguous_rank_decision": self.ambiguous,
        }


def orth_complement(Q: np.ndarray, n: int | None = None) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(Q)``."""
    n = Q.shape[0] if n is None else n
    k = Q.shape[1]
    if k == 0:
        return np.eye(n)
    if k >= n:
        return np.zeros((n, 0))
    U, _, _ = np.linalg.svd(Q, full_matrices=True)
    return U[:, k:]


def _compress(M: np.ndarray) -> np.ndarray:
    """Square-root factor with the same Gram matrix and at most ``ncols`` rows."""
    rows, cols = M.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows <= cols:
        return M
    return np.linalg.qr(M, mode="r")


def _kernel(S: np.ndarray, nrows_stacked: int, tol: float | None):
    """Kernel basis of ``S`` plus the smallest (kept singular value / threshold) ratio."""
    n = S.shape[1]
    if n == 0:
        return np.zeros((0, 0)), np.inf, False
    if S.shape[0] == 0:
        return np.eye(n), np.inf, False
    _, s, Vt = np.linalg.svd(S, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rel = tol if tol is not None else max(nrows_stacked, n) * EPS
    thresh = rel * smax
    if smax == 0.0:
        return np.eye(n), np.inf, False
    rank = int(np.sum(s > thresh))
    # ambiguous when some singular value sits within 10x of the threshold (either side)
    ambiguous = bool(np.any((s > thresh / 10) & (s < thresh * 10)))
    kept = s[:rank]
    margin = float(kept[-1] / thresh) if rank else np.inf
    return Vt[rank:].T.copy(), margin, ambiguous


def _subspace_distance(P: np.ndarray, Q: np.ndarray) -> float:
    if P.shape[1] != Q.shape[1]:
        return np.inf
    if P.shape[1] == 0 or P.shape[1] == P.shape[0]:
        return 0.0
    return float(np.max(np.sin(subspace_angles(P, Q))))


def unobservable_subspaces(sys: SwitchingSystem, tol: float | None = None) -> SubspaceFamily:
    """Orthonormal bases of the unobservable subspace at every node.

    ``tol`` is a relative rank threshold on singular values; by default it is
    ``max(rows, cols) * eps``, with ``rows`` the number of stacked rows the
    compressed factor stands for.
    """
    dims = sys.dims
    first: dict[str, np.ndarray] = {}
    for v in sys.node_names:
        Cs = [e.C for e in sys.out_edges(v)]
        first[v] = _compress(np.vstack(Cs)) if Cs else np.zeros((0, dims[v]))

    factors = dict(first)
    stacked_rows = {v: sum(e.C.shape[0] for e in sys.out_edges(v)) for v in sys.node_names}
    family = SubspaceFamily("unobservable", {})
    margin, ambiguous = np.inf, False
    bases = {}
    for v in sys.node_names:
        bases[v], mg, amb = _kernel(factors[v], stacked_rows[v], tol)
        margin, ambiguous = min(margin, mg), ambiguous or amb

    cap = max(1, sys.total_dim)
    iterations = 1
    while iterations < cap:
        new_factors, new_rows = {}, {}
        for v in sys.node_names:
            pieces = [first[v]]
            rows = sum(e.C.shape[0] for e in sys.out_edges(v))
            for e in sys.out_edges(v):
                pieces.append(factors[e.target] @ e.A)
                rows += stacked_rows[e.target]
            M = _compress(np.vstack(pieces)) if dims[v] else np.zeros((0, 0))
            scale = np.linalg.norm(M, 2) if M.size else 0.0
            new_factors[v] = M / scale if scale > 0 else M
            new_rows[v] = rows
        factors, stacked_rows = new_factors, new_rows
        iterations += 1

        new_bases = {}
        step_margin, step_amb = np.inf, False
        for v in sys.node_names:
            new_bases[v], mg, amb = _kernel(factors[v], stacked_rows[v], tol)
            step_margin, step_amb = min(step_margin, mg), step_amb or amb
        margin, ambiguous = min(margin, step_margin), ambiguous or step_amb
        settled = all(
            new_bases[v].shape[1] == bases[v].shape[1] and _subspace_distance(new_bases[v], bases[v]) < 1e-8
            for v in sys.node_names
        )
        bases = new_bases
        if settled:
            break

    family.bases = bases
    family.iterations = iterations
    family.rank_margin = margin
    family.ambiguous = ambiguous
    return family


def reachable_subspaces(sys: SwitchingSystem, tol: float | None = None) -> SubspaceFamily:
    """Reachable subspace at every node, via the unobservable subspaces of the dual."""
    dual = unobservable_subspaces(dual_system(sys), tol)
    bases = {v: orth_complement(Q, sys.dims[v]) for v, Q in dual.bases.items()}
    return SubspaceFamily("reachable", bases, dual.iterations, dual.ambiguous, dual.rank_margin)


def project_system(sys: SwitchingSystem, bases: dict[str, np.ndarray]) -> SwitchingSystem:
    """Restrict the dynamics to the subspaces spanned by ``bases`` (orthonormal columns)."""
    dims = sys.dims
    # a full-width basis is replaced by the identity so minimal parts keep their coordinates
    use = {v: (np.eye(dims[v]) if Q.shape[1] == dims[v] else Q) for v, Q in bases.items()}
    nodes = tuple(type(node)(node.name, use[node.name].shape[1]) for node in sys.nodes)
    edges = []
    for e in sys.edges:
        Lu, Lv = use[e.source], use[e.target]
        edges.append(e.replace(A=Lv.T @ e.A @ Lu, B=Lv.T @ e.B, C=e.C @ Lu, D=e.D))
    return sys.with_parts(nodes=nodes, edges=edges)


def restrict_to_reachable(sys: SwitchingSystem, family: SubspaceFamily) -> SwitchingSystem:
    if family.kind != "reachable":
        raise ValueError("expected a reachable subspace family")
    return project_system(sys, family.bases)


def restrict_to_observable(sys: SwitchingSystem, family: SubspaceFamily) -> SwitchingSystem:
    if family.kind != "unobservable":
        raise ValueError("expected an unobservable subspace family")
    complements = {v: orth_complement(Q, sys.dims[v]) for v, Q in family.bases.items()}
    return project_system(sys, complements)


def minimize(sys: SwitchingSystem, tol: float | None = None) -> tuple[SwitchingSystem, MinimizationReport]:
    """Alternate reachable and observable restrictions until node dimensions settle."""
    sys.require_valid()
    report = MinimizationReport(history=[dict(sys.dims)])
    current = sys
    for _ in range(max(1, sys.total_dim)):
        reach = reachable_subspaces(current, tol)
        current = restrict_to_reachable(current, reach)
        unobs = unobservable_subspaces(current, tol)
        current = restrict_to_observable(current, unobs)
        report.ambiguous = report.ambiguous or reach.ambiguous or unobs.ambiguous
        report.history.append(dict(current.dims))
        if report.history[-1] == report.history[-2]:
            break
    return current, report


def is_minimal(sys: SwitchingSystem, tol: float | None = None) -> bool:
    reach = reachable_subspaces(sys, tol)
    unobs = unobservable_subspaces(sys, tol)
    return all(reach.bases[v].shape[1] == sys.dims[v] for v in sys.node_names) and all(
        Q.shape[1] == 0 for Q in unobs.bases.values()
    )
