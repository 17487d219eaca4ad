"""Quadratic storage functions of fixed paths and their truncated maxima.

For a fixed finite path ``pi`` and a level ``gamma`` above ``||D_pi||``, the
best achievable supply

    sup_w  ||C_pi x + D_pi w||^2 - gamma^2 ||w||^2

is the quadratic form ``x^T G x`` with

    G = C^T C + C^T D (gamma^2 I - D^T D)^{-1} D^T C.

It can be obtained in closed form (:func:`storage_matrix_direct`) or by a
backward Riccati-like recursion along the path (:func:`storage_matrix_dp`),
which also yields the maximizing feedback ``w_t = Phi_t x_t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .system import Path, PathMatrices, SwitchingSystem, iter_path_matrices, path_matrices, simulate


class StorageDomainError(ValueError):
    """``gamma`` does not exceed the relevant input-output norm."""


def storage_matrix_direct(sys: SwitchingSystem, pi: Path, gamma: float, pm: PathMatrices | None = None) -> np.ndarray:
    pm = path_matrices(sys, pi) if pm is None else pm
    return _storage_from_operators(pm.C, pm.D, gamma, pi)


def _storage_from_operators(C: np.ndarray, D: np.ndarray, gamma: float, pi=None) -> np.ndarray:
    ncols = D.shape[1]
    M = gamma**2 * np.eye(ncols) - D.T @ D
    try:
        L = np.linalg.cholesky(M) if ncols else np.zeros((0, 0))
    except np.linalg.LinAlgError:
        norm = np.linalg.norm(D, 2)
        raise StorageDomainError(
            f"gamma={gamma:.6g} must exceed ||D_pi||_2={norm:.6g} for path {pi}"
        ) from None
    G = C.T @ C
    if ncols:
        Y = sla.solve_triangular(L, D.T @ C, lower=True)
        G = G + Y.T @ Y
    return 0.5 * (G + G.T)


def storage_matrix_dp(sys: SwitchingSystem, pi: Path, gamma: float) -> tuple[np.ndarray, list[np.ndarray]]:
    """Backward recursion along ``pi``.

    With ``P`` the value matrix after step ``t`` (zero at the end), each step
    maximizes a concave quadratic in ``w_t``::

        H = gamma^2 I - D^T D - B^T P B      (must be positive definite)
        S = C^T D + A^T P B
        Phi_t = H^{-1} S^T
        P <- C^T C + A^T P A + S H^{-1} S^T

    Returns the initial value matrix and the gains ``[Phi_0, ..., Phi_{K-1}]``.
    """
    K = len(pi)
    d = sys.input_dim
    P = np.zeros((sys.dims[pi.target],) * 2)
    gains: list[np.ndarray] = [None] * K  # type: ignore[list-item]
    for t in range(K - 1, -1, -1):
        A, B, C, D = pi.edges[t].matrices()
        H = gamma**2 * np.eye(d) - D.T @ D - B.T @ P @ B
        S = C.T @ D + A.T @ P @ B
        try:
            L = np.linalg.cholesky(0.5 * (H + H.T)) if d else np.zeros((0, 0))
        except np.linalg.LinAlgError:
            raise StorageDomainError(
                f"step {t}: maximization over w is not concave for gamma={gamma:.6g}; "
                f"failing suffix is edges {t + 1}..{K} (labels {list(pi.labels[t:])})"
            ) from None
        if d:
            Phi = sla.cho_solve((L, True), S.T)
        else:
            Phi = np.zeros((0, A.shape[1]))
        gains[t] = Phi
        P = C.T @ C + A.T @ P @ A + S @ Phi
        P = 0.5 * (P + P.T)
    return P, gains


@dataclass
class WorstCaseRun:
    path: Path
    x0: np.ndarray
    disturbance: np.ndarray  # (K, d)
    states: list[np.ndarray]
    outputs: np.ndarray
    attained: float
    predicted: float  # x0^T G x0
    gains: list[np.ndarray]

    def to_dict(self) -> dict:
        return {
            "path": list(self.path.labels),
            "x0": self.x0.tolist(),
            "disturbance": self.disturbance.tolist(),
            "attained": self.attained,
            "predicted": self.predicted,
            "feedback_gains": [g.tolist() for g in self.gains],
        }


def worst_case_disturbance(sys: SwitchingSystem, pi: Path, gamma: float, x0) -> WorstCaseRun:
    """Replay the maximizing feedback along ``pi`` from ``x0``."""
    G, gains = storage_matrix_dp(sys, pi, gamma)
    x = np.asarray(x0, dtype=float).reshape(-1)
    d = sys.input_dim
    w = np.zeros((len(pi), d))
    state = x
    for t, e in enumerate(pi.edges):
        w[t] = gains[t] @ state
        state = e.A @ state + e.B @ w[t]
    states, z = simulate(sys, pi, x, w)
    attained = float(z @ z - gamma**2 * np.sum(w * w))
    return WorstCaseRun(pi, x, w, states, z, attained, float(x @ G @ x), gains)


@dataclass
class QuadraticStorage:
    """Per-node max of quadratic forms: ``F_v(x) = max_pi x^T G_pi x``."""

    gamma: float
    K: int
    pieces: dict[str, list[tuple[tuple[int, ...], np.ndarray]]] = field(default_factory=dict)

    def matrices(self, node: str) -> list[np.ndarray]:
        return [G for _, G in self.pieces[node]]

    def evaluate(self, node: str, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        mats = self.matrices(node)
        if not mats:
            vals = np.zeros(X.shape[0])
        else:
            stack = np.stack(mats)  # (P, n, n)
            vals = np.einsum("ki,pij,kj->kp", X, stack, X).max(axis=1)
        return float(vals[0]) if single else vals

    def norm(self, node: str, x):
        """``F_v(x) ** 0.5`` (clipped at 0 against rounding)."""
        return np.sqrt(np.maximum(self.evaluate(node, x), 0.0))

    def pruned(self, tol: float = 1e-12) -> "QuadraticStorage":
        """Drop pieces dominated by another piece (``G_i <= G_j``); exact for maxima."""
        out = {}
        for node, items in self.pieces.items():
            # larger traces first: a dominating piece has trace at least as large
            order = sorted(items, key=lambda it: -np.trace(it[1]))
            kept: list[tuple[tuple[int, ...], np.ndarray]] = []
            for labels, G in order:
                scale = max(1.0, np.abs(G).max(initial=0.0))
                dominated = any(
                    np.linalg.eigvalsh(H - G)[0] >= -tol * scale for _, H in kept
                ) if G.size else bool(kept)
                if not dominated:
                    kept.append((labels, G))
            out[node] = kept
        return QuadraticStorage(self.gamma, self.K, out)


def truncated_storage(sys: SwitchingSystem, gamma: float, K: int) -> QuadraticStorage:
    """``max`` of the path storage matrices over all length-``K`` paths leaving each node."""
    from .gain import lower_bound

    floor = lower_bound(sys, K)
    if not gamma > floor:
        raise StorageDomainError(f"gamma={gamma:.6g} must exceed the horizon-{K} lower bound {floor:.6g}")
    pieces: dict[str, list] = {v: [] for v in sys.node_names}
    for pi, pm in iter_path_matrices(sys, K):
        pieces[pi.source].append((pi.labels, _storage_from_operators(pm.C, pm.D, gamma, pi)))
    return QuadraticStorage(float(gamma), K, pieces)
