"""Numerical check of dissipation inequalities for candidate storage functions.

For every transition ``u -> v`` with matrices ``(A, B, C, D)`` we check

    F_target(A x + B w) + ||C x + D w||^2 <= F_source(x) + gamma^2 ||w||^2

where each ``F`` is a max of quadratic forms. Three storage shapes are
accepted: a dict of one matrix per node, a :class:`QuadraticStorage`, or a
path-dependent :class:`HorizonCertificate` (whose transitions are the
length-``K+1`` paths).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .gain import HorizonCertificate
from .storage import QuadraticStorage
from .system import EdgeSpec, SwitchingSystem, enumerate_paths

MAX_ADVERSARIAL_PAIRS = 64


@dataclass
class DissipationReport:
    max_violation: float
    sampled_violation: float
    adversarial_violation: float
    exact_violation: float | None
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class _Transition:
    edge: EdgeSpec
    source: list[np.ndarray]
    target: list[np.ndarray]


def _transitions(sys: SwitchingSystem, storage) -> list[_Transition]:
    if isinstance(storage, HorizonCertificate):
        K = storage.K
        return [
            _Transition(rho.edges[0], [storage.X[rho.labels[:K]]], [storage.X[rho.labels[1:]]])
            for rho in enumerate_paths(sys, K + 1)
        ]
    if isinstance(storage, QuadraticStorage):
        return [_Transition(e, storage.matrices(e.source), storage.matrices(e.target)) for e in sys.edges]
    if isinstance(storage, Mapping):
        return [_Transition(e, [np.asarray(storage[e.source])], [np.asarray(storage[e.target])]) for e in sys.edges]
    raise TypeError(f"unsupported storage type {type(storage).__name__}")


def _max_quad(pieces: list[np.ndarray], X: np.ndarray) -> np.ndarray:
    if not pieces or X.shape[1] == 0:
        return np.zeros(X.shape[0])
    stack = np.stack(pieces)
    return np.einsum("ki,pij,kj->kp", X, stack, X).max(axis=1)


def _residual(tr: _Transition, gamma: float, XW: np.ndarray) -> np.ndarray:
    A, B, C, D = tr.edge.matrices()
    n = A.shape[1]
    x, w = XW[:, :n], XW[:, n:]
    nxt = x @ A.T + w @ B.T
    z = x @ C.T + w @ D.T
    lhs = _max_quad(tr.target, nxt) + np.sum(z * z, axis=1)
    rhs = _max_quad(tr.source, x) + gamma**2 * np.sum(w * w, axis=1)
    return lhs - rhs


def _pair_matrix(tr: _Transition, S: np.ndarray, T: np.ndarray, gamma: float) -> np.ndarray:
    A, B, C, D = tr.edge.matrices()
    n, d = A.shape[1], B.shape[1]
    AB, CD = np.hstack([A, B]), np.hstack([C, D])
    M = AB.T @ T @ AB + CD.T @ CD
    M[:n, :n] -= S
    M[n:, n:] -= gamma**2 * np.eye(d)
    return 0.5 * (M + M.T)


def verify_dissipation(
    sys: SwitchingSystem, storage, gamma: float, samples: int = 10_000, seed: int | None = 0
) -> DissipationReport:
    """Worst dissipation violation over random and adversarial unit ``(x, w)``.

    Violations are measured on the unit sphere of ``(x, w)``; a positive
    ``max_violation`` means the inequality fails somewhere. When every node
    carries a single quadratic, ``exact_violation`` is the largest eigenvalue
    of the residual matrices, which decides the inequality exactly.
    """
    rng = np.random.default_rng(seed)
    transitions = _transitions(sys, storage)
    d = sys.input_dim

    sampled = -np.inf
    counts = np.bincount(rng.integers(0, len(transitions), size=samples), minlength=len(transitions))
    for tr, count in zip(transitions, counts):
        if count == 0:
            continue
        dim = tr.edge.A.shape[1] + d
        if dim == 0:
            continue
        XW = rng.standard_normal((count, dim))
        XW /= np.linalg.norm(XW, axis=1, keepdims=True)
        sampled = max(sampled, float(_residual(tr, gamma, XW).max()))

    adversarial = -np.inf
    exact = -np.inf
    single = all(len(tr.source) == 1 and len(tr.target) == 1 for tr in transitions)
    for tr in transitions:
        dim = tr.edge.A.shape[1] + d
        if dim == 0:
            continue
        pairs = [(S, T) for S in tr.source or [np.zeros((0, 0))] for T in tr.target or [np.zeros((0, 0))]]
        if len(pairs) > MAX_ADVERSARIAL_PAIRS:
            idx = rng.choice(len(pairs), MAX_ADVERSARIAL_PAIRS, replace=False)
            pairs = [pairs[i] for i in idx]
        for S, T in pairs:
            S = S if S.size or tr.edge.A.shape[1] == 0 else np.zeros((tr.edge.A.shape[1],) * 2)
            T = T if T.size or tr.edge.A.shape[0] == 0 else np.zeros((tr.edge.A.shape[0],) * 2)
            vals, vecs = np.linalg.eigh(_pair_matrix(tr, S, T, gamma))
            if single:
                exact = max(exact, float(vals[-1]))
            top = vecs[:, -1:].T
            adversarial = max(adversarial, float(_residual(tr, gamma, np.vstack([top, -top])).max()))

    worst = max(sampled, adversarial, exact if single else -np.inf)
    return DissipationReport(
        max_violation=float(worst),
        sampled_violation=float(sampled),
        adversarial_violation=float(adversarial),
        exact_violation=float(exact) if single else None,
        samples=int(samples),
    )
