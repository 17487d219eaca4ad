"""Feasibility of finite systems of linear matrix inequalities.

Every constraint has the congruence-affine form::

    F(X) = F0 + sum_k coef_k * L_k^T X_{var_k} L_k

with ``F0`` symmetric, and is required to be negative/positive semidefinite
(``"nsd"``/``"psd"``) or definite (``"nd"``/``"pd"``). Strict constraints are
closed off with a margin ``eps`` (``F <= -eps I`` or ``F >= eps I``).

Two backends are provided. ``"clarabel"`` assembles the conic program
directly (fast, used by default); ``"cvxpy"`` goes through cvxpy and is kept
as an independent cross-check. The ``SWITCHGAIN_SOLVER`` environment variable
selects the default. Whatever the backend says, a feasible answer is only
reported after the witness passes an eigenvalue check of every constraint.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

RESIDUAL_TOL = 1e-7
DEFAULT_STRICT_SCALE = 1e-8


class Status(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Term:
    var: str
    left: np.ndarray
    coef: float = 1.0


@dataclass
class Constraint:
    constant: np.ndarray
    terms: list[Term]
    sense: str
    margin: float = 0.0
    name: str = ""

    @property
    def size(self) -> int:
        return self.constant.shape[0]


_SENSES = ("nsd", "nd", "psd", "pd")


class LmiProblem:
    """Symmetric matrix variables plus congruence-affine matrix inequalities."""

    def __init__(self):
        self.variables: dict[str, int] = {}
        self.constraints: list[Constraint] = []

    def add_variable(self, name: str, size: int) -> str:
        if name in self.variables:
            raise ValueError(f"variable {name!r} already declared")
        if size < 0:
            raise ValueError("variable size must be nonnegative")
        self.variables[name] = int(size)
        return name

    def add_constraint(self, constant, terms=(), sense="nsd", margin=None, name=""):
        if sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}")
        F0 = np.atleast_2d(np.asarray(constant, dtype=float))
        if F0.shape[0] != F0.shape[1]:
            raise ValueError("constant term must be square")
        if not np.allclose(F0, F0.T, atol=1e-12 * max(1.0, np.abs(F0).max(initial=0.0))):
            raise ValueError("constant term must be symmetric")
        F0 = 0.5 * (F0 + F0.T)
        k = F0.shape[0]
        checked = []
        for term in terms:
            if not isinstance(term, Term):
                term = Term(*term)
            if term.var not in self.variables:
                raise KeyError(f"unknown variable {term.var!r}")
            L = np.asarray(term.left, dtype=float).reshape(self.variables[term.var], k)
            checked.append(Term(term.var, L, float(term.coef)))
        if margin is None:
            margin = 0.0
            if sense in ("nd", "pd"):
                margin = DEFAULT_STRICT_SCALE * max(1.0, np.linalg.norm(F0, 2) if k else 0.0)
        constraint = Constraint(F0, checked, sense, float(margin), name)
        self.constraints.append(constraint)
        return constraint

    def evaluate(self, constraint: Constraint, assignment: Mapping[str, np.ndarray]) -> np.ndarray:
        F = constraint.constant.copy()
        for term in constraint.terms:
            X = assignment[term.var]
            F += term.coef * (term.left.T @ X @ term.left)
        return 0.5 * (F + F.T)


@dataclass
class FeasibilityResult:
    status: Status
    witness: dict[str, np.ndarray] | None = None
    residual: float = np.inf
    reason: str = ""
    backend: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def constraint_slack(problem: LmiProblem, c: Constraint, witness) -> float:
    """Signed slack of one constraint at ``witness``; negative means violated."""
    F = problem.evaluate(c, witness)
    if c.size == 0:
        return np.inf
    eig = np.linalg.eigvalsh(F)
    if c.sense in ("nsd", "nd"):
        return -eig[-1]
    return eig[0]


def verify_witness(problem: LmiProblem, witness) -> tuple[bool, float, str]:
    """Eigenvalue check of every constraint, independent of any backend.

    Returns ``(ok, max_violation, message)``; ``max_violation`` is the worst
    amount by which a non-strict constraint fails (0 when all hold).
    """
    worst = 0.0
    for i, c in enumerate(problem.constraints):
        slack = constraint_slack(problem, c, witness)
        if c.sense in ("nd", "pd"):
            if slack < c.margin / 2:
                return False, max(worst, c.margin / 2 - slack), f"strict constraint {c.name or i} slack {slack:.3g}"
        else:
            worst = max(worst, -slack)
            if -slack > RESIDUAL_TOL:
                return False, worst, f"constraint {c.name or i} violated by {-slack:.3g}"
    return True, worst, ""


# ---------------------------------------------------------------------------
# direct conic assembly


def _svec_matrix_cols(M: np.ndarray) -> np.ndarray:
    """Clarabel triangle vectorization (upper triangle, by columns, off-diagonals times sqrt 2)
    of the trailing two axes of ``M``."""
    k = M.shape[-1]
    rows, cols = np.tril_indices(k)  # row-major lower == column-major upper for symmetric M
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return M[..., rows, cols] * scale


def _solve_clarabel(problem: LmiProblem, settings: Mapping | None = None) -> FeasibilityResult:
    import clarabel

    offsets = {}
    nvar = 0
    for name, n in problem.variables.items():
        offsets[name] = nvar
        nvar += n * (n + 1) // 2

    rows, cols, vals = [], [], []
    b_parts = []
    cones = []
    row0 = 0
    for c in problem.constraints:
        k = c.size
        if k == 0:
            continue
        # Ax + s = b with s = svec(-F - margin I) (nsd/nd) or svec(F - margin I) (psd/pd)
        sign = 1.0 if c.sense in ("nsd", "nd") else -1.0
        shift = c.margin * np.eye(k)
        if c.sense in ("nsd", "nd"):
            b_mat = -c.constant - shift
        else:
            b_mat = c.constant - shift
        b_parts.append(_svec_matrix_cols(b_mat))
        for term in c.terms:
            n = term.left.shape[0]
            if n == 0:
                continue
            L = term.left
            iu, ju = np.triu_indices(n)
            # L^T E_ij L for each (i<=j): outer(L_i, L_j) + outer(L_j, L_i) (halved on diagonal)
            outer = np.einsum("pa,qb->pqab", L, L)
            blocks = outer[iu, ju] + outer[ju, iu]
            blocks[iu == ju] *= 0.5
            entries = sign * term.coef * _svec_matrix_cols(blocks)  # (nvec_var, nvec_con)
            var_idx = offsets[term.var] + np.arange(len(iu))
            r, q = np.nonzero(entries)
            rows.append(row0 + q)
            cols.append(var_idx[r])
            vals.append(entries[r, q])
        nrow = k * (k + 1) // 2
        cones.append(clarabel.PSDTriangleConeT(k) if k > 1 else clarabel.NonnegativeConeT(1))
        row0 += nrow

    if row0 == 0:
        witness = {name: np.zeros((n, n)) for name, n in problem.variables.items()}
        return FeasibilityResult(Status.FEASIBLE, witness, 0.0, backend="clarabel")

    A = sp.csc_matrix(
        (np.concatenate(vals) if vals else [], (np.concatenate(rows) if rows else [], np.concatenate(cols) if cols else [])),
        shape=(row0, max(nvar, 1)),
    )
    b = np.concatenate(b_parts)
    P = sp.csc_matrix((max(nvar, 1), max(nvar, 1)))
    q = np.zeros(max(nvar, 1))

    opts = clarabel.DefaultSettings()
    opts.verbose = False
    for key, value in (settings or {}).items():
        setattr(opts, key, value)
    try:
        sol = clarabel.DefaultSolver(P, q, A, b, cones, opts).solve()
    except Exception as exc:  # backend failure is data, not an exception
        return FeasibilityResult(Status.INCONCLUSIVE, reason=f"clarabel failed: {exc}", backend="clarabel")

    status = str(sol.status)
    if status == "PrimalInfeasible":
        return FeasibilityResult(Status.INFEASIBLE, reason="primal infeasibility certificate", backend="clarabel")
    if status not in ("Solved", "AlmostSolved"):
        return FeasibilityResult(Status.INCONCLUSIVE, reason=f"clarabel status {status}", backend="clarabel")

    x = np.asarray(sol.x)
    witness = {}
    for name, n in problem.variables.items():
        X = np.zeros((n, n))
        iu, ju = np.triu_indices(n)
        X[iu, ju] = x[offsets[name] : offsets[name] + len(iu)]
        X[ju, iu] = X[iu, ju]
        witness[name] = X
    return FeasibilityResult(Status.FEASIBLE, witness, backend="clarabel", reason=status)


def _solve_cvxpy(problem: LmiProblem, settings: Mapping | None = None) -> FeasibilityResult:
    import cvxpy as cp

    variables = {
        name: cp.Variable((n, n), symmetric=True) for name, n in problem.variables.items() if n > 0
    }
    cons = []
    for c in problem.constraints:
        k = c.size
        if k == 0:
            continue
        expr = c.constant
        for term in c.terms:
            if term.left.shape[0] == 0:
                continue
            expr = expr + term.coef * (term.left.T @ variables[term.var] @ term.left)
        expr = 0.5 * (expr + expr.T) if not isinstance(expr, np.ndarray) else expr
        if isinstance(expr, np.ndarray):
            expr = cp.Constant(expr)
        if c.sense in ("nsd", "nd"):
            cons.append(expr << -c.margin * np.eye(k))
        else:
            cons.append(expr >> c.margin * np.eye(k))
    prob = cp.Problem(cp.Minimize(0), cons)
    solver = (settings or {}).get("solver")
    try:
        prob.solve(solver=solver)
    except Exception as exc:
        return FeasibilityResult(Status.INCONCLUSIVE, reason=f"cvxpy failed: {exc}", backend="cvxpy")
    if prob.status == cp.INFEASIBLE:
        return FeasibilityResult(Status.INFEASIBLE, reason="solver reported infeasible", backend="cvxpy")
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return FeasibilityResult(Status.INCONCLUSIVE, reason=f"cvxpy status {prob.status}", backend="cvxpy")
    witness = {}
    for name, n in problem.variables.items():
        if n == 0:
            witness[name] = np.zeros((0, 0))
        else:
            V = np.asarray(variables[name].value)
            witness[name] = 0.5 * (V + V.T)
    return FeasibilityResult(Status.FEASIBLE, witness, backend="cvxpy", reason=prob.status)


BACKENDS = {"clarabel": _solve_clarabel, "cvxpy": _solve_cvxpy}


def default_backend() -> str:
    return os.environ.get("SWITCHGAIN_SOLVER", "clarabel").lower()


def solve_feasibility(problem: LmiProblem, backend: str | None = None, settings=None) -> FeasibilityResult:
    """Decide feasibility of ``problem``.

    A ``FEASIBLE`` result always carries a witness that passed
    :func:`verify_witness`; if the backend claims feasibility but the witness
    fails the check, the result is downgraded to ``INCONCLUSIVE``.
    ``INFEASIBLE`` is returned only on a solver infeasibility certificate.
    """
    backend = backend or default_backend()
    try:
        solve = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LMI backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    result = solve(problem, settings)
    if result.status is Status.FEASIBLE:
        ok, residual, message = verify_witness(problem, result.witness)
        result.residual = residual
        if not ok:
            return FeasibilityResult(
                Status.INCONCLUSIVE, result.witness, residual, f"witness rejected: {message}", result.backend
            )
    return result
