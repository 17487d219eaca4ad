"""Graph-constrained (rectangular) linear switching systems.

A system is a strongly connected labeled digraph whose nodes carry a state
dimension and whose edges carry the matrices ``(A, B, C, D)`` of the mode
taken along that edge::

    x_{t+1} = A x_t + B w_t
    z_t     = C x_t + D w_t

Time indices along a path are 0-based (``path.labels[t]`` is the label used
at time ``t``), while :func:`subpath` uses 1-based inclusive slicing, so that
``subpath(pi, 2, K)`` drops the first edge of a length-``K`` path.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import networkx as nx
import numpy as np


class InvalidSystemError(ValueError):
    """Raised when an operation needs a well-formed system and gets another."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid switching system:\n" + str(report))


def _frozen_matrix(value, what: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{what} must be a 2-D matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NodeSpec:
    name: str
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 0:
            raise ValueError(f"node {self.name!r}: dim must be a nonnegative integer")


@dataclass(frozen=True, eq=False)
class EdgeSpec:
    """One labeled edge ``source -> target`` and the mode matrices it carries.

    ``mode`` and ``original_label`` are bookkeeping only: the mode index the
    edge was lifted from, and the label it had before canonicalization.
    """

    source: str
    target: str
    label: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    mode: int | None = None
    original_label: int | None = None

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(
                self, name, _frozen_matrix(getattr(self, name), f"edge {self.label}: {name}")
            )

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.A, self.B, self.C, self.D

    def replace(self, **changes) -> "EdgeSpec":
        return dataclasses.replace(self, **changes)

    def __repr__(self):
        return f"EdgeSpec({self.source!r}->{self.target!r}, label={self.label})"


@dataclass(frozen=True, eq=False)
class SwitchingSystem:
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]
    input_dim: int
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    @cached_property
    def dims(self) -> dict[str, int]:
        return {node.name: node.dim for node in self.nodes}

    @cached_property
    def node_names(self) -> tuple[str, ...]:
        return tuple(node.name for node in self.nodes)

    @cached_property
    def _out_edges(self) -> dict[str, tuple[EdgeSpec, ...]]:
        out: dict[str, list[EdgeSpec]] = {name: [] for name in self.node_names}
        for edge in sorted(self.edges, key=lambda e: e.label):
            out.setdefault(edge.source, []).append(edge)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def _in_edges(self) -> dict[str, tuple[EdgeSpec, ...]]:
        inc: dict[str, list[EdgeSpec]] = {name: [] for name in self.node_names}
        for edge in sorted(self.edges, key=lambda e: e.label):
            inc.setdefault(edge.target, []).append(edge)
        return {k: tuple(v) for k, v in inc.items()}

    def out_edges(self, node: str) -> tuple[EdgeSpec, ...]:
        return self._out_edges.get(node, ())

    def in_edges(self, node: str) -> tuple[EdgeSpec, ...]:
        return self._in_edges.get(node, ())

    @cached_property
    def _by_label(self) -> dict[int, EdgeSpec]:
        return {edge.label: edge for edge in self.edges}

    def edge(self, label: int) -> EdgeSpec:
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"no edge with label {label}") from None

    @property
    def total_dim(self) -> int:
        return sum(node.dim for node in self.nodes)

    @property
    def is_square(self) -> bool:
        """True when every node has the same state dimension."""
        return len({node.dim for node in self.nodes}) <= 1

    def with_parts(self, nodes=None, edges=None, input_dim=None, output_dim=None):
        return SwitchingSystem(
            nodes=self.nodes if nodes is None else nodes,
            edges=self.edges if edges is None else edges,
            input_dim=self.input_dim if input_dim is None else input_dim,
            output_dim=self.output_dim if output_dim is None else output_dim,
        )

    def graph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.node_names)
        for edge in self.edges:
            g.add_edge(edge.source, edge.target, key=edge.label)
        return g

    def require_valid(self) -> "SwitchingSystem":
        report = validate_system(self)
        if not report.ok:
            raise InvalidSystemError(report)
        return self


@dataclass(frozen=True)
class Violation:
    kind: str  # shape | duplicate_label | unknown_node | not_strongly_connected | isolated_node | ...
    message: str
    edge: int | None = None
    node: str | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def __str__(self):
        if self.ok:
            return "ok"
        return "\n".join(f"- [{v.kind}] {v.message}" for v in self.violations)


def validate_system(sys: SwitchingSystem) -> ValidationReport:
    """List every structural problem of ``sys``; an empty report means well-formed."""
    out: list[Violation] = []
    if sys.input_dim < 0 or sys.output_dim < 0:
        out.append(Violation("dims", "input_dim and output_dim must be nonnegative"))

    seen_nodes: set[str] = set()
    for node in sys.nodes:
        if node.name in seen_nodes:
            out.append(Violation("duplicate_node", f"node name {node.name!r} repeated", node=node.name))
        seen_nodes.add(node.name)
    if not sys.nodes:
        out.append(Violation("empty", "system has no nodes"))

    seen_labels: set[int] = set()
    d, m = sys.input_dim, sys.output_dim
    for edge in sys.edges:
        if edge.label in seen_labels:
            out.append(Violation("duplicate_label", f"label {edge.label} used by several edges", edge=edge.label))
        seen_labels.add(edge.label)
        missing = [n for n in (edge.source, edge.target) if n not in sys.dims]
        if missing:
            out.append(
                Violation("unknown_node", f"edge {edge.label} references unknown node(s) {missing}", edge=edge.label)
            )
            continue
        n_from, n_to = sys.dims[edge.source], sys.dims[edge.target]
        expected = {"A": (n_to, n_from), "B": (n_to, d), "C": (m, n_from), "D": (m, d)}
        for name, shape in expected.items():
            got = getattr(edge, name).shape
            if got != shape:
                out.append(
                    Violation(
                        "shape",
                        f"edge {edge.label} ({edge.source}->{edge.target}): {name} has shape {got}, expected {shape}",
                        edge=edge.label,
                    )
                )

    for name in sys.node_names:
        if not sys.out_edges(name) or not sys.in_edges(name):
            out.append(Violation("isolated_node", f"node {name!r} lacks an incoming or outgoing edge", node=name))

    if sys.nodes and not any(v.kind == "unknown_node" for v in out):
        if not nx.is_strongly_connected(sys.graph()):
            out.append(Violation("not_strongly_connected", "the switching graph is not strongly connected"))
    return ValidationReport(out)


def canonicalize_labels(sys: SwitchingSystem) -> SwitchingSystem:
    """Relabel edges ``1..|E|`` in order of their current labels, keeping the old ones."""
    ordered = sorted(sys.edges, key=lambda e: e.label)
    edges = [
        e.replace(label=i, original_label=e.original_label if e.original_label is not None else e.label)
        for i, e in enumerate(ordered, start=1)
    ]
    return sys.with_parts(edges=edges)


def lift_to_rectangular(
    nodes: Sequence[str],
    modes: Sequence[tuple],
    edge_list: Sequence[tuple[str, str, int]],
) -> SwitchingSystem:
    """Cast a mode-labeled system into rectangular form.

    ``modes`` holds ``(A, B, C, D)`` tuples with a shared square state
    dimension; ``edge_list`` holds ``(u, v, mode)`` triples with 1-based mode
    indices. Every edge gets a fresh unique label and a copy of its mode's
    matrices.
    """
    if not modes:
        raise ValueError("at least one mode is required")
    mats = [tuple(np.asarray(M, dtype=float) for M in mode) for mode in modes]
    n = mats[0][0].shape[0]
    d = mats[0][1].shape[1]
    m = mats[0][2].shape[0]
    for k, (A, B, C, D) in enumerate(mats, start=1):
        if A.shape != (n, n) or B.shape != (n, d) or C.shape != (m, n) or D.shape != (m, d):
            raise ValueError(f"mode {k}: matrices are not (n x n, n x d, m x n, m x d) with shared n, d, m")

    edges = []
    for label, (u, v, mode) in enumerate(edge_list, start=1):
        if not 1 <= mode <= len(mats):
            raise ValueError(f"mode index {mode} out of range 1..{len(mats)}")
        A, B, C, D = mats[mode - 1]
        edges.append(EdgeSpec(u, v, label, A, B, C, D, mode=mode))
    return SwitchingSystem(tuple(NodeSpec(name, n) for name in nodes), tuple(edges), d, m)


def dual_system(sys: SwitchingSystem) -> SwitchingSystem:
    """Reverse every edge and map ``(A, B, C, D)`` to ``(A^T, C^T, B^T, D^T)``."""
    edges = [
        e.replace(source=e.target, target=e.source, A=e.A.T, B=e.C.T, C=e.B.T, D=e.D.T)
        for e in sys.edges
    ]
    return sys.with_parts(edges=edges, input_dim=sys.output_dim, output_dim=sys.input_dim)


def same_system(a: SwitchingSystem, b: SwitchingSystem, atol: float = 0.0) -> bool:
    if a.nodes != b.nodes or (a.input_dim, a.output_dim) != (b.input_dim, b.output_dim):
        return False
    if sorted(e.label for e in a.edges) != sorted(e.label for e in b.edges):
        return False
    for ea in a.edges:
        eb = b.edge(ea.label)
        if (ea.source, ea.target) != (eb.source, eb.target):
            return False
        for Ma, Mb in zip(ea.matrices(), eb.matrices()):
            if Ma.shape != Mb.shape or not np.allclose(Ma, Mb, rtol=0.0, atol=atol):
                return False
    return True


class Path:
    """A finite chained sequence of edges."""

    __slots__ = ("edges",)

    def __init__(self, edges: Sequence[EdgeSpec]):
        edges = tuple(edges)
        if not edges:
            raise ValueError("a path needs at least one edge")
        for t in range(len(edges) - 1):
            if edges[t].target != edges[t + 1].source:
                raise ValueError(
                    f"edges do not chain at position {t}: {edges[t].target!r} != {edges[t + 1].source!r}"
                )
        object.__setattr__(self, "edges", edges)

    def __setattr__(self, name, value):
        raise AttributeError("Path is immutable")

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(e.label for e in self.edges)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.edges[0].source,) + tuple(e.target for e in self.edges)

    @property
    def source(self) -> str:
        return self.edges[0].source

    @property
    def target(self) -> str:
        return self.edges[-1].target

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def __eq__(self, other):
        return isinstance(other, Path) and self.labels == other.labels and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        return f"Path({list(self.labels)})"


def path_from_labels(sys: SwitchingSystem, labels: Sequence[int]) -> Path:
    return Path([sys.edge(int(l)) for l in labels])


def subpath(pi: Path, i: int, j: int) -> Path:
    """Edges ``i`` through ``j`` of ``pi`` (1-based, both included)."""
    if not 1 <= i <= j <= len(pi):
        raise IndexError(f"subpath({i}, {j}) out of range for a path of length {len(pi)}")
    return Path(pi.edges[i - 1 : j])


def _nodes_reaching(sys: SwitchingSystem, end: str, steps: int) -> list[set[str]]:
    # can[j] = nodes from which `end` is reachable in exactly j steps
    can = [{end}]
    for _ in range(steps):
        can.append({e.source for e in sys.edges if e.target in can[-1]})
    return can


def enumerate_paths(
    sys: SwitchingSystem, length: int, start: str | None = None, end: str | None = None
) -> Iterator[Path]:
    """Lazily yield all paths with ``length`` edges, lexicographic in their labels."""
    if length < 1:
        raise ValueError("path length must be >= 1")
    reach = _nodes_reaching(sys, end, length) if end is not None else None
    firsts = sys.out_edges(start) if start is not None else sorted(sys.edges, key=lambda e: e.label)

    def ok(node: str, remaining: int) -> bool:
        return reach is None or node in reach[remaining]

    stack: list[EdgeSpec] = []

    def walk(edge: EdgeSpec) -> Iterator[Path]:
        stack.append(edge)
        remaining = length - len(stack)
        if remaining == 0:
            yield Path(stack)
        else:
            for nxt in sys.out_edges(edge.target):
                if ok(nxt.target, remaining - 1):
                    yield from walk(nxt)
        stack.pop()

    for first in firsts:
        if ok(first.target, length - 1):
            yield from walk(first)


@dataclass(frozen=True, eq=False)
class PathMatrices:
    """Lifted operators of a path: state transition, input reach, output
    observation and the causal input-output block matrix."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray


def _empty_path_matrices(n: int, d: int, m: int) -> PathMatrices:
    return PathMatrices(np.eye(n), np.zeros((n, 0)), np.zeros((0, n)), np.zeros((0, 0)))


def extend_path_matrices(pm: PathMatrices, edge: EdgeSpec) -> PathMatrices:
    """Operators of ``pi + edge`` from those of ``pi``."""
    A, B, C, D = edge.matrices()
    rows, cols = pm.D.shape
    new_D = np.block([[pm.D, np.zeros((rows, D.shape[1]))], [C @ pm.B, D]])
    return PathMatrices(A @ pm.A, np.hstack([A @ pm.B, B]), np.vstack([pm.C, C @ pm.A]), new_D)


def path_matrices(sys: SwitchingSystem, pi: Path) -> PathMatrices:
    """Block-assemble ``A_pi, B_pi, C_pi, D_pi`` from the edge matrices.

    ``D_pi`` block ``(i, j)`` (0-based time) is ``D`` of edge ``i`` on the
    diagonal and ``C_i A_{i-1} ... A_{j+1} B_j`` below it.
    """
    dims = sys.dims
    K = len(pi)
    d, m = sys.input_dim, sys.output_dim
    n0 = dims[pi.source]
    # transitions[t] = A_{t-1} ... A_0 (state map from time 0 to time t)
    transitions = [np.eye(n0)]
    for e in pi.edges:
        transitions.append(e.A @ transitions[-1])
    A_pi = transitions[-1]

    B_blocks = []
    for j, e in enumerate(pi.edges):
        M = e.B
        for later in pi.edges[j + 1 :]:
            M = later.A @ M
        B_blocks.append(M)
    B_pi = np.hstack(B_blocks) if B_blocks else np.zeros((dims[pi.target], 0))

    C_pi = np.vstack([e.C @ transitions[t] for t, e in enumerate(pi.edges)])

    D_pi = np.zeros((K * m, K * d))
    for j, ej in enumerate(pi.edges):
        D_pi[j * m : (j + 1) * m, j * d : (j + 1) * d] = ej.D
        carry = ej.B
        for i in range(j + 1, K):
            ei = pi.edges[i]
            D_pi[i * m : (i + 1) * m, j * d : (j + 1) * d] = ei.C @ carry
            carry = ei.A @ carry
    return PathMatrices(A_pi, B_pi, C_pi, D_pi)


def iter_path_matrices(
    sys: SwitchingSystem, length: int, start: str | None = None
) -> Iterator[tuple[Path, PathMatrices]]:
    """Same stream as :func:`enumerate_paths` but with operators built incrementally.

    Shares prefix work across paths, so it is the preferred way to sweep
    all paths of a given length.
    """
    if length < 1:
        raise ValueError("path length must be >= 1")
    firsts = sys.out_edges(start) if start is not None else sorted(sys.edges, key=lambda e: e.label)
    d, m = sys.input_dim, sys.output_dim
    stack: list[EdgeSpec] = []

    def walk(edge: EdgeSpec, pm: PathMatrices):
        stack.append(edge)
        pm = extend_path_matrices(pm, edge)
        if len(stack) == length:
            yield Path(stack), pm
        else:
            for nxt in sys.out_edges(edge.target):
                yield from walk(nxt, pm)
        stack.pop()

    for first in firsts:
        yield from walk(first, _empty_path_matrices(sys.dims[first.source], d, m))


def simulate(sys: SwitchingSystem, pi: Path, x0, w) -> tuple[np.ndarray, np.ndarray]:
    """Step the recursion along ``pi``; ``w`` has one row per step.

    Returns the state sequence (list of arrays, length ``|pi|+1``) and the
    stacked output vector.
    """
    x = np.asarray(x0, dtype=float)
    w = np.asarray(w, dtype=float).reshape(len(pi), sys.input_dim)
    states = [x]
    outputs = []
    for t, e in enumerate(pi.edges):
        outputs.append(e.C @ x + e.D @ w[t])
        x = e.A @ x + e.B @ w[t]
        states.append(x)
    return states, np.concatenate(outputs) if outputs else np.zeros(0)
