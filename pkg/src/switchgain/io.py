"""JSON system files.

Schema::

    {
      "input_dim": d, "output_dim": m,
      "nodes": [{"name": "a", "dim": 2}, ...],
      "edges": [{"from": "a", "to": "b", "label": 1,
                 "A": [[...]], "B": [[...]], "C": [[...]], "D": [[...]]}, ...]
    }

Matrices are lists of rows. As a shorthand, a top-level ``"modes"`` list of
``{"A", "B", "C", "D"}`` objects may be given, with each edge naming its
1-based ``"mode"`` instead of carrying matrices. Floats are written with
``repr`` precision, so a save/load round trip is bit-exact.
"""
from __future__ import annotations

import json
import math
from pathlib import Path as FsPath

import numpy as np

from .system import (
    EdgeSpec,
    InvalidSystemError,
    NodeSpec,
    SwitchingSystem,
    canonicalize_labels,
    lift_to_rectangular,
    validate_system,
)


class SystemFileError(ValueError):
    """Malformed system file; the message names the offending field."""


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise SystemFileError(f"{where}: expected an object")
    if key not in obj:
        raise SystemFileError(f"{where}: missing field {key!r}")
    return obj[key]


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SystemFileError(f"{where}: expected an integer, got {value!r}")
    return value


def _matrix(value, shape: tuple[int, int] | None, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SystemFileError(f"{where}: not a numeric matrix ({exc})") from None
    if arr.size == 0 and shape is not None and 0 in shape:
        return np.zeros(shape)
    if arr.ndim != 2:
        raise SystemFileError(f"{where}: expected a list of rows, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SystemFileError(f"{where}: matrix entries must be finite")
    return arr


def system_from_dict(data: dict) -> SwitchingSystem:
    """Build, validate and canonicalize a system from parsed JSON.

    Raises :class:`SystemFileError` for schema problems and
    :class:`InvalidSystemError` when the system is structurally invalid.
    """
    if not isinstance(data, dict):
        raise SystemFileError("top level: expected an object")
    d = _int(_require(data, "input_dim", "top level"), "input_dim")
    m = _int(_require(data, "output_dim", "top level"), "output_dim")
    raw_nodes = _require(data, "nodes", "top level")
    raw_edges = _require(data, "edges", "top level")
    if not isinstance(raw_nodes, list) or not isinstance(raw_edges, list):
        raise SystemFileError("top level: 'nodes' and 'edges' must be lists")

    nodes = []
    for i, node in enumerate(raw_nodes):
        where = f"nodes[{i}]"
        name = _require(node, "name", where)
        if not isinstance(name, str):
            raise SystemFileError(f"{where}.name: expected a string")
        dim = _int(_require(node, "dim", where), f"{where}.dim")
        if dim < 0:
            raise SystemFileError(f"{where}.dim: must be nonnegative")
        nodes.append(NodeSpec(name, dim))
    dims = {n.name: n.dim for n in nodes}

    if "modes" in data:
        sys = _expand_modes(data["modes"], raw_edges, nodes, d, m)
    else:
        edges = []
        for i, edge in enumerate(raw_edges):
            where = f"edges[{i}]"
            src = _require(edge, "from", where)
            dst = _require(edge, "to", where)
            label = _int(_require(edge, "label", where), f"{where}.label")
            n_from, n_to = dims.get(src), dims.get(dst)
            shapes = {
                "A": (n_to, n_from) if None not in (n_to, n_from) else None,
                "B": (n_to, d) if n_to is not None else None,
                "C": (m, n_from) if n_from is not None else None,
                "D": (m, d),
            }
            mats = {k: _matrix(_require(edge, k, where), shapes[k], f"{where}.{k}") for k in "ABCD"}
            edges.append(
                EdgeSpec(
                    src,
                    dst,
                    label,
                    **mats,
                    mode=edge.get("mode"),
                    original_label=edge.get("original_label"),
                )
            )
        sys = SwitchingSystem(tuple(nodes), tuple(edges), d, m)

    report = validate_system(sys)
    if not report.ok:
        raise InvalidSystemError(report)
    return canonicalize_labels(sys)


def _expand_modes(raw_modes, raw_edges, nodes, d, m) -> SwitchingSystem:
    if not isinstance(raw_modes, list) or not raw_modes:
        raise SystemFileError("modes: expected a nonempty list")
    ns = {n.dim for n in nodes}
    if len(ns) != 1:
        raise SystemFileError("modes: shorthand needs all nodes to share one dimension")
    n = ns.pop()
    shapes = {"A": (n, n), "B": (n, d), "C": (m, n), "D": (m, d)}
    modes = []
    for i, mode in enumerate(raw_modes):
        mats = [_matrix(_require(mode, k, f"modes[{i}]"), shapes[k], f"modes[{i}].{k}") for k in "ABCD"]
        for k, M in zip("ABCD", mats):
            if M.shape != shapes[k]:
                raise SystemFileError(f"modes[{i}].{k}: shape {M.shape}, expected {shapes[k]}")
        modes.append(tuple(mats))
    triples, labels = [], []
    for i, edge in enumerate(raw_edges):
        where = f"edges[{i}]"
        triples.append(
            (_require(edge, "from", where), _require(edge, "to", where), _int(_require(edge, "mode", where), f"{where}.mode"))
        )
        labels.append(edge.get("label"))
    try:
        sys = lift_to_rectangular([node.name for node in nodes], modes, triples)
    except ValueError as exc:
        raise SystemFileError(f"edges: {exc}") from None
    if all(label is not None for label in labels):
        sys = sys.with_parts(edges=[e.replace(label=int(l)) for e, l in zip(sys.edges, labels)])
    return sys


def system_to_dict(sys: SwitchingSystem) -> dict:
    edges = []
    for e in sorted(sys.edges, key=lambda e: e.label):
        item = {"from": e.source, "to": e.target, "label": e.label}
        item.update({k: getattr(e, k).tolist() for k in "ABCD"})
        if e.mode is not None:
            item["mode"] = e.mode
        if e.original_label is not None:
            item["original_label"] = e.original_label
        edges.append(item)
    return {
        "input_dim": sys.input_dim,
        "output_dim": sys.output_dim,
        "nodes": [{"name": n.name, "dim": n.dim} for n in sys.nodes],
        "edges": edges,
    }


def load_system(path) -> SwitchingSystem:
    text = FsPath(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return system_from_dict(data)


def save_system(sys: SwitchingSystem, path) -> None:
    FsPath(path).write_text(json.dumps(system_to_dict(sys), indent=1) + "\n")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    # JSON has no infinities
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_default))), indent=1)
