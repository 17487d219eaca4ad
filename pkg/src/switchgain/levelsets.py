"""Unit level sets of truncated storage functions.

For a homogeneous storage ``F`` of degree 2 the boundary point in unit
direction ``u`` is exactly ``u / sqrt(F(u))``; no contouring is needed.
Three-dimensional nodes are cut by the three coordinate planes.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .storage import QuadraticStorage
from .system import SwitchingSystem


class NotDefiniteError(ValueError):
    pass


@dataclass
class Section:
    axes: tuple[int, int]
    points: np.ndarray  # (N + 1, dim), closed: last row repeats the first

    @property
    def name(self) -> str:
        return f"x{self.axes[0]}-x{self.axes[1]}"

    def planar(self) -> np.ndarray:
        return self.points[:, list(self.axes)]


@dataclass
class LevelSetData:
    node: str
    dim: int
    sections: list[Section] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", "section"] + [f"x{i}" for i in range(self.dim)])
            for sec in self.sections:
                for p in sec.points:
                    writer.writerow([self.node, sec.name] + [repr(float(v)) for v in p])


def emit_level_sets(sys: SwitchingSystem, storage: QuadraticStorage, node: str, resolution: int = 360) -> LevelSetData:
    dim = sys.dims[node]
    if dim not in (2, 3):
        raise ValueError(f"level sets are emitted for 2- or 3-dimensional nodes; {node!r} has dim {dim}")
    theta = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
    data = LevelSetData(node, dim)
    for i, j in itertools.combinations(range(dim), 2):
        U = np.zeros((resolution, dim))
        U[:, i], U[:, j] = np.cos(theta), np.sin(theta)
        values = storage.evaluate(node, U)
        # relative test: cos(pi/2) is 6e-17, not 0
        if np.any(values <= 1e-12 * max(values.max(), 1e-300)):
            raise NotDefiniteError(f"storage at node {node!r} vanishes in some direction of the x{i}-x{j} plane")
        P = U / np.sqrt(values)[:, None]
        data.sections.append(Section((i, j), np.vstack([P, P[:1]])))
    return data


def polygon_is_convex(points: np.ndarray, tol: float = 1e-12) -> bool:
    """True if the closed polyline turns consistently in one direction."""
    P = np.asarray(points, dtype=float)
    if np.allclose(P[0], P[-1]):
        P = P[:-1]
    e1 = np.roll(P, -1, axis=0) - P
    e2 = np.roll(e1, -1, axis=0)
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    scale = tol * np.max(np.abs(cross))
    return bool(np.all(cross >= -scale) or np.all(cross <= scale))
