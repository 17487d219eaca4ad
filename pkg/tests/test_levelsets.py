import csv

import numpy as np
import pytest

from switchgain.examples import build_pendulum_example
from switchgain.levelsets import NotDefiniteError, emit_level_sets, polygon_is_convex
from switchgain.realization import minimize
from switchgain.storage import QuadraticStorage, truncated_storage
from oracles import lti_system


def single(G, node="v"):
    return QuadraticStorage(1.0, 1, {node: [((1,), np.asarray(G, dtype=float))]})


def test_identity_gives_unit_circle():
    sys = lti_system(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), [[0]])
    data = emit_level_sets(sys, single(np.eye(2)), "v", 90)
    (sec,) = data.sections
    np.testing.assert_allclose(np.linalg.norm(sec.points, axis=1), 1.0, atol=1e-15)


def test_diagonal_gives_ellipse():
    sys = lti_system(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), [[0]])
    data = emit_level_sets(sys, single(np.diag([4.0, 1.0])), "v", 360)
    P = data.sections[0].points
    assert np.abs(P[:, 0]).max() == pytest.approx(0.5)
    assert np.abs(P[:, 1]).max() == pytest.approx(1.0)
    np.testing.assert_allclose(4 * P[:, 0] ** 2 + P[:, 1] ** 2, 1.0, atol=1e-12)


def test_polylines_are_closed():
    sys = lti_system(np.zeros((3, 3)), np.zeros((3, 1)), np.zeros((1, 3)), [[0]])
    data = emit_level_sets(sys, single(np.diag([1.0, 2.0, 3.0])), "v", 50)
    assert [s.name for s in data.sections] == ["x0-x1", "x0-x2", "x1-x2"]
    for s in data.sections:
        np.testing.assert_array_equal(s.points[0], s.points[-1])
        assert s.points.shape == (51, 3)


def test_semidefinite_storage_is_rejected():
    sys = lti_system(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), [[0]])
    with pytest.raises(NotDefiniteError):
        emit_level_sets(sys, single(np.diag([1.0, 0.0])), "v", 8)


def test_only_planar_or_spatial_nodes():
    sys = lti_system(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), [[0]])
    with pytest.raises(ValueError):
        emit_level_sets(sys, single(np.eye(1)), "v")


@pytest.fixture(scope="module")
def pendulum_storage():
    sys, _ = minimize(build_pendulum_example())
    return sys, truncated_storage(sys, 0.25, sys.total_dim).pruned()


def test_pendulum_points_lie_on_the_unit_level(pendulum_storage):
    sys, st_ = pendulum_storage
    for node in sys.node_names:
        data = emit_level_sets(sys, st_, node, 360)
        for s in data.sections:
            np.testing.assert_allclose(st_.evaluate(node, s.points), 1.0, atol=1e-6)


def test_pendulum_node_b_sections_are_convex(pendulum_storage):
    sys, st_ = pendulum_storage
    data = emit_level_sets(sys, st_, "b", 720)
    assert data.dim == 3 and len(data.sections) == 3
    for s in data.sections:
        assert polygon_is_convex(s.planar())


def test_convexity_check_detects_dents():
    t = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    r = 1 + 0.3 * np.cos(5 * t)
    star = np.c_[r * np.cos(t), r * np.sin(t)]
    assert not polygon_is_convex(star)
    assert polygon_is_convex(np.c_[np.cos(t), np.sin(t)])


def test_csv_layout(tmp_path, pendulum_storage):
    sys, st_ = pendulum_storage
    out = tmp_path / "b.csv"
    emit_level_sets(sys, st_, "b", 36).write_csv(out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["node", "section", "x0", "x1", "x2"]
    assert len(rows) == 1 + 3 * 37
    assert {r[1] for r in rows[1:]} == {"x0-x1", "x0-x2", "x1-x2"}
