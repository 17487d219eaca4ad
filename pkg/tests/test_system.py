import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lti_system, random_system
from switchgain.examples import DEFAULT_DELAY_GRAPH, build_pendulum_example
from switchgain.system import (
    EdgeSpec,
    NodeSpec,
    Path,
    SwitchingSystem,
    canonicalize_labels,
    dual_system,
    enumerate_paths,
    iter_path_matrices,
    lift_to_rectangular,
    path_from_labels,
    path_matrices,
    same_system,
    simulate,
    subpath,
    validate_system,
)


def two_self_loops(n=2):
    rng = np.random.default_rng(0)
    modes = [tuple(rng.standard_normal(s) for s in [(n, n), (n, 1), (1, n), (1, 1)]) for _ in range(2)]
    return lift_to_rectangular(["v"], modes, [("v", "v", 1), ("v", "v", 2)])


# --- validation -------------------------------------------------------------


def test_well_formed_lti_has_empty_report():
    assert validate_system(lti_system([[0.5]], [[1]], [[1]], [[0]])).ok


def test_wrong_row_count_is_one_shape_violation_naming_the_edge():
    sys = SwitchingSystem(
        (NodeSpec("v", 2),),
        (EdgeSpec("v", "v", 7, np.zeros((3, 2)), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1))),),
        1,
        1,
    )
    report = validate_system(sys)
    assert report.kinds() == ["shape"]
    assert report.violations[0].edge == 7
    assert "edge 7" in report.violations[0].message


def test_disjoint_cycles_are_not_strongly_connected():
    z = np.zeros((1, 1))
    sys = SwitchingSystem(
        (NodeSpec("a", 1), NodeSpec("b", 1)),
        (EdgeSpec("a", "a", 1, z, z, z, z), EdgeSpec("b", "b", 2, z, z, z, z)),
        1,
        1,
    )
    assert "not_strongly_connected" in validate_system(sys).kinds()


def test_duplicate_labels_and_isolated_nodes_are_reported():
    z = np.zeros((1, 1))
    sys = SwitchingSystem(
        (NodeSpec("a", 1), NodeSpec("b", 1)),
        (EdgeSpec("a", "a", 1, z, z, z, z), EdgeSpec("a", "a", 1, z, z, z, z)),
        1,
        1,
    )
    kinds = validate_system(sys).kinds()
    assert "duplicate_label" in kinds and "isolated_node" in kinds


def test_all_violations_listed_together():
    sys = SwitchingSystem(
        (NodeSpec("a", 1), NodeSpec("b", 2)),
        (EdgeSpec("a", "b", 1, np.zeros((1, 1)), np.zeros((2, 1)), np.zeros((1, 1)), np.zeros((1, 1))),),
        1,
        1,
    )
    kinds = validate_system(sys).kinds()
    assert kinds.count("shape") == 1
    assert "isolated_node" in kinds and "not_strongly_connected" in kinds


# --- lifting ----------------------------------------------------------------


def test_lift_single_node_two_modes():
    sys = two_self_loops(3)
    assert sorted(e.label for e in sys.edges) == [1, 2]
    assert sys.dims == {"v": 3}
    assert validate_system(sys).ok


def test_lift_delay_graph_gives_five_unique_labels():
    sys = build_pendulum_example()
    assert len(sys.edges) == 5
    assert sorted(e.label for e in sys.edges) == [1, 2, 3, 4, 5]
    assert [e.mode for e in sorted(sys.edges, key=lambda e: e.label)] == [m for _, _, m in DEFAULT_DELAY_GRAPH]
    assert validate_system(sys).ok


def test_lift_rejects_out_of_range_mode():
    mode = (np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    with pytest.raises(ValueError, match="out of range"):
        lift_to_rectangular(["v"], [mode], [("v", "v", 2)])


def test_lift_empty_edge_list_fails_validation():
    mode = (np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    sys = lift_to_rectangular(["a", "b"], [mode], [])
    assert not validate_system(sys).ok


def test_lift_copies_mode_matrices():
    rng = np.random.default_rng(1)
    modes = [tuple(rng.standard_normal(s) for s in [(2, 2), (2, 1), (1, 2), (1, 1)]) for _ in range(2)]
    sys = lift_to_rectangular(["a", "b"], modes, [("a", "b", 2), ("b", "a", 1)])
    for e in sys.edges:
        for M, ref in zip(e.matrices(), modes[e.mode - 1]):
            np.testing.assert_array_equal(M, ref)


def test_canonicalize_keeps_original_labels():
    z = np.zeros((1, 1))
    sys = SwitchingSystem((NodeSpec("v", 1),), (EdgeSpec("v", "v", 40, z, z, z, z), EdgeSpec("v", "v", 7, z, z, z, z)), 1, 1)
    canon = canonicalize_labels(sys)
    assert {e.label: e.original_label for e in canon.edges} == {1: 7, 2: 40}


def test_matrices_are_read_only():
    sys = lti_system([[0.5]], [[1]], [[1]], [[0]])
    with pytest.raises(ValueError):
        sys.edges[0].A[0, 0] = 1.0


# --- path enumeration -------------------------------------------------------


def test_two_self_loops_three_steps_gives_eight_paths():
    paths = list(enumerate_paths(two_self_loops(), 3))
    assert len(paths) == 8
    assert [p.labels for p in paths] == list(itertools.product([1, 2], repeat=3))


def test_delay_graph_never_misses_three_updates_in_a_row():
    sys = build_pendulum_example()
    missed = {e.label for e in sys.edges if e.mode == 2}
    for K in range(3, 8):
        for pi in enumerate_paths(sys, K):
            flags = [lab in missed for lab in pi.labels]
            assert not any(all(flags[i : i + 3]) for i in range(K - 2))


def test_paths_chain_and_respect_endpoint_filters():
    rng = np.random.default_rng(3)
    sys = random_system(rng, n_nodes=3, extra_edges=3)
    for start, end in itertools.product([None, *sys.node_names], repeat=2):
        got = list(enumerate_paths(sys, 4, start, end))
        for pi in got:
            for e1, e2 in zip(pi.edges, pi.edges[1:]):
                assert e1.target == e2.source
            assert start is None or pi.source == start
            assert end is None or pi.target == end
        brute = [
            ls
            for ls in itertools.product(sorted(e.label for e in sys.edges), repeat=4)
            if all(sys.edge(a).target == sys.edge(b).source for a, b in zip(ls, ls[1:]))
            and (start is None or sys.edge(ls[0]).source == start)
            and (end is None or sys.edge(ls[-1]).target == end)
        ]
        assert [p.labels for p in got] == brute


def test_enumeration_is_lazy():
    sys = two_self_loops()
    stream = enumerate_paths(sys, 60)  # 2**60 paths: would never finish if materialized
    first = next(stream)
    assert first.labels == (1,) * 60


def test_path_rejects_broken_chain():
    z = np.zeros((1, 1))
    e1 = EdgeSpec("a", "b", 1, z, z, z, z)
    e2 = EdgeSpec("a", "a", 2, z, z, z, z)
    with pytest.raises(ValueError):
        Path([e1, e2])


def test_path_sequences():
    sys = build_pendulum_example()
    pi = path_from_labels(sys, [2, 4, 5, 1])
    assert pi.nodes == ("a", "b", "c", "a", "a")
    assert pi.labels == (2, 4, 5, 1)
    assert len(pi) == 4


# --- subpaths ---------------------------------------------------------------


def test_subpath_whole_and_single():
    sys = build_pendulum_example()
    pi = path_from_labels(sys, [2, 4, 5, 2, 3])
    assert subpath(pi, 1, len(pi)) == pi
    for k in range(1, len(pi) + 1):
        assert subpath(pi, k, k).labels == (pi.labels[k - 1],)


def test_subpath_overlap_used_by_horizon_certificates():
    sys = build_pendulum_example()
    K = 3
    for rho in enumerate_paths(sys, K + 1):
        head, tail = subpath(rho, 1, K), subpath(rho, 2, K + 1)
        assert subpath(head, 2, K) == subpath(tail, 1, K - 1)


@pytest.mark.parametrize("i,j", [(0, 1), (2, 1), (1, 6)])
def test_subpath_out_of_range(i, j):
    sys = build_pendulum_example()
    pi = path_from_labels(sys, [1, 1, 1])
    with pytest.raises(IndexError):
        subpath(pi, i, j)


# --- path operators ---------------------------------------------------------


def test_single_edge_operators_are_the_edge_matrices():
    sys = random_system(np.random.default_rng(4))
    for e in sys.edges:
        pm = path_matrices(sys, Path([e]))
        for got, ref in zip((pm.A, pm.B, pm.C, pm.D), e.matrices()):
            np.testing.assert_array_equal(got, ref)


def test_two_step_scalar_multiples():
    o = np.zeros((2, 1))
    sys = SwitchingSystem(
        (NodeSpec("v", 2),),
        (
            EdgeSpec("v", "v", 1, 2 * np.eye(2), o, np.eye(2), np.zeros((2, 1))),
            EdgeSpec("v", "v", 2, 3 * np.eye(2), o, np.eye(2), np.zeros((2, 1))),
        ),
        1,
        2,
    )
    pm = path_matrices(sys, path_from_labels(sys, [1, 2]))
    np.testing.assert_array_equal(pm.A, 6 * np.eye(2))
    np.testing.assert_array_equal(pm.C, np.vstack([np.eye(2), 2 * np.eye(2)]))
    assert not pm.B.any() and not pm.D.any()


def test_operators_match_step_by_step_simulation():
    rng = np.random.default_rng(5)
    sys = random_system(rng, n_nodes=1, dims={"a": 2}, d=2, m=2, extra_edges=1, contraction=None)
    for pi in enumerate_paths(sys, 4):
        pm = path_matrices(sys, pi)
        x0 = rng.standard_normal(2)
        for col in range(4 * sys.input_dim):
            w = np.zeros(4 * sys.input_dim)
            w[col] = 1.0
            states, z = simulate(sys, pi, x0, w.reshape(4, -1))
            np.testing.assert_allclose(z, pm.C @ x0 + pm.D @ w, rtol=0, atol=1e-12)
            np.testing.assert_allclose(states[-1], pm.A @ x0 + pm.B @ w, rtol=0, atol=1e-12)


def test_incremental_operators_equal_block_formulas():
    rng = np.random.default_rng(6)
    sys = random_system(rng, n_nodes=3, d=2, m=1, extra_edges=2)
    for pi, pm in iter_path_matrices(sys, 4):
        ref = path_matrices(sys, pi)
        for a, b in zip((pm.A, pm.B, pm.C, pm.D), (ref.A, ref.B, ref.C, ref.D)):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_rectangular_operator_shapes():
    rng = np.random.default_rng(7)
    sys = random_system(rng, n_nodes=3, dims={"a": 1, "b": 3, "c": 2}, d=2, m=3, extra_edges=2)
    for pi in enumerate_paths(sys, 3):
        pm = path_matrices(sys, pi)
        n0, nK = sys.dims[pi.source], sys.dims[pi.target]
        assert pm.A.shape == (nK, n0)
        assert pm.B.shape == (nK, 3 * 2)
        assert pm.C.shape == (3 * 3, n0)
        assert pm.D.shape == (3 * 3, 3 * 2)


# --- dual -------------------------------------------------------------------


def test_dual_is_an_involution():
    sys = random_system(np.random.default_rng(8), n_nodes=3, d=2, m=1, extra_edges=2)
    assert same_system(dual_system(dual_system(sys)), sys)


def test_symmetric_single_node_is_self_dual():
    rng = np.random.default_rng(9)
    M = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))
    D = rng.standard_normal((2, 2))
    sys = lti_system(M + M.T, B, B.T, D + D.T)
    assert same_system(dual_system(sys), sys)


def test_dual_maps_operators_to_transposes_of_reversed_paths():
    rng = np.random.default_rng(10)
    sys = random_system(rng, n_nodes=2, d=1, m=2, extra_edges=2)
    dual = dual_system(sys)
    for K in range(1, 5):
        for pi in enumerate_paths(sys, K):
            rev = path_from_labels(dual, pi.labels[::-1])
            np.testing.assert_allclose(path_matrices(dual, rev).A, path_matrices(sys, pi).A.T, atol=1e-12)


# --- properties -------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, K=st.integers(2, 6), data=st.data())
def test_semigroup_property(seed, K, data):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n_nodes=int(rng.integers(1, 4)), extra_edges=2, contraction=None)
    pi = next(iter(enumerate_paths(sys, K)))
    k = data.draw(st.integers(1, K - 1))
    lhs = path_matrices(sys, pi).A
    rhs = path_matrices(sys, subpath(pi, k + 1, K)).A @ path_matrices(sys, subpath(pi, 1, k)).A
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(lhs).max()))


@settings(max_examples=40, deadline=None)
@given(seed=seeds, K=st.integers(1, 5))
def test_causal_blocks_match_markov_formula(seed, K):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n_nodes=int(rng.integers(1, 4)), d=int(rng.integers(1, 3)), m=int(rng.integers(1, 3)), extra_edges=2)
    d, m = sys.input_dim, sys.output_dim
    paths = list(enumerate_paths(sys, K))
    pi = paths[int(rng.integers(len(paths)))]
    D = path_matrices(sys, pi).D
    edges = pi.edges
    for i in range(K):
        for j in range(K):
            block = D[i * m : (i + 1) * m, j * d : (j + 1) * d]
            if j > i:
                assert not block.any()
            elif j == i:
                np.testing.assert_array_equal(block, edges[i].D)
            else:
                M = edges[j].B
                for t in range(j + 1, i):
                    M = edges[t].A @ M
                np.testing.assert_allclose(block, edges[i].C @ M, rtol=1e-12, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, K=st.integers(1, 6))
def test_zero_state_outputs_are_d_times_inputs(seed, K):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n_nodes=2, d=2, m=1, extra_edges=1)
    pi = next(iter(enumerate_paths(sys, K, start=sys.node_names[int(rng.integers(2))])))
    w = rng.standard_normal((K, 2))
    _, z = simulate(sys, pi, np.zeros(sys.dims[pi.source]), w)
    np.testing.assert_allclose(z, path_matrices(sys, pi).D @ w.reshape(-1), atol=1e-12)
