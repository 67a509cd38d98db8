import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penalm.scenario_tree import TreeInitials, build_tree, load_tree, save_tree
from penalm.var_model import build_default_process, make_process, stationary_mean

from helpers import make_tree, small_initials

PROCESS = build_default_process()


def zero_variance_process():
    # sd small enough that adding the noise term does not change the
    # intercept in floating point, but large enough that sd^2 stays
    # representable for the Cholesky pivot
    return make_process(
        intercept=PROCESS.intercept,
        lag_matrix=PROCESS.lag_matrix,
        residual_sd=np.full(5, 1e-120),
        residual_corr=np.eye(5),
        series=PROCESS.series,
    )


class TestShape:
    def test_figure_sized_tree_node_count(self):
        tree = make_tree([5, 4, 2], seed=1)
        assert len(tree.nodes) == 66
        assert len(tree.leaves()) == 40
        assert len(tree.children(0)) == 5
        t1 = tree.children(0)[0]
        assert len(tree.children(t1)) == 4
        leaf = tree.leaves()[0]
        assert tree.children(leaf.id) == ()

    def test_full_scale_tree(self):
        tree = make_tree([10, 6, 6, 4, 4], seed=2)
        assert len(tree.leaves()) == 5760
        for leaf in tree.leaves():
            assert leaf.path_prob == pytest.approx(1.0 / 5760.0, rel=1e-12)

    def test_unknown_node_id(self):
        tree = make_tree([2], seed=3)
        with pytest.raises(KeyError):
            tree.children(99)
        with pytest.raises(KeyError):
            tree.node(-1)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            build_tree(PROCESS, [], small_initials(), seed=0)
        with pytest.raises(ValueError):
            build_tree(PROCESS, [2, 0], small_initials(), seed=0)
        with pytest.raises(ValueError):
            build_tree(PROCESS, [2], TreeInitials(-1.0, 1.0, 1.0), seed=0)


class TestProbabilities:
    @pytest.mark.parametrize("branching", [[2], [3, 2], [2, 2, 2], [4, 3, 3]])
    def test_stage_probabilities_sum_to_one(self, branching):
        tree = make_tree(branching, seed=5)
        for t in range(tree.horizon + 1):
            total = sum(n.path_prob for n in tree.nodes_at(t))
            assert abs(total - 1.0) < 1e-12
        for node in tree.non_leaves():
            cond = sum(tree.nodes[c].cond_prob for c in node.children)
            assert abs(cond - 1.0) < 1e-12

    def test_root_invariants(self):
        tree = make_tree([3, 2], seed=8)
        root = tree.node(0)
        assert root.time == 0
        assert root.cond_prob == 1.0
        assert root.path_prob == 1.0
        assert root.parent is None


class TestStatePropagation:
    def test_levels_propagate_exactly(self):
        tree = make_tree([3, 2, 2], seed=13)
        for node in tree.nodes:
            if node.parent is None:
                continue
            parent = tree.nodes[node.parent]
            w = node.state.wage_growth
            assert node.state.liability == parent.state.liability * (1.0 + w)
            assert node.state.wages == parent.state.wages * (1.0 + w)
            kappa = tree.initials.indexation
            assert node.state.benefits == parent.state.benefits * (1.0 + kappa * w)

    def test_gross_returns_positive(self):
        tree = make_tree([4, 4], seed=17)
        for node in tree.nodes:
            assert all(r > 0.0 for r in node.state.gross_returns)

    def test_full_indexation_keeps_benefit_liability_ratio(self):
        initials = TreeInitials(120000.0, 20000.0, 6000.0, indexation=1.0)
        tree = build_tree(PROCESS, [3, 3], initials, seed=21)
        ratio0 = 6000.0 / 120000.0
        for node in tree.nodes:
            assert node.state.benefits / node.state.liability == pytest.approx(
                ratio0, rel=1e-12
            )

    def test_degenerate_single_branch_matches_noiseless_map(self):
        initials = TreeInitials(120000.0, 20000.0, 6000.0, 0.5)
        proc = zero_variance_process()
        tree = build_tree(proc, [1], initials, seed=4)
        assert len(tree.nodes) == 2
        h1 = proc.intercept + proc.lag_matrix @ stationary_mean(proc)
        w = math.exp(h1[0]) - 1.0
        child = tree.nodes[1]
        assert child.state.wage_growth == w
        assert child.state.liability == 120000.0 * (1.0 + w)
        for k in range(4):
            assert child.state.gross_returns[k] == math.exp(h1[k + 1])


class TestDeterminism:
    def test_same_seed_same_tree(self):
        a = make_tree([3, 2, 2], seed=42)
        b = make_tree([3, 2, 2], seed=42)
        assert a == b

    def test_different_seed_differs(self):
        a = make_tree([3, 2], seed=1)
        b = make_tree([3, 2], seed=2)
        assert a != b

    def test_stationary_mean_override_matches_default(self):
        initials = small_initials()
        a = build_tree(PROCESS, [2, 2], initials, seed=9)
        b = build_tree(PROCESS, [2, 2], initials, seed=9,
                       initial_log_state=stationary_mean(PROCESS))
        assert a == b


class TestConditionalExpectation:
    def test_constant_function(self):
        tree = make_tree([3, 2], seed=31)
        for node in tree.non_leaves():
            assert tree.conditional_expectation(node.id, lambda n: 1.0) == pytest.approx(
                1.0, abs=1e-12
            )

    def test_two_child_average(self):
        tree = make_tree([2], seed=33)
        a, b = (tree.nodes[c].state.liability for c in tree.children(0))
        got = tree.conditional_expectation(0, lambda n: n.state.liability)
        assert got == pytest.approx((a + b) / 2.0, rel=1e-14)

    def test_against_path_probability_oracle(self):
        tree = make_tree([3, 2, 2], seed=37)
        for node in tree.non_leaves():
            expected = sum(
                tree.nodes[c].path_prob / node.path_prob * tree.nodes[c].state.wages
                for c in node.children
            )
            got = tree.conditional_expectation(node.id, lambda n: n.state.wages)
            assert got == pytest.approx(expected, rel=1e-12)

    def test_leaf_raises(self):
        tree = make_tree([2], seed=39)
        with pytest.raises(ValueError):
            tree.conditional_expectation(tree.leaves()[0].id, lambda n: 1.0)


class TestSerialization:
    def test_round_trip_is_lossless(self):
        tree = make_tree([3, 2, 2], seed=55)
        buf = io.StringIO()
        save_tree(tree, buf)
        buf.seek(0)
        loaded = load_tree(buf)
        assert loaded == tree

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_round_trip_random_seeds(self, seed):
        tree = make_tree([2, 3], seed=seed)
        buf = io.StringIO()
        save_tree(tree, buf)
        buf.seek(0)
        assert load_tree(buf) == tree

    def test_rejects_unknown_header(self):
        with pytest.raises(ValueError):
            load_tree(io.StringIO("not a tree\n"))
