import dataclasses

import numpy as np
import pytest

import penalm.alm_core as alm
from penalm.alm_core import (
    ACR,
    B,
    C,
    CR,
    DCR,
    H,
    S,
    Y,
    Z,
    default_instance,
    expected_column_count,
    expected_row_counts,
    populate_registry,
    simulate_fixed_policy,
)
from penalm.lp_engine import EQ, GE, LE, LpProblem, solve
from penalm.scenario_tree import TreeInitials, build_tree
from penalm.var_model import build_default_process, make_process

from helpers import instance_for, make_tree, max_dynamics_residual, small_initials, solve_alm


class TestInstanceData:
    def test_initial_wealth_identity(self):
        instance = default_instance()
        holdings = sum(a.initial_holding for a in instance.assets)
        assert holdings + instance.params.initial_cash == 110000.0
        assert instance.total_initial_asset == 110000.0

    def test_table_values(self):
        instance = default_instance()
        p = instance.params
        assert p.remedial_penalty == 350.0
        assert p.rate_change_penalty == 1.0
        assert p.risk_free_rate == 0.008
        assert (p.cr_lower, p.cr_upper) == (-0.08, 0.3)
        assert (p.rate_change_lower, p.rate_change_upper) == (-0.08, 0.05)
        assert p.shortfall_threshold == 1.05
        assert p.terminal_funding_target == 1.05
        by_name = {a.name: a for a in instance.assets}
        assert by_name["bonds"].lower_frac == 0.1
        assert by_name["stocks"].upper_frac == 0.5
        assert by_name["stocks"].buy_cost == 0.00425
        assert by_name["deposits"].buy_cost == 0.0015
        assert by_name["bonds"].initial_holding == 38500.0

    def test_discount_factors(self):
        p = default_instance().params
        assert p.discount(0) == 1.0
        assert p.discount(1) == pytest.approx(1.0 / 1.008, rel=1e-15)
        assert p.discount(3) == pytest.approx(1.008 ** -3, rel=1e-15)

    def test_validation_rejects_bad_data(self):
        inst = default_instance()
        bad = dataclasses.replace(inst, assets=(dataclasses.replace(inst.assets[0], lower_frac=0.9, upper_frac=0.3),) + inst.assets[1:])
        with pytest.raises(ValueError):
            bad.validate()
        bad_params = dataclasses.replace(inst.params, cr_lower=0.5, cr_upper=0.3)
        with pytest.raises(ValueError):
            dataclasses.replace(inst, params=bad_params).validate()


class TestRegistry:
    def test_column_count_formula(self):
        for branching in ([2], [3, 2], [2, 2, 2], [4, 3, 3]):
            tree = make_tree(branching, seed=11)
            instance = instance_for(tree)
            for with_icc in (False, True):
                reg = populate_registry(tree, instance, with_icc)
                assert len(reg) == expected_column_count(tree, instance, with_icc)

    def test_roles_and_bounds(self):
        tree = make_tree([2, 2], seed=12)
        instance = instance_for(tree)
        p = instance.params
        reg = populate_registry(tree, instance, include_shortfall=True)
        # nonnegative decision columns
        for role in (H, B, S, C, Z):
            col = reg.col(role, 0, 0 if role in (H, B, S) else None)
            assert reg.lower[col] == 0.0
            assert reg.upper[col] == np.inf
        cr_col = reg.col(CR, 0)
        assert (reg.lower[cr_col], reg.upper[cr_col]) == (p.cr_lower, p.cr_upper)
        child = tree.children(0)[0]
        d_col = reg.col(DCR, child)
        assert (reg.lower[d_col], reg.upper[d_col]) == (p.rate_change_lower, p.rate_change_upper)
        a_col = reg.col(ACR, child)
        assert (reg.lower[a_col], reg.upper[a_col]) == (0.0, np.inf)
        y_col = reg.col(Y, child)
        assert (reg.lower[y_col], reg.upper[y_col]) == (0.0, np.inf)

    def test_leaves_carry_no_decisions(self):
        tree = make_tree([2, 2], seed=13)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=True)
        leaf = tree.leaves()[0].id
        for role in (H, B, S):
            assert not reg.has(role, leaf, 0)
        for role in (C, CR, Z, DCR, ACR):
            assert not reg.has(role, leaf)
        assert reg.has(Y, leaf)

    def test_duplicate_registration_rejected(self):
        reg = alm.VariableRegistry()
        reg.add(H, 0, 0, 0.0, 1.0, "a")
        with pytest.raises(ValueError):
            reg.add(H, 0, 0, 0.0, 1.0, "b")


class TestRowCounts:
    @pytest.mark.parametrize("branching", [[2], [3, 2], [2, 2, 2]])
    def test_counts_match_closed_form(self, branching):
        tree = make_tree(branching, seed=21)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        counts = expected_row_counts(tree, instance, include_shortfall=False)
        assert len(alm.budget_rows(tree, instance, reg)) == counts["budget"]
        assert len(alm.holding_rows(tree, instance, reg)) == counts["holding"]
        assert len(alm.cash_rows(tree, instance, reg)) == counts["cash"]
        assert len(alm.liquidity_rows(tree, instance, reg)) == counts["liquidity"]
        assert len(alm.portfolio_rows(tree, instance, reg)) == counts["portfolio"]
        assert len(alm.contribution_rows(tree, instance, reg)) == counts["contribution"]
        assert len(alm.terminal_rows(tree, instance, reg)) == counts["terminal"]

    def test_default_instance_posts_five_share_rows_per_node(self):
        # deposits/real estate/stocks upper, bonds lower; cash 0..1 is implied
        tree = make_tree([2], seed=22)
        instance = instance_for(tree)
        counts = expected_row_counts(tree, instance, include_shortfall=False)
        assert counts["portfolio"] == 4 * len(tree.non_leaves())

    def test_unconstrained_shares_post_nothing(self):
        tree = make_tree([2], seed=23)
        instance = instance_for(tree)
        free_assets = tuple(
            dataclasses.replace(a, lower_frac=0.0, upper_frac=1.0) for a in instance.assets
        )
        instance = dataclasses.replace(instance, assets=free_assets)
        reg = populate_registry(tree, instance, include_shortfall=False)
        assert alm.portfolio_rows(tree, instance, reg) == []


class TestDynamicsOracle:
    @pytest.mark.parametrize(
        "policy",
        [
            dict(contribution_rate=0.1),
            dict(contribution_rate=0.3, buy_weights=(0.3, 0.0, 0.0, 0.2)),
            dict(
                contribution_rate=-0.05,
                buy_weights=(0.25, 0.25, 0.25, 0.25),
                sell_fracs=(0.5, 0.1, 0.0, 0.9),
            ),
        ],
    )
    def test_fixed_policies_satisfy_dynamics_rows(self, policy):
        rng = np.random.default_rng(101)
        for _ in range(8):
            branching = [int(b) for b in rng.integers(2, 4, size=rng.integers(1, 4))]
            tree = make_tree(branching, seed=int(rng.integers(10**6)))
            instance = instance_for(tree)
            decisions = simulate_fixed_policy(tree, instance, **policy)
            assert max_dynamics_residual(tree, instance, decisions) <= 1e-10

    def test_buy_and_hold_keeps_cash_nonnegative(self):
        tree = make_tree([3, 3], seed=31)
        instance = instance_for(tree)
        decisions = simulate_fixed_policy(tree, instance, 0.0)
        for node in tree.non_leaves():
            assert decisions[(C, node.id, None)] >= 0.0

    def test_policy_validation(self):
        tree = make_tree([2], seed=32)
        instance = instance_for(tree)
        with pytest.raises(ValueError):
            simulate_fixed_policy(tree, instance, 0.1, buy_weights=(1.0, 1.0, 1.0, 1.0))
        with pytest.raises(ValueError):
            simulate_fixed_policy(tree, instance, 0.1, sell_fracs=(0.5,))


class TestRowContents:
    def test_sell_entire_initial_position_forces_zero_holding(self):
        # root holding row: H = initial + B - S, so S = initial, B = 0 gives H = 0
        tree = make_tree([2], seed=41)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        row = alm.holding_rows(tree, instance, reg)[1]  # bonds at the root
        assert row.rhs == 38500.0
        x = np.zeros(len(reg))
        x[reg.col(S, 0, 1)] = 38500.0
        x[reg.col(B, 0, 1)] = 0.0
        x[reg.col(H, 0, 1)] = sum(
            v * x[c] for c, v in row.coeffs.items() if c != reg.col(H, 0, 1)
        )
        # the row then pins the holding at exactly zero
        assert row.rhs - sum(v * x[c] for c, v in row.coeffs.items() if c != reg.col(H, 0, 1)) == 0.0

    def test_buying_stocks_consumes_cash_with_transaction_cost(self):
        tree = make_tree([2], seed=42)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        cash_row = alm.cash_rows(tree, instance, reg)[0]
        stocks = 3  # asset order: deposits, bonds, real estate, stocks
        assert cash_row.coeffs[reg.col(B, 0, stocks)] == 1.0 + 0.00425
        assert cash_row.coeffs[reg.col(S, 0, stocks)] == -(1.0 - 0.00425)

    def test_conservation_pattern_single_asset_no_flows(self):
        # one asset, zero costs, unit returns, zero risk-free rate: the
        # internal budget row reduces to new totals minus old totals
        process = make_process(
            intercept=np.zeros(2),
            lag_matrix=np.zeros((2, 2)),
            residual_sd=np.full(2, 1e-120),
            residual_corr=np.eye(2),
        )
        initials = TreeInitials(1000.0, 500.0, 1.0, 0.0)
        tree = build_tree(process, [1, 1], initials, seed=1)
        params = dataclasses.replace(
            default_instance().params, horizon=2, risk_free_rate=0.0
        )
        instance = alm.AlmInstance(
            params=params,
            assets=(alm.AssetClass("only", 0.0, 1.0, 0.0, 0.0, 100.0),),
        )
        reg = populate_registry(tree, instance, include_shortfall=False)
        mid = tree.children(0)[0]
        row = alm.budget_rows(tree, instance, reg)[1]
        assert row.sense == EQ
        assert row.coeffs[reg.col(H, mid, 0)] == 1.0
        assert row.coeffs[reg.col(C, mid)] == 1.0
        assert row.coeffs[reg.col(H, 0, 0)] == -1.0
        assert row.coeffs[reg.col(C, 0)] == -1.0
        assert reg.col(B, mid, 0) not in row.coeffs  # zero costs drop out
        # flows: wages constant at 500, benefits 1; a point with balanced
        # flows (cr 0.002) and no trades conserves total wealth exactly
        decisions = simulate_fixed_policy(tree, instance, 0.002)
        assert decisions[(H, mid, 0, )] == 100.0
        assert decisions[(C, mid, None)] == decisions[(C, 0, None)]

    def test_liquidity_single_child_reduces_to_direct_coverage(self):
        tree = make_tree([1], seed=43)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        (row,) = alm.liquidity_rows(tree, instance, reg)
        child = tree.nodes[tree.children(0)[0]]
        assert row.sense == GE
        assert row.rhs == child.state.benefits
        assert row.coeffs[reg.col(C, 0)] == 1.008
        assert row.coeffs[reg.col(CR, 0)] == child.state.wages

    def test_liquidity_activity_matches_conditional_expectation_oracle(self):
        tree = make_tree([3, 2], seed=44)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        decisions = simulate_fixed_policy(tree, instance, 0.12)
        rows = alm.liquidity_rows(tree, instance, reg)
        x = np.zeros(len(reg))
        for key, col in reg.items():
            x[col] = decisions.get(key, 0.0)
        p = instance.params
        for row, node in zip(rows, tree.non_leaves()):
            activity = sum(v * x[c] for c, v in row.coeffs.items())
            expected = decisions[(C, node.id, None)] * (1 + p.risk_free_rate) + tree.conditional_expectation(
                node.id, lambda n: 0.12 * n.state.wages
            )
            oracle_rhs = tree.conditional_expectation(node.id, lambda n: n.state.benefits)
            assert activity == pytest.approx(expected, rel=1e-12)
            assert row.rhs == pytest.approx(oracle_rhs, rel=1e-12)

    def test_ben_zero_liquidity_implied_by_nonnegativity(self):
        # with no benefit payments the row has nonnegative coefficients on
        # nonnegative columns and a zero rhs, so C >= 0 and cr >= 0 imply it
        tree = make_tree([2], seed=45, initials=TreeInitials(1000.0, 500.0, 1e-9, 0.0))
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        (row,) = alm.liquidity_rows(tree, instance, reg)
        assert all(v > 0 for v in row.coeffs.values())
        assert row.rhs == pytest.approx(0.0, abs=1e-8)

    def test_portfolio_bounds_use_total_asset(self):
        tree = make_tree([2], seed=46)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        rows = {r.name: r for r in alm.portfolio_rows(tree, instance, reg)}
        # bonds (index 1) lower row: H_1 - 0.1 * (sum H + C) >= 0
        low = rows["PL0_1"]
        assert low.sense == GE and low.rhs == 0.0
        assert low.coeffs[reg.col(H, 0, 1)] == pytest.approx(0.9)
        assert low.coeffs[reg.col(H, 0, 0)] == pytest.approx(-0.1)
        assert low.coeffs[reg.col(C, 0)] == pytest.approx(-0.1)
        # stocks (index 3) upper row at one half of total asset
        up = rows["PU0_3"]
        assert up.sense == LE and up.rhs == 0.0
        assert up.coeffs[reg.col(H, 0, 3)] == pytest.approx(0.5)
        assert up.coeffs[reg.col(H, 0, 0)] == pytest.approx(-0.5)


class TestContributionRows:
    def test_rate_change_linearisation_at_optimum(self):
        tree = make_tree([2, 2], seed=51)
        instance = instance_for(tree)
        _, reg, result, sol = solve_alm(tree, instance, "none", 0.0)
        assert result.status == "optimal"
        for node in tree.non_leaves():
            if node.parent is None:
                continue
            dcr = sol.decisions[(DCR, node.id, None)]
            acr = sol.decisions[(ACR, node.id, None)]
            cr_child = sol.decisions[(CR, node.id, None)]
            cr_parent = sol.decisions[(CR, node.parent, None)]
            assert dcr == pytest.approx(cr_child - cr_parent, abs=1e-9)
            assert acr == pytest.approx(abs(dcr), abs=1e-8)

    def test_constant_rate_gives_zero_change_columns(self):
        tree = make_tree([2, 2], seed=52)
        instance = instance_for(tree)
        decisions = simulate_fixed_policy(tree, instance, 0.2)
        reg = populate_registry(tree, instance, include_shortfall=False)
        rows = alm.contribution_rows(tree, instance, reg)
        x = np.zeros(len(reg))
        for key, col in reg.items():
            x[col] = decisions.get(key, 0.0)
        for row in rows:
            activity = sum(v * x[c] for c, v in row.coeffs.items())
            if row.sense == EQ:
                assert activity == pytest.approx(row.rhs, abs=1e-12)
            else:
                assert activity >= row.rhs - 1e-12


class TestObjective:
    def test_single_scenario_one_period_objective(self):
        # a single-path one-year model with no shortfall pressure: cost is
        # the discounted contribution, minimised at the smallest feasible cr
        initials = TreeInitials(1000.0, 50000.0, 100.0, 0.5)
        tree = make_tree([1], seed=61, initials=initials)
        instance = instance_for(tree)
        _, reg, result, sol = solve_alm(tree, instance, "none", 0.0)
        assert result.status == "optimal"
        child = tree.nodes[1]
        v1 = instance.params.discount(1)
        assert sol.z0 == 0.0
        assert result.objective == pytest.approx(v1 * sol.cr0 * child.state.wages, rel=1e-12)
        # minimality: minimising cr directly gives the same rate
        problem, reg2 = _cr_only_problem(tree, instance)
        alt = solve(problem)
        assert alt.status == "optimal"
        assert alt.x[reg2.col(CR, 0)] == pytest.approx(sol.cr0, abs=1e-9)

    def test_objective_weights(self):
        tree = make_tree([2, 2], seed=62)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        obj = alm.objective_vector(tree, instance, reg)
        p = instance.params
        assert obj[reg.col(Z, 0)] == pytest.approx(350.0)  # root: prob 1, discount 1
        child = tree.children(0)[0]
        node = tree.nodes[child]
        assert obj[reg.col(Z, child)] == pytest.approx(
            350.0 * node.path_prob * p.discount(1)
        )
        assert obj[reg.col(ACR, child)] == pytest.approx(
            1.0 * node.path_prob * p.discount(1) * node.state.wages
        )
        exp_w = sum(tree.nodes[c].path_prob * tree.nodes[c].state.wages for c in tree.children(0))
        assert obj[reg.col(CR, 0)] == pytest.approx(p.discount(1) * exp_w)
        assert obj[reg.col(H, 0, 0)] == 0.0
        assert obj[reg.col(C, 0)] == 0.0

    def test_objective_matches_hand_expansion_at_fixed_point(self):
        tree = make_tree([3, 2], seed=63)
        instance = instance_for(tree)
        decisions = simulate_fixed_policy(
            tree, instance, 0.25, buy_weights=(0.2, 0.2, 0.0, 0.1)
        )
        reg = populate_registry(tree, instance, include_shortfall=False)
        obj = alm.objective_vector(tree, instance, reg)
        x = np.zeros(len(reg))
        for key, col in reg.items():
            x[col] = decisions.get(key, 0.0)
        p = instance.params
        expected = 0.0
        for node in tree.non_leaves():
            for c in node.children:
                child = tree.nodes[c]
                expected += (
                    child.path_prob
                    * p.discount(node.time + 1)
                    * decisions[(CR, node.id, None)]
                    * child.state.wages
                )
            expected += (
                node.path_prob
                * p.discount(node.time)
                * p.remedial_penalty
                * decisions[(Z, node.id, None)]
            )
            if node.parent is not None:
                expected += (
                    node.path_prob
                    * p.discount(node.time)
                    * p.rate_change_penalty
                    * node.state.wages
                    * decisions[(ACR, node.id, None)]
                )
        assert float(obj @ x) == pytest.approx(expected, rel=1e-12)


def _cr_only_problem(tree, instance):
    reg = populate_registry(tree, instance, include_shortfall=False)
    rows = []
    rows += alm.budget_rows(tree, instance, reg)
    rows += alm.holding_rows(tree, instance, reg)
    rows += alm.cash_rows(tree, instance, reg)
    rows += alm.liquidity_rows(tree, instance, reg)
    rows += alm.portfolio_rows(tree, instance, reg)
    rows += alm.contribution_rows(tree, instance, reg)
    rows += alm.terminal_rows(tree, instance, reg)
    objective = np.zeros(len(reg))
    objective[reg.col(CR, 0)] = 1.0
    # remedial money must stay expensive or the comparison is meaningless
    for node in tree.non_leaves():
        objective[reg.col(Z, node.id)] = 1e6
    return (
        LpProblem(
            lower=reg.lower,
            upper=reg.upper,
            objective=objective,
            rows=rows,
            col_names=reg.names,
        ),
        reg,
    )


class TestTerminalRows:
    def test_rows_reference_target(self):
        tree = make_tree([2], seed=71)
        instance = instance_for(tree)
        reg = populate_registry(tree, instance, include_shortfall=False)
        rows = alm.terminal_rows(tree, instance, reg)
        assert len(rows) == 2
        for row, leaf in zip(rows, tree.leaves()):
            assert row.sense == GE
            assert row.rhs == pytest.approx(
                1.05 * leaf.state.liability + leaf.state.benefits
            )

    def test_unreachable_target_with_capped_contributions_is_infeasible(self):
        tree = make_tree([2, 2], seed=72)
        base = instance_for(tree)
        params = dataclasses.replace(base.params, terminal_funding_target=10.0)
        instance = dataclasses.replace(base, params=params)
        reg = populate_registry(tree, instance, include_shortfall=False)
        for node in tree.non_leaves():  # cap the sponsor's remedial money
            reg.upper[reg.col(Z, node.id)] = 0.0
        rows = []
        rows += alm.budget_rows(tree, instance, reg)
        rows += alm.holding_rows(tree, instance, reg)
        rows += alm.cash_rows(tree, instance, reg)
        rows += alm.liquidity_rows(tree, instance, reg)
        rows += alm.portfolio_rows(tree, instance, reg)
        rows += alm.contribution_rows(tree, instance, reg)
        rows += alm.terminal_rows(tree, instance, reg)
        problem = LpProblem(
            lower=reg.lower,
            upper=reg.upper,
            objective=alm.objective_vector(tree, instance, reg),
            rows=rows,
            col_names=reg.names,
        )
        result = solve(problem)
        assert result.status == "infeasible"
        assert result.phase1_infeasibility > 1.0

    def test_tiny_target_leaves_system_feasible(self):
        tree = make_tree([2], seed=73)
        base = instance_for(tree)
        params = dataclasses.replace(base.params, terminal_funding_target=1e-6)
        instance = dataclasses.replace(base, params=params)
        _, _, result, sol = solve_alm(tree, instance, "none", 0.0)
        assert result.status == "optimal"
        assert sol.z0 == 0.0


class TestAssembledDimensions:
    @pytest.mark.parametrize("mode", ["none", "oicc", "micc"])
    @pytest.mark.parametrize("branching", [[2], [3, 2], [2, 2, 2]])
    def test_problem_dimensions_match_closed_forms(self, branching, mode):
        tree = make_tree(branching, seed=91)
        instance = instance_for(tree)
        problem, reg, _, _ = solve_alm(tree, instance, mode, 0.02)
        with_icc = mode != "none"
        assert problem.n_cols == expected_column_count(tree, instance, with_icc)
        assert len(reg) == problem.n_cols
        counts = expected_row_counts(tree, instance, with_icc)
        assert problem.n_rows == sum(counts.values())


class TestHomogeneity:
    def test_currency_rescaling_scales_cost_and_keeps_fractions(self):
        scale = 10.0
        tree_a = make_tree([2, 2], seed=81)
        instance_a = instance_for(tree_a)
        init_b = TreeInitials(
            liability=tree_a.initials.liability * scale,
            wages=tree_a.initials.wages * scale,
            benefits=tree_a.initials.benefits * scale,
            indexation=tree_a.initials.indexation,
        )
        tree_b = make_tree([2, 2], seed=81, initials=init_b)
        scaled_assets = tuple(
            dataclasses.replace(a, initial_holding=a.initial_holding * scale)
            for a in instance_a.assets
        )
        params_b = dataclasses.replace(
            instance_a.params, initial_cash=instance_a.params.initial_cash * scale
        )
        instance_b = dataclasses.replace(instance_a, params=params_b, assets=scaled_assets)
        for mode, alpha in [("none", 0.0), ("oicc", 0.03), ("micc", 0.03)]:
            _, _, res_a, sol_a = solve_alm(tree_a, instance_a, mode, alpha)
            _, _, res_b, sol_b = solve_alm(tree_b, instance_b, mode, alpha)
            assert res_a.status == res_b.status == "optimal"
            assert res_b.objective == pytest.approx(scale * res_a.objective, rel=1e-9)
            assert sol_b.cr0 == pytest.approx(sol_a.cr0, abs=1e-9)
            for fa, fb in zip(sol_a.allocation0, sol_b.allocation0):
                assert fb == pytest.approx(fa, abs=1e-9)
