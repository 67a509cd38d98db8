"""Shared test oracles and generators.

Everything here is deliberately independent of the solver and row builders
it is used to check: the vertex enumerator works from raw constraint data,
the naive multiperiod formulation posts one row per (node, ancestor) pair
instead of a running minimum, and the dynamics checker evaluates rows by
direct arithmetic.
"""

from __future__ import annotations

import dataclasses
from itertools import combinations

import numpy as np

from penalm.alm_core import AlmInstance, VariableRegistry, Y, default_instance
from penalm.assemble import build_alm_lp, extract_solution
from penalm.icc import IccConfig, _shortfall_rows
from penalm.lp_engine import EQ, GE, LE, LinearRow, LpProblem, solve
from penalm.scenario_tree import ScenarioTree, TreeInitials, build_tree
from penalm.var_model import build_default_process

DEFAULT_PROCESS = build_default_process()


# -- random LPs and the vertex-enumeration oracle --------------------------------


def random_box_lp(rng: np.random.Generator, n: int = 6, m: int = 6):
    """Feasible, bounded LP with dense rows and box bounds.

    Feasibility is guaranteed by construction: rows are positioned around a
    random interior point.  Returns (problem, A, senses, rhs) with the raw
    row data for the enumerator.
    """
    x0 = rng.uniform(0.2, 0.8, n)
    lo = np.zeros(n)
    up = rng.uniform(1.0, 2.0, n)
    A = rng.normal(size=(m, n))
    senses = list(rng.choice([LE, GE, EQ], size=m, p=[0.6, 0.3, 0.1]))
    rhs = np.empty(m)
    rows = []
    for i in range(m):
        act = A[i] @ x0
        if senses[i] == LE:
            rhs[i] = act + abs(rng.normal()) * 0.4
        elif senses[i] == GE:
            rhs[i] = act - abs(rng.normal()) * 0.4
        else:
            rhs[i] = act
        rows.append(LinearRow(f"r{i}", senses[i], rhs[i], {j: A[i, j] for j in range(n)}))
    c = rng.normal(size=n)
    problem = LpProblem(lower=lo, upper=up, objective=c, rows=rows)
    return problem, A, senses, rhs


def vertex_enumeration_optimum(
    lower: np.ndarray,
    upper: np.ndarray,
    objective: np.ndarray,
    A: np.ndarray,
    senses: list[str],
    rhs: np.ndarray,
    feas_tol: float = 1e-7,
) -> float:
    """Brute-force optimum of a bounded-feasible LP by enumerating vertices.

    A vertex is a solution of n linearly independent active constraints
    drawn from the rows plus the bound hyperplanes, feasible for everything
    else.  Equality rows are active in every combination.  Assumes the
    polytope is bounded (finite box) and nonempty.
    """
    m, n = A.shape
    # constraint stack: rows, then x_j = lo_j, then x_j = up_j
    planes = np.vstack([A, np.eye(n), np.eye(n)])
    values = np.concatenate([rhs, lower, upper])
    eq_idx = [i for i in range(m) if senses[i] == EQ]
    free_idx = [i for i in range(len(values)) if i not in eq_idx]

    combos = [tuple(eq_idx) + c for c in combinations(free_idx, n - len(eq_idx))]
    mats = planes[np.array(combos)]  # (K, n, n)
    rhss = values[np.array(combos)]  # (K, n)
    dets = np.abs(np.linalg.det(mats))
    ok = dets > 1e-12
    best = np.inf
    if ok.any():
        sols = np.linalg.solve(mats[ok], rhss[ok][..., None])[..., 0]  # (K', n)
        # feasibility of every candidate against all constraints
        acts = sols @ A.T  # (K', m)
        feas = np.ones(len(sols), dtype=bool)
        for i in range(m):
            if senses[i] == LE:
                feas &= acts[:, i] <= rhs[i] + feas_tol
            elif senses[i] == GE:
                feas &= acts[:, i] >= rhs[i] - feas_tol
            else:
                feas &= np.abs(acts[:, i] - rhs[i]) <= feas_tol
        feas &= (sols >= lower - feas_tol).all(axis=1)
        feas &= (sols <= upper + feas_tol).all(axis=1)
        if feas.any():
            best = float((sols[feas] @ objective).min())
    return best


# -- scenario trees and ALM instances ---------------------------------------------


def small_initials(rng: np.random.Generator | None = None) -> TreeInitials:
    if rng is None:
        return TreeInitials(liability=120000.0, wages=20000.0, benefits=6000.0, indexation=0.5)
    return TreeInitials(
        liability=float(rng.uniform(80000.0, 160000.0)),
        wages=float(rng.uniform(15000.0, 60000.0)),
        benefits=float(rng.uniform(3000.0, 9000.0)),
        indexation=float(rng.uniform(0.0, 1.0)),
    )


def make_tree(branching, seed: int, initials: TreeInitials | None = None) -> ScenarioTree:
    return build_tree(DEFAULT_PROCESS, branching, initials or small_initials(), seed)


def instance_for(tree: ScenarioTree, alpha: float = 0.035) -> AlmInstance:
    base = default_instance(alpha)
    return dataclasses.replace(
        base, params=dataclasses.replace(base.params, horizon=tree.horizon)
    )


def solve_alm(
    tree: ScenarioTree,
    instance: AlmInstance,
    mode: str,
    alpha: float,
    beta_override: float | None = None,
):
    """Build, solve and extract; returns (problem, registry, result, solution|None)."""
    cfg = IccConfig(
        mode=mode,
        alpha=alpha,
        gamma=instance.params.shortfall_threshold,
        beta_override=beta_override,
    )
    problem, reg = build_alm_lp(tree, instance, cfg)
    result = solve(problem)
    sol = (
        extract_solution(tree, instance, cfg, reg, result)
        if result.status == "optimal"
        else None
    )
    return problem, reg, result, sol


# -- the naive multiperiod formulation --------------------------------------------


def naive_micc_problem(
    tree: ScenarioTree, instance: AlmInstance, alpha: float
) -> LpProblem:
    """Multiperiod risk constraints without the running-minimum collapse.

    Posts, for every non-leaf node and every ancestor-or-self, one budget
    row bounding the node's expected shortfall by alpha times the
    ancestor's liability.  Same shortfall rows and auxiliaries as the
    production builder; only the budget rows differ.
    """
    import penalm.alm_core as alm_core

    cfg = IccConfig(mode="micc", alpha=alpha, gamma=instance.params.shortfall_threshold)
    reg = alm_core.populate_registry(tree, instance, include_shortfall=True)
    rows = []
    rows += alm_core.budget_rows(tree, instance, reg)
    rows += alm_core.holding_rows(tree, instance, reg)
    rows += alm_core.cash_rows(tree, instance, reg)
    rows += alm_core.liquidity_rows(tree, instance, reg)
    rows += alm_core.portfolio_rows(tree, instance, reg)
    rows += alm_core.contribution_rows(tree, instance, reg)
    rows += alm_core.terminal_rows(tree, instance, reg)
    rows += _shortfall_rows(tree, instance, cfg, reg)
    for node in tree.non_leaves():
        coeffs = {reg.col(Y, c): tree.nodes[c].cond_prob for c in node.children}
        for k, anc in enumerate(tree.root_path(node.id)):
            rows.append(
                LinearRow(
                    f"NB{node.id}_{k}",
                    LE,
                    alpha * tree.nodes[anc].state.liability,
                    dict(coeffs),
                )
            )
    return LpProblem(
        lower=reg.lower,
        upper=reg.upper,
        objective=alm_core.objective_vector(tree, instance, reg),
        rows=rows,
        col_names=reg.names,
        name="alm_micc_naive",
    )


# -- dynamics residuals ------------------------------------------------------------


def max_dynamics_residual(
    tree: ScenarioTree,
    instance: AlmInstance,
    decisions: dict[tuple[str, int, int | None], float],
) -> float:
    """Worst absolute residual of the budget/holding/cash rows at a decision map."""
    import penalm.alm_core as alm_core

    reg = alm_core.populate_registry(tree, instance, include_shortfall=False)
    x = np.zeros(len(reg))
    for key, col in reg.items():
        x[col] = decisions.get(key, 0.0)
    worst = 0.0
    for rows in (
        alm_core.budget_rows(tree, instance, reg),
        alm_core.holding_rows(tree, instance, reg),
        alm_core.cash_rows(tree, instance, reg),
    ):
        for row in rows:
            act = sum(v * x[c] for c, v in row.coeffs.items())
            worst = max(worst, abs(act - row.rhs))
    return worst
