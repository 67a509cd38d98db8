"""Deterministic-equivalent assembly and solution extraction.

Glues the row builders into one :class:`~penalm.lp_engine.LpProblem` over a
scenario tree and maps an optimal LP vector back onto per-node decisions
with a cost decomposition.  Builder order is fixed (budget, holding, cash,
liquidity, portfolio, contribution, terminal, risk), so identical inputs
produce an identical problem, column for column and row for row.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import alm_core, icc
from .alm_core import ACR, AlmInstance, C, CR, H, VariableRegistry, Z
from .lp_engine import LpProblem, LpResult
from .scenario_tree import ScenarioTree

__all__ = ["Solution", "build_alm_lp", "extract_solution"]


def build_alm_lp(
    tree: ScenarioTree, instance: AlmInstance, cfg: icc.IccConfig
) -> tuple[LpProblem, VariableRegistry]:
    """Assemble the full LP for one tree, instance and risk configuration."""
    instance.validate()
    cfg.validate()
    if instance.params.horizon != tree.horizon:
        raise ValueError(
            f"instance horizon {instance.params.horizon} does not match tree horizon {tree.horizon}"
        )
    if instance.d != tree.n_assets:
        raise ValueError("instance asset count does not match the tree's return dimension")

    reg = alm_core.populate_registry(tree, instance, include_shortfall=cfg.mode != "none")
    rows = []
    rows += alm_core.budget_rows(tree, instance, reg)
    rows += alm_core.holding_rows(tree, instance, reg)
    rows += alm_core.cash_rows(tree, instance, reg)
    rows += alm_core.liquidity_rows(tree, instance, reg)
    rows += alm_core.portfolio_rows(tree, instance, reg)
    rows += alm_core.contribution_rows(tree, instance, reg)
    rows += alm_core.terminal_rows(tree, instance, reg)
    if cfg.mode == "oicc":
        rows += icc.oicc_rows(tree, instance, cfg, reg)
    elif cfg.mode == "micc":
        rows += icc.micc_rows(tree, instance, cfg, reg)

    problem = LpProblem(
        lower=reg.lower,
        upper=reg.upper,
        objective=alm_core.objective_vector(tree, instance, reg),
        rows=rows,
        col_names=reg.names,
        name=f"alm_{cfg.mode}",
    )
    return problem, reg


@dataclass
class Solution:
    """Optimal decisions plus the cost decomposition.

    ``decisions`` maps (role, node, asset-or-None) to values for every
    registered column.  The decomposition splits the objective into the
    discounted regular contributions, the raw discounted remedial money,
    its penalised objective share, and the rate-variation penalty;
    ``objective`` equals regular + remedial penalty + variation penalty up
    to rounding.  Allocation fractions are shares of the time-0 total asset
    (assets first, cash last).
    """

    mode: str
    objective: float
    decisions: dict[tuple[str, int, int | None], float]
    regular_cost: float
    remedial_raw: float
    remedial_penalty_cost: float
    variation_penalty_cost: float
    cr0: float
    z0: float
    allocation0: tuple[float, ...]
    iterations: int

    @property
    def remedial_share(self) -> float:
        """Remedial money as a share of total (regular + remedial) money."""
        total = self.regular_cost + self.remedial_raw
        return self.remedial_raw / total if total > 0 else 0.0


def extract_solution(
    tree: ScenarioTree,
    instance: AlmInstance,
    cfg: icc.IccConfig,
    reg: VariableRegistry,
    result: LpResult,
) -> Solution:
    if result.status != "optimal":
        raise ValueError(f"cannot extract a solution from status {result.status!r}")
    x = result.x
    decisions = {key: float(x[col]) for key, col in reg.items()}

    p = instance.params
    regular = 0.0
    remedial_raw = 0.0
    variation = 0.0
    for node in tree.non_leaves():
        exp_w = sum(
            tree.nodes[c].path_prob * tree.nodes[c].state.wages for c in node.children
        )
        regular += p.discount(node.time + 1) * exp_w * decisions[(CR, node.id, None)]
        remedial_raw += p.discount(node.time) * node.path_prob * decisions[(Z, node.id, None)]
        if node.parent is not None:
            variation += (
                p.rate_change_penalty
                * p.discount(node.time)
                * node.path_prob
                * node.state.wages
                * decisions[(ACR, node.id, None)]
            )

    d = instance.d
    h0 = [decisions[(H, 0, k)] for k in range(d)]
    c0 = decisions[(C, 0, None)]
    a0 = sum(h0) + c0
    allocation0 = tuple(v / a0 for v in h0) + (c0 / a0,)
    return Solution(
        mode=cfg.mode,
        objective=result.objective,
        decisions=decisions,
        regular_cost=regular,
        remedial_raw=remedial_raw,
        remedial_penalty_cost=p.remedial_penalty * remedial_raw,
        variation_penalty_cost=variation,
        cr0=decisions[(CR, 0, None)],
        z0=decisions[(Z, 0, None)],
        allocation0=allocation0,
        iterations=result.iterations,
    )
