"""Expected-shortfall risk constraints in one-period and multiperiod form.

Both variants bound, at every non-leaf node, the conditional expectation of
next year's funding shortfall: the amount by which pre-remedial wealth
misses the threshold multiple of liability.  The shortfall is linearised
with one nonnegative auxiliary y per arc:

    wealth_into(child) + y_child >= gamma * L_child          (per child)
    sum_children  p(child) * y_child <= budget(node)         (per node)

The one-period form budgets each node with ``alpha * L_node``; the
multiperiod form keeps every budget a node has ever been subject to along
its history, which collapses to the running minimum of ``alpha * L`` over
the node's root path.  With a constant budget override the two forms emit
identical rows.

Shortfalls are evaluated on pre-remedial wealth, so a remedial contribution
at a node can never mask that node's own shortfall; it helps only by
raising the wealth carried into the following year.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

from .alm_core import AlmInstance, C, CR, H, VariableRegistry, Y, _b36, pre_remedial_terms
from .lp_engine import GE, LE, LinearRow
from .scenario_tree import ScenarioTree

__all__ = [
    "IccConfig",
    "expected_shortfall_oracle",
    "micc_rows",
    "oicc_rows",
    "pre_remedial_wealth",
    "running_min_beta",
    "shortfall_report",
    "write_shortfall_csv",
]

MODES = ("none", "oicc", "micc")


@dataclass(frozen=True)
class IccConfig:
    """Risk-constraint mode and parameters.

    ``alpha`` scales the expected-shortfall budget as a fraction of
    liability; ``gamma`` is the funding threshold the shortfall is measured
    against.  ``beta_override`` replaces the liability-scaled budget with a
    constant at every node (making the one-period and multiperiod variants
    coincide), mainly for experiments and tests.
    """

    mode: str
    alpha: float
    gamma: float
    beta_override: float | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")


def running_min_beta(tree: ScenarioTree, node_id: int, alpha: float) -> float:
    """alpha times the smallest liability on the node's root path."""
    return alpha * min(tree.nodes[i].state.liability for i in tree.root_path(node_id))


def _shortfall_rows(
    tree: ScenarioTree, instance: AlmInstance, cfg: IccConfig, reg: VariableRegistry
) -> list[LinearRow]:
    # one row per arc: wealth into the child plus its auxiliary covers the threshold
    rows = []
    for node in tree.nodes:
        if node.parent is None:
            continue
        coeffs, const = pre_remedial_terms(tree, instance, reg, node.id)
        coeffs[reg.col(Y, node.id)] = 1.0
        rhs = cfg.gamma * node.state.liability - const
        rows.append(LinearRow(f"IY{_b36(node.id)}", GE, rhs, coeffs))
    return rows


def _budget_rows(
    tree: ScenarioTree, cfg: IccConfig, reg: VariableRegistry, budgets: dict[int, float]
) -> list[LinearRow]:
    rows = []
    for node in tree.non_leaves():
        coeffs = {
            reg.col(Y, c): tree.nodes[c].cond_prob for c in node.children
        }
        rows.append(LinearRow(f"IA{_b36(node.id)}", LE, budgets[node.id], coeffs))
    return rows


def oicc_rows(
    tree: ScenarioTree, instance: AlmInstance, cfg: IccConfig, reg: VariableRegistry
) -> list[LinearRow]:
    """One-period constraint rows: each node budgets its own children.

    Row count: (nodes - 1) shortfall rows plus one budget row per non-leaf
    node.
    """
    cfg.validate()
    if cfg.mode != "oicc":
        raise ValueError(f"config mode is {cfg.mode!r}, expected 'oicc'")
    budgets = {
        n.id: cfg.beta_override if cfg.beta_override is not None else cfg.alpha * n.state.liability
        for n in tree.non_leaves()
    }
    return _shortfall_rows(tree, instance, cfg, reg) + _budget_rows(tree, cfg, reg, budgets)


def micc_rows(
    tree: ScenarioTree, instance: AlmInstance, cfg: IccConfig, reg: VariableRegistry
) -> list[LinearRow]:
    """Multiperiod constraint rows via the running-minimum budget.

    Identical shortfall rows as the one-period form; the budget at a node is
    the smallest liability-scaled budget along its history, so every budget
    inherited from an ancestor is enforced by a single row.  Row count as in
    :func:`oicc_rows`.
    """
    cfg.validate()
    if cfg.mode != "micc":
        raise ValueError(f"config mode is {cfg.mode!r}, expected 'micc'")
    budgets = {
        n.id: cfg.beta_override
        if cfg.beta_override is not None
        else running_min_beta(tree, n.id, cfg.alpha)
        for n in tree.non_leaves()
    }
    return _shortfall_rows(tree, instance, cfg, reg) + _budget_rows(tree, cfg, reg, budgets)


def pre_remedial_wealth(
    tree: ScenarioTree,
    instance: AlmInstance,
    decisions: dict[tuple[str, int, int | None], float],
    node_id: int,
) -> float:
    """Wealth carried into a non-root node under the given decisions.

    Computed by direct arithmetic from the decision values, independent of
    any LP rows or auxiliaries.
    """
    node = tree.node(node_id)
    if node.parent is None:
        raise ValueError("the root has no arc; pre-arc wealth is undefined")
    p = instance.params
    total = sum(
        node.state.gross_returns[k] * decisions[(H, node.parent, k)]
        for k in range(instance.d)
    )
    total += decisions[(C, node.parent, None)] * (1.0 + p.risk_free_rate)
    total += decisions[(CR, node.parent, None)] * node.state.wages
    return total - node.state.benefits


def expected_shortfall_oracle(
    tree: ScenarioTree,
    instance: AlmInstance,
    decisions: dict[tuple[str, int, int | None], float],
    node_id: int,
    gamma: float,
) -> float:
    """Conditional expected shortfall over a node's children.

    Brute force: probability-weighted sum of ``max(0, gamma * L - wealth)``
    over the children, from decision values alone.
    """
    node = tree.node(node_id)
    if not node.children:
        raise ValueError(f"node {node_id} is a leaf; expected shortfall is undefined")
    total = 0.0
    for c in node.children:
        child = tree.nodes[c]
        wealth = pre_remedial_wealth(tree, instance, decisions, c)
        total += child.cond_prob * max(0.0, gamma * child.state.liability - wealth)
    return total


def shortfall_report(
    tree: ScenarioTree,
    instance: AlmInstance,
    cfg: IccConfig,
    decisions: dict[tuple[str, int, int | None], float],
) -> list[tuple[int, int, float, float, float]]:
    """Per-node audit rows: (node, time, budget, expected shortfall, slack).

    The budget column reflects the configured mode; under mode "none" the
    one-period budget is reported for reference but nothing was enforced.
    """
    out = []
    for node in tree.non_leaves():
        if cfg.beta_override is not None:
            beta = cfg.beta_override
        elif cfg.mode == "micc":
            beta = running_min_beta(tree, node.id, cfg.alpha)
        else:
            beta = cfg.alpha * node.state.liability
        shortfall = expected_shortfall_oracle(tree, instance, decisions, node.id, cfg.gamma)
        out.append((node.id, node.time, beta, shortfall, beta - shortfall))
    return out


def write_shortfall_csv(report: list[tuple[int, int, float, float, float]], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["node", "time", "budget", "expected_shortfall", "slack"])
    for row in report:
        writer.writerow([row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4])])
