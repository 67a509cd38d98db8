"""Fund data and the LP rows of the ALM model over a scenario tree.

Decision variables live on tree nodes.  Every non-leaf node carries
holdings H (one per asset class), purchases B, sales S, cash C, the
contribution rate cr decided for the coming year, and the sponsor's
remedial contribution Z.  Arcs between two non-leaf nodes carry the signed
contribution-rate change dcr and its linearised absolute value acr.  Leaf
nodes carry no decisions: terminal wealth is the parent's portfolio grown
over the last arc, valued by :func:`pre_remedial_terms`.

The builders here are pure functions from (tree, data, registry) to lists
of rows; they can run in any order and be concatenated.  Each builder's
docstring states its exact row count so tests can assert the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .lp_engine import EQ, GE, LE, LinearRow
from .scenario_tree import ScenarioTree

__all__ = [
    "AssetClass",
    "FundParameters",
    "AlmInstance",
    "VariableRegistry",
    "budget_rows",
    "cash_rows",
    "contribution_rows",
    "default_instance",
    "expected_column_count",
    "expected_row_counts",
    "holding_rows",
    "liquidity_rows",
    "objective_vector",
    "populate_registry",
    "portfolio_rows",
    "pre_remedial_terms",
    "simulate_fixed_policy",
    "terminal_rows",
]

# registry roles
H, B, S, C, CR, Z, DCR, ACR, Y = "H", "B", "S", "C", "cr", "Z", "dcr", "acr", "y"


@dataclass(frozen=True)
class AssetClass:
    """Static data of one investable asset class."""

    name: str
    lower_frac: float  # minimum share of total asset
    upper_frac: float  # maximum share of total asset
    buy_cost: float  # proportional transaction cost on purchases
    sell_cost: float  # proportional transaction cost on sales
    initial_holding: float

    def validate(self) -> None:
        if not 0.0 <= self.lower_frac <= self.upper_frac <= 1.0:
            raise ValueError(f"{self.name}: need 0 <= lower <= upper <= 1")
        if not (0.0 <= self.buy_cost < 1.0 and 0.0 <= self.sell_cost < 1.0):
            raise ValueError(f"{self.name}: transaction costs must lie in [0, 1)")
        if self.initial_holding < 0.0:
            raise ValueError(f"{self.name}: initial holding must be nonnegative")


@dataclass(frozen=True)
class FundParameters:
    """Deterministic fund parameters (everything that is not per asset)."""

    horizon: int
    risk_free_rate: float
    remedial_penalty: float  # objective weight on remedial contributions
    rate_change_penalty: float  # objective weight on |cr change| * wages
    cr_lower: float
    cr_upper: float
    rate_change_lower: float  # bound on the signed yearly cr change
    rate_change_upper: float
    initial_cash: float
    cash_lower_frac: float
    cash_upper_frac: float
    shortfall_threshold: float  # gamma: funded means wealth >= gamma * liability
    terminal_funding_target: float  # required terminal wealth / liability ratio
    shortfall_budget_frac: float  # alpha: expected-shortfall budget as liability share

    def discount(self, t: int) -> float:
        return (1.0 + self.risk_free_rate) ** (-t)

    def validate(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least one year")
        if self.cr_lower > self.cr_upper:
            raise ValueError("contribution rate bounds are crossed")
        if not self.rate_change_lower <= 0.0 <= self.rate_change_upper:
            raise ValueError("rate change bounds must straddle zero")
        if self.shortfall_threshold <= 0.0 or self.terminal_funding_target <= 0.0:
            raise ValueError("funding thresholds must be positive")
        if not 0.0 <= self.shortfall_budget_frac <= 1.0:
            raise ValueError("shortfall budget fraction must lie in [0, 1]")
        if not 0.0 <= self.cash_lower_frac <= self.cash_upper_frac <= 1.0:
            raise ValueError("cash fraction bounds must satisfy 0 <= l <= u <= 1")
        if self.initial_cash < 0.0:
            raise ValueError("initial cash must be nonnegative")


@dataclass(frozen=True)
class AlmInstance:
    """Asset-class table plus fund parameters."""

    params: FundParameters
    assets: tuple[AssetClass, ...]

    @property
    def d(self) -> int:
        return len(self.assets)

    @property
    def total_initial_asset(self) -> float:
        return sum(a.initial_holding for a in self.assets) + self.params.initial_cash

    def validate(self) -> None:
        if not self.assets:
            raise ValueError("at least one asset class is required")
        self.params.validate()
        for a in self.assets:
            a.validate()


def default_instance(alpha: float = 0.035) -> AlmInstance:
    """The built-in desk calibration: four asset classes plus cash."""
    params = FundParameters(
        horizon=5,
        risk_free_rate=0.008,
        remedial_penalty=350.0,
        rate_change_penalty=1.0,
        cr_lower=-0.08,
        cr_upper=0.3,
        rate_change_lower=-0.08,
        rate_change_upper=0.05,
        initial_cash=4950.0,
        cash_lower_frac=0.0,
        cash_upper_frac=1.0,
        shortfall_threshold=1.05,
        terminal_funding_target=1.05,
        shortfall_budget_frac=alpha,
    )
    assets = (
        AssetClass("deposits", 0.0, 0.5, 0.0015, 0.0015, 16500.0),
        AssetClass("bonds", 0.1, 1.0, 0.0015, 0.0015, 38500.0),
        AssetClass("real_estate", 0.0, 0.3, 0.00425, 0.00425, 17600.0),
        AssetClass("stocks", 0.0, 0.5, 0.00425, 0.00425, 32450.0),
    )
    return AlmInstance(params=params, assets=assets)


# -- variable registry ----------------------------------------------------------

_B36 = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _b36(n: int) -> str:
    if n == 0:
        return "0"
    out = []
    while n:
        n, r = divmod(n, 36)
        out.append(_B36[r])
    return "".join(reversed(out))


class VariableRegistry:
    """Maps (role, node, asset index) to an LP column with recorded bounds.

    Columns are registered in node-id order with a fixed role order, so the
    layout is deterministic for a given tree and configuration.
    """

    def __init__(self) -> None:
        self._index: dict[tuple[str, int, int | None], int] = {}
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.names: list[str] = []

    def add(self, role: str, node: int, k: int | None, lo: float, up: float, name: str) -> int:
        key = (role, node, k)
        if key in self._index:
            raise ValueError(f"column registered twice: {key}")
        col = len(self.names)
        self._index[key] = col
        self.lower.append(lo)
        self.upper.append(up)
        self.names.append(name)
        return col

    def col(self, role: str, node: int, k: int | None = None) -> int:
        return self._index[(role, node, k)]

    def has(self, role: str, node: int, k: int | None = None) -> bool:
        return (role, node, k) in self._index

    def __len__(self) -> int:
        return len(self.names)

    def items(self) -> Iterator[tuple[tuple[str, int, int | None], int]]:
        return iter(self._index.items())


def populate_registry(
    tree: ScenarioTree, instance: AlmInstance, include_shortfall: bool
) -> VariableRegistry:
    """Register every decision column.

    Non-leaf nodes get H/B/S per asset plus C, cr and Z; non-root non-leaf
    nodes additionally get the rate-change pair (dcr, acr); every non-root
    node gets a shortfall auxiliary y when ``include_shortfall``.
    """
    p = instance.params
    reg = VariableRegistry()
    inf = float("inf")
    for node in tree.nodes:
        tag = _b36(node.id)
        if node.time < tree.horizon:
            for k in range(instance.d):
                reg.add(H, node.id, k, 0.0, inf, f"H{tag}_{k}")
            for k in range(instance.d):
                reg.add(B, node.id, k, 0.0, inf, f"B{tag}_{k}")
            for k in range(instance.d):
                reg.add(S, node.id, k, 0.0, inf, f"S{tag}_{k}")
            reg.add(C, node.id, None, 0.0, inf, f"C{tag}")
            reg.add(CR, node.id, None, p.cr_lower, p.cr_upper, f"R{tag}")
            reg.add(Z, node.id, None, 0.0, inf, f"Z{tag}")
            if node.parent is not None:
                reg.add(DCR, node.id, None, p.rate_change_lower, p.rate_change_upper, f"D{tag}")
                reg.add(ACR, node.id, None, 0.0, inf, f"A{tag}")
        if node.parent is not None and include_shortfall:
            reg.add(Y, node.id, None, 0.0, inf, f"Y{tag}")
    return reg


def expected_column_count(tree: ScenarioTree, instance: AlmInstance, include_shortfall: bool) -> int:
    """Closed-form column count: (3d+3) per non-leaf node, plus 2 per
    non-root non-leaf node, plus one y per non-root node when shortfall
    auxiliaries are included."""
    n_nonleaf = len(tree.non_leaves())
    n_nodes = len(tree.nodes)
    count = (3 * instance.d + 3) * n_nonleaf + 2 * (n_nonleaf - 1)
    if include_shortfall:
        count += n_nodes - 1
    return count


# -- row builders ---------------------------------------------------------------


def budget_rows(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> list[LinearRow]:
    """Wealth accounting identities, one equality per non-leaf node.

    At the root, initial holdings plus cash plus the remedial contribution,
    net of transaction costs, equal the allocated total.  At later non-leaf
    nodes the allocated total equals the grown portfolio plus net external
    flows plus the remedial contribution net of transaction costs.  Row
    count: number of non-leaf nodes.
    """
    p = instance.params
    rows = []
    for node in tree.non_leaves():
        tag = _b36(node.id)
        coeffs: dict[int, float] = {}
        for k in range(instance.d):
            coeffs[reg.col(H, node.id, k)] = 1.0
        coeffs[reg.col(C, node.id)] = 1.0
        for k, a in enumerate(instance.assets):
            if a.buy_cost:
                coeffs[reg.col(B, node.id, k)] = a.buy_cost
            if a.sell_cost:
                coeffs[reg.col(S, node.id, k)] = a.sell_cost
        coeffs[reg.col(Z, node.id)] = -1.0
        if node.parent is None:
            rhs = instance.total_initial_asset
        else:
            par = node.parent
            for k in range(instance.d):
                coeffs[reg.col(H, par, k)] = -node.state.gross_returns[k]
            coeffs[reg.col(C, par)] = -(1.0 + p.risk_free_rate)
            coeffs[reg.col(CR, par)] = -node.state.wages
            rhs = -node.state.benefits
        rows.append(LinearRow(f"BU{tag}", EQ, rhs, coeffs))
    return rows


def holding_rows(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> list[LinearRow]:
    """Per-asset holding balance, one equality per (non-leaf node, asset).

    Root: holdings equal initial positions plus purchases minus sales.
    Later: holdings equal the parent position grown by the arc return plus
    purchases minus sales.  Row count: d * number of non-leaf nodes.
    """
    rows = []
    for node in tree.non_leaves():
        tag = _b36(node.id)
        for k, a in enumerate(instance.assets):
            coeffs = {
                reg.col(H, node.id, k): 1.0,
                reg.col(B, node.id, k): -1.0,
                reg.col(S, node.id, k): 1.0,
            }
            if node.parent is None:
                rhs = a.initial_holding
            else:
                coeffs[reg.col(H, node.parent, k)] = -node.state.gross_returns[k]
                rhs = 0.0
            rows.append(LinearRow(f"HD{tag}_{k}", EQ, rhs, coeffs))
    return rows


def cash_rows(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> list[LinearRow]:
    """Cash balance, one equality per non-leaf node.

    Buying x of asset k consumes x*(1+buy_cost_k) of cash; selling yields
    x*(1-sell_cost_k).  Contributions, benefit payments and the remedial
    contribution settle in cash.  Row count: number of non-leaf nodes.
    """
    p = instance.params
    rows = []
    for node in tree.non_leaves():
        tag = _b36(node.id)
        coeffs = {reg.col(C, node.id): 1.0}
        for k, a in enumerate(instance.assets):
            coeffs[reg.col(B, node.id, k)] = 1.0 + a.buy_cost
            coeffs[reg.col(S, node.id, k)] = -(1.0 - a.sell_cost)
        coeffs[reg.col(Z, node.id)] = -1.0
        if node.parent is None:
            rhs = p.initial_cash
        else:
            coeffs[reg.col(C, node.parent)] = -(1.0 + p.risk_free_rate)
            coeffs[reg.col(CR, node.parent)] = -node.state.wages
            rhs = -node.state.benefits
        rows.append(LinearRow(f"CA{tag}", EQ, rhs, coeffs))
    return rows


def liquidity_rows(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> list[LinearRow]:
    """Expected next-year cash-flow coverage, one >= row per non-leaf node.

    Grown cash plus expected contributions must cover expected benefit
    payments over the coming year.  Child wages and benefits are tree data,
    so the row is linear in C and cr.  Row count: number of non-leaf nodes.
    """
    p = instance.params
    rows = []
    for node in tree.non_leaves():
        tag = _b36(node.id)
        exp_w = sum(tree.nodes[c].cond_prob * tree.nodes[c].state.wages for c in node.children)
        exp_ben = sum(
            tree.nodes[c].cond_prob * tree.nodes[c].state.benefits for c in node.children
        )
        coeffs = {
            reg.col(C, node.id): 1.0 + p.risk_free_rate,
            reg.col(CR, node.id): exp_w,
        }
        rows.append(LinearRow(f"LQ{tag}", GE, exp_ben, coeffs))
    return rows


def portfolio_rows(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> list[LinearRow]:
    """Allocation-share bounds per non-leaf node, asset classes and cash.

    Shares are taken of the node's total asset (sum of holdings plus cash),
    substituted inline.  Rows that nonnegativity already implies are not
    posted: a lower row needs lower_frac > 0, an upper row needs
    upper_frac < 1.  Row count: (number of posted lower/upper pairs over
    assets and cash) * number of non-leaf nodes.
    """
    rows = []
    d = instance.d
    p = instance.params
    for node in tree.non_leaves():
        tag = _b36(node.id)
        h_cols = [reg.col(H, node.id, k) for k in range(d)]
        c_col = reg.col(C, node.id)
        for k, a in enumerate(instance.assets):
            if a.lower_frac > 0.0:
                coeffs = {col: -a.lower_frac for col in h_cols}
                coeffs[c_col] = -a.lower_frac
                coeffs[h_cols[k]] = 1.0 - a.lower_frac
                rows.append(LinearRow(f"PL{tag}_{k}", GE, 0.0, coeffs))
            if a.upper_frac < 1.0:
                coeffs = {col: -a.upper_frac for col in h_cols}
                coeffs[c_col] = -a.upper_frac
                coeffs[h_cols[k]] = 1.0 - a.upper_frac
                rows.append(LinearRow(f"PU{tag}_{k}", LE, 0.0, coeffs))
        if p.cash_lower_frac > 0.0:
            coeffs = {col: -p.cash_lower_frac for col in h_cols}
            coeffs[c_col] = 1.0 - p.cash_lower_frac
            rows.append(LinearRow(f"PL{tag}_c", GE, 0.0, coeffs))
        if p.cash_upper_frac < 1.0:
            coeffs = {col: -p.cash_upper_frac for col in h_cols}
            coeffs[c_col] = 1.0 - p.cash_upper_frac
            rows.append(LinearRow(f"PU{tag}_c", LE, 0.0, coeffs))
    return rows


def contribution_rows(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> list[LinearRow]:
    """Rate-change linking rows per arc between two non-leaf nodes.

    dcr is the signed change of cr along the arc (bounded via its column
    bounds); acr dominates both dcr and -dcr, and a positive objective
    weight presses it onto |dcr| at any optimum.  Row count: 3 * (number of
    non-leaf nodes - 1).
    """
    rows = []
    for node in tree.non_leaves():
        if node.parent is None:
            continue
        tag = _b36(node.id)
        dcr = reg.col(DCR, node.id)
        acr = reg.col(ACR, node.id)
        rows.append(
            LinearRow(
                f"DC{tag}",
                EQ,
                0.0,
                {dcr: 1.0, reg.col(CR, node.id): -1.0, reg.col(CR, node.parent): 1.0},
            )
        )
        rows.append(LinearRow(f"V1{tag}", GE, 0.0, {acr: 1.0, dcr: -1.0}))
        rows.append(LinearRow(f"V2{tag}", GE, 0.0, {acr: 1.0, dcr: 1.0}))
    return rows


def pre_remedial_terms(
    tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry, node_id: int
) -> tuple[dict[int, float], float]:
    """Linear expression of wealth entering a non-root node.

    This is the parent's portfolio grown over the arc plus contributions
    minus benefit payments, before any remedial contribution or trading at
    the node itself.  Returns (coefficients, constant); the expression value
    is ``coeffs @ x + constant``.
    """
    node = tree.node(node_id)
    if node.parent is None:
        raise ValueError("the root has no arc; pre-arc wealth is undefined")
    p = instance.params
    coeffs = {
        reg.col(H, node.parent, k): node.state.gross_returns[k] for k in range(instance.d)
    }
    coeffs[reg.col(C, node.parent)] = 1.0 + p.risk_free_rate
    coeffs[reg.col(CR, node.parent)] = node.state.wages
    return coeffs, -node.state.benefits


def terminal_rows(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> list[LinearRow]:
    """Terminal funding requirement, one >= row per leaf.

    Terminal wealth (no trading, no remedial contribution at the horizon)
    must reach the target multiple of terminal liability.  Row count:
    number of leaves.
    """
    target = instance.params.terminal_funding_target
    rows = []
    for leaf in tree.leaves():
        coeffs, const = pre_remedial_terms(tree, instance, reg, leaf.id)
        rhs = target * leaf.state.liability - const
        rows.append(LinearRow(f"TF{_b36(leaf.id)}", GE, rhs, coeffs))
    return rows


def objective_vector(tree: ScenarioTree, instance: AlmInstance, reg: VariableRegistry) -> np.ndarray:
    """Discounted expected funding cost.

    Regular contributions enter through each non-leaf node's cr weighted by
    the discounted, probability-weighted wages of its children; remedial
    contributions carry the remedial penalty at the node's own discount
    factor (every Z is penalised, including the root's); rate changes carry
    the change penalty times the arc-end wages.
    """
    p = instance.params
    obj = np.zeros(len(reg))
    for node in tree.non_leaves():
        exp_w = sum(
            tree.nodes[c].path_prob * tree.nodes[c].state.wages for c in node.children
        )
        obj[reg.col(CR, node.id)] += p.discount(node.time + 1) * exp_w
        obj[reg.col(Z, node.id)] += p.remedial_penalty * p.discount(node.time) * node.path_prob
        if node.parent is not None:
            obj[reg.col(ACR, node.id)] += (
                p.rate_change_penalty * p.discount(node.time) * node.path_prob * node.state.wages
            )
    return obj


def expected_row_counts(
    tree: ScenarioTree, instance: AlmInstance, include_shortfall: bool
) -> dict[str, int]:
    """Closed-form row counts per builder for a given tree and instance."""
    n_nonleaf = len(tree.non_leaves())
    n_leaves = len(tree.leaves())
    n_nodes = len(tree.nodes)
    p = instance.params
    pairs = sum(1 for a in instance.assets if a.lower_frac > 0.0) + sum(
        1 for a in instance.assets if a.upper_frac < 1.0
    )
    pairs += (1 if p.cash_lower_frac > 0.0 else 0) + (1 if p.cash_upper_frac < 1.0 else 0)
    counts = {
        "budget": n_nonleaf,
        "holding": instance.d * n_nonleaf,
        "cash": n_nonleaf,
        "liquidity": n_nonleaf,
        "portfolio": pairs * n_nonleaf,
        "contribution": 3 * (n_nonleaf - 1),
        "terminal": n_leaves,
    }
    if include_shortfall:
        counts["icc_shortfall"] = n_nodes - 1
        counts["icc_budget"] = n_nonleaf
    return counts


# -- forward simulation ----------------------------------------------------------


def simulate_fixed_policy(
    tree: ScenarioTree,
    instance: AlmInstance,
    contribution_rate: float,
    buy_weights: tuple[float, ...] | None = None,
    sell_fracs: tuple[float, ...] | None = None,
) -> dict[tuple[str, int, int | None], float]:
    """Roll a fixed policy forward and return a full decision map.

    The policy holds the contribution rate constant, sells the given
    fraction of each grown position, then spends the given weights of the
    available cash on purchases (gross of transaction costs).  The remedial
    contribution at each node is exactly the cash injection needed to keep
    the balance nonnegative.  The arithmetic mirrors the cash and holding
    dynamics directly, not the LP rows, so the resulting decision map is an
    independent witness for the row builders.
    """
    d = instance.d
    p = instance.params
    buy_weights = buy_weights or (0.0,) * d
    sell_fracs = sell_fracs or (0.0,) * d
    if len(buy_weights) != d or len(sell_fracs) != d:
        raise ValueError("policy vectors must have one entry per asset class")
    if sum(buy_weights) > 1.0 + 1e-12:
        raise ValueError("buy weights must spend at most the available cash")

    decisions: dict[tuple[str, int, int | None], float] = {}
    for node in tree.non_leaves():
        if node.parent is None:
            grown = [a.initial_holding for a in instance.assets]
            cash_in = p.initial_cash
        else:
            grown = [
                node.state.gross_returns[k] * decisions[(H, node.parent, k)] for k in range(d)
            ]
            cash_in = (
                decisions[(C, node.parent, None)] * (1.0 + p.risk_free_rate)
                + contribution_rate * node.state.wages
                - node.state.benefits
            )
        z = max(0.0, -cash_in)
        cash = cash_in + z
        sells = [sell_fracs[k] * grown[k] for k in range(d)]
        for k, a in enumerate(instance.assets):
            cash += (1.0 - a.sell_cost) * sells[k]
        buys = [buy_weights[k] * cash / (1.0 + instance.assets[k].buy_cost) for k in range(d)]
        for k, a in enumerate(instance.assets):
            cash -= (1.0 + a.buy_cost) * buys[k]
        for k in range(d):
            decisions[(H, node.id, k)] = grown[k] + buys[k] - sells[k]
            decisions[(B, node.id, k)] = buys[k]
            decisions[(S, node.id, k)] = sells[k]
        decisions[(C, node.id, None)] = cash
        decisions[(CR, node.id, None)] = contribution_rate
        decisions[(Z, node.id, None)] = z
        if node.parent is not None:
            decisions[(DCR, node.id, None)] = 0.0
            decisions[(ACR, node.id, None)] = 0.0
    return decisions
