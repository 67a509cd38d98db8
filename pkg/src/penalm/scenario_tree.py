"""Scenario tree generation and bookkeeping.

A tree node represents the state of the economy at a decision time; arcs
carry one year of sampled wage growth and asset returns.  Liabilities,
total wages and benefit payments are propagated along each arc from their
initial levels:

    L_child   = L_parent * (1 + w)
    W_child   = W_parent * (1 + w)
    Ben_child = Ben_parent * (1 + kappa * w)

Nodes are stored in depth-first preorder and node ids are list indices,
so there is exactly one decision vector per node and scenarios sharing a
history share the corresponding decisions by construction.

Randomness is derived per arc from ``(seed, path-of-child-indices)`` via
``numpy.random.SeedSequence`` spawn keys, so the sampled tree does not
depend on traversal order and identical seeds reproduce identical trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np

from .var_model import VarProcess, stationary_mean, step

__all__ = [
    "EconomicState",
    "ScenarioTree",
    "TreeInitials",
    "TreeNode",
    "build_tree",
    "load_tree",
    "save_tree",
]

_FORMAT_TAG = "scenario-tree v1"


@dataclass(frozen=True)
class TreeInitials:
    """Time-0 levels and the benefit indexation fraction kappa."""

    liability: float
    wages: float
    benefits: float
    indexation: float = 0.5

    def validate(self) -> None:
        if self.liability <= 0 or self.wages <= 0 or self.benefits <= 0:
            raise ValueError("initial liability, wages and benefits must be positive")
        if self.indexation < 0:
            raise ValueError("benefit indexation must be nonnegative")


@dataclass(frozen=True)
class EconomicState:
    """Arc data plus the levels reached at the node.

    ``wage_growth`` and ``gross_returns`` describe the year leading into
    the node; at the root they are 0 and all ones.  ``gross_returns`` are
    positive because they are sampled in log space.
    """

    wage_growth: float
    gross_returns: tuple[float, ...]
    liability: float
    wages: float
    benefits: float


@dataclass(frozen=True)
class TreeNode:
    id: int
    parent: int | None
    time: int
    cond_prob: float
    path_prob: float
    state: EconomicState
    children: tuple[int, ...] = field(default=())


@dataclass(frozen=True)
class ScenarioTree:
    """Immutable rooted tree of economic states.

    ``branching[t]`` is the number of children of every time-t node; the
    horizon is ``len(branching)`` and leaves sit at that time.
    """

    branching: tuple[int, ...]
    seed: int
    initials: TreeInitials
    nodes: tuple[TreeNode, ...]

    @property
    def horizon(self) -> int:
        return len(self.branching)

    @property
    def n_assets(self) -> int:
        return len(self.nodes[0].state.gross_returns)

    def node(self, node_id: int) -> TreeNode:
        if not 0 <= node_id < len(self.nodes):
            raise KeyError(f"unknown node id {node_id}")
        return self.nodes[node_id]

    def children(self, node_id: int) -> tuple[int, ...]:
        """Ordered child ids; empty exactly at the horizon."""
        return self.node(node_id).children

    def is_leaf(self, node_id: int) -> bool:
        return self.node(node_id).time == self.horizon

    def nodes_at(self, time: int) -> list[TreeNode]:
        return [n for n in self.nodes if n.time == time]

    def non_leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.time < self.horizon]

    def leaves(self) -> list[TreeNode]:
        return self.nodes_at(self.horizon)

    def root_path(self, node_id: int) -> list[int]:
        """Node ids from the root to ``node_id`` inclusive."""
        path = []
        cur: int | None = self.node(node_id).id
        while cur is not None:
            path.append(cur)
            cur = self.nodes[cur].parent
        path.reverse()
        return path

    def conditional_expectation(
        self, node_id: int, f: Callable[[TreeNode], float]
    ) -> float:
        """Probability-weighted average of ``f`` over the node's children."""
        node = self.node(node_id)
        if not node.children:
            raise ValueError(f"node {node_id} is a leaf; it has no children")
        return sum(self.nodes[c].cond_prob * f(self.nodes[c]) for c in node.children)


def _arc_draws(seed: int, path: tuple[int, ...], dim: int) -> np.ndarray:
    # Path-keyed stream: content is independent of traversal order.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=path)
    return np.random.Generator(np.random.PCG64(ss)).standard_normal(dim)


def build_tree(
    process: VarProcess,
    branching: Sequence[int],
    initials: TreeInitials,
    seed: int,
    initial_log_state: Sequence[float] | None = None,
) -> ScenarioTree:
    """Sample a scenario tree from the process.

    ``branching`` lists children per stage, e.g. ``[10, 6, 6, 4, 4]``.
    Conditional probabilities are uniform per stage, so every scenario has
    probability ``1 / prod(branching)``.  The lagged state conditioning the
    first-period draws defaults to the stationary mean of the process and
    can be overridden via ``initial_log_state``.
    """
    branching = tuple(int(b) for b in branching)
    if len(branching) == 0:
        raise ValueError("branching structure must have at least one stage")
    if any(b < 1 for b in branching):
        raise ValueError("branching counts must all be at least 1")
    initials.validate()

    d = process.dim - 1
    if initial_log_state is None:
        h0 = stationary_mean(process)
    else:
        h0 = np.asarray(initial_log_state, dtype=float)
        if h0.shape != (process.dim,):
            raise ValueError(f"initial_log_state must have length {process.dim}")

    kappa = initials.indexation
    root_state = EconomicState(
        wage_growth=0.0,
        gross_returns=(1.0,) * d,
        liability=initials.liability,
        wages=initials.wages,
        benefits=initials.benefits,
    )
    # records: (parent, time, cond_prob, path_prob, state); children filled after.
    records: list[tuple[int | None, int, float, float, EconomicState]] = [
        (None, 0, 1.0, 1.0, root_state)
    ]
    children: list[list[int]] = [[]]

    def grow(parent_id: int, h_parent: np.ndarray, path: tuple[int, ...]) -> None:
        _, t_parent, _, pp_parent, state_parent = records[parent_id]
        if t_parent >= len(branching):
            return
        n_children = branching[t_parent]
        cond_prob = 1.0 / n_children
        for j in range(n_children):
            child_path = path + (j,)
            h_child = step(process, h_parent, _arc_draws(seed, child_path, process.dim))
            w = math.exp(h_child[0]) - 1.0
            state = EconomicState(
                wage_growth=w,
                gross_returns=tuple(math.exp(v) for v in h_child[1:]),
                liability=state_parent.liability * (1.0 + w),
                wages=state_parent.wages * (1.0 + w),
                benefits=state_parent.benefits * (1.0 + kappa * w),
            )
            child_id = len(records)
            records.append((parent_id, t_parent + 1, cond_prob, pp_parent * cond_prob, state))
            children.append([])
            children[parent_id].append(child_id)
            grow(child_id, h_child, child_path)

    grow(0, h0, ())
    nodes = tuple(
        TreeNode(
            id=i,
            parent=rec[0],
            time=rec[1],
            cond_prob=rec[2],
            path_prob=rec[3],
            state=rec[4],
            children=tuple(children[i]),
        )
        for i, rec in enumerate(records)
    )
    return ScenarioTree(branching=branching, seed=seed, initials=initials, nodes=nodes)


def save_tree(tree: ScenarioTree, stream: TextIO) -> None:
    """Write the line-oriented text form.

    One node per line after the header; floats use ``repr`` so the decimal
    text round-trips to the exact same binary values.
    """
    stream.write(f"{_FORMAT_TAG}\n")
    stream.write("branching " + ",".join(str(b) for b in tree.branching) + "\n")
    stream.write(f"seed {tree.seed}\n")
    stream.write(f"kappa {tree.initials.indexation!r}\n")
    stream.write(f"assets {tree.n_assets}\n")
    stream.write(
        "columns id parent time cond_prob wage_growth returns... liability wages benefits\n"
    )
    for n in tree.nodes:
        parent = -1 if n.parent is None else n.parent
        fields = [str(n.id), str(parent), str(n.time), repr(n.cond_prob), repr(n.state.wage_growth)]
        fields.extend(repr(r) for r in n.state.gross_returns)
        fields.extend(
            (repr(n.state.liability), repr(n.state.wages), repr(n.state.benefits))
        )
        stream.write(" ".join(fields) + "\n")


def load_tree(stream: TextIO) -> ScenarioTree:
    """Inverse of :func:`save_tree`."""
    header = stream.readline().strip()
    if header != _FORMAT_TAG:
        raise ValueError(f"unrecognised tree file header: {header!r}")
    branching = tuple(int(v) for v in stream.readline().split()[1].split(","))
    seed = int(stream.readline().split()[1])
    kappa = float(stream.readline().split()[1])
    d = int(stream.readline().split()[1])
    stream.readline()  # column description

    raw: list[tuple] = []
    for line in stream:
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        node_id, parent, time = int(parts[0]), int(parts[1]), int(parts[2])
        cond_prob = float(parts[3])
        wage_growth = float(parts[4])
        returns = tuple(float(v) for v in parts[5 : 5 + d])
        liability, wages, benefits = (float(v) for v in parts[5 + d : 8 + d])
        raw.append(
            (node_id, parent, time, cond_prob, wage_growth, returns, liability, wages, benefits)
        )

    raw.sort(key=lambda r: r[0])
    children: dict[int, list[int]] = {r[0]: [] for r in raw}
    for r in raw:
        if r[1] >= 0:
            children[r[1]].append(r[0])

    nodes = []
    path_prob: dict[int, float] = {}
    for node_id, parent, time, cond_prob, w, returns, liab, wages, ben in raw:
        pp = cond_prob if parent < 0 else path_prob[parent] * cond_prob
        path_prob[node_id] = pp
        nodes.append(
            TreeNode(
                id=node_id,
                parent=None if parent < 0 else parent,
                time=time,
                cond_prob=cond_prob,
                path_prob=pp,
                state=EconomicState(
                    wage_growth=w,
                    gross_returns=returns,
                    liability=liab,
                    wages=wages,
                    benefits=ben,
                ),
                children=tuple(children[node_id]),
            )
        )
    root = nodes[0]
    initials = TreeInitials(
        liability=root.state.liability,
        wages=root.state.wages,
        benefits=root.state.benefits,
        indexation=kappa,
    )
    return ScenarioTree(branching=branching, seed=seed, initials=initials, nodes=tuple(nodes))
