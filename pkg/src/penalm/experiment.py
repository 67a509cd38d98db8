"""Sweep orchestration and result emission.

A sweep solves the ALM model across a grid of the risk parameter alpha or
the initial funding ratio F0, for each configured risk mode, on one shared
scenario tree (alpha sweeps reuse the identical tree object; F0 sweeps
rebuild with the same seed so the sampled growth factors are identical and
only the liability level changes).  Results land in a fixed-schema CSV and
a set of SVG charts; with a fixed seed the CSV is byte-identical across
runs, so wall-clock timings are logged but never written into it.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import TextIO

from . import svgplot
from .alm_core import AlmInstance
from .assemble import Solution, build_alm_lp, extract_solution
from .config import ExperimentConfig
from .icc import IccConfig
from .lp_engine import OPTIMAL, LpResult, SolveOptions, solve
from .scenario_tree import ScenarioTree, build_tree

__all__ = [
    "SweepPoint",
    "emit_outputs",
    "load_solution",
    "run_single",
    "run_sweep",
    "save_solution",
    "write_csv",
]

log = logging.getLogger(__name__)

_NAN = float("nan")


@dataclass(frozen=True)
class SweepPoint:
    """One solved grid point; numeric fields are NaN when not optimal."""

    mode: str
    variable: str
    value: float
    status: str
    iterations: int
    objective: float
    regular_cost: float
    remedial_raw: float
    remedial_share: float
    variation_cost: float
    cr0: float
    z0: float
    allocation: tuple[float, ...]  # asset fractions of total, cash last
    wall_time: float  # seconds; excluded from the CSV for reproducibility


def _point_from_solution(
    mode: str, variable: str, value: float, result: LpResult, sol: Solution, wall: float
) -> SweepPoint:
    return SweepPoint(
        mode=mode,
        variable=variable,
        value=value,
        status=result.status,
        iterations=result.iterations,
        objective=result.objective,
        regular_cost=sol.regular_cost,
        remedial_raw=sol.remedial_raw,
        remedial_share=sol.remedial_share,
        variation_cost=sol.variation_penalty_cost,
        cr0=sol.cr0,
        z0=sol.z0,
        allocation=sol.allocation0,
        wall_time=wall,
    )


def _failed_point(
    mode: str, variable: str, value: float, result: LpResult, d: int, wall: float
) -> SweepPoint:
    return SweepPoint(
        mode=mode,
        variable=variable,
        value=value,
        status=result.status,
        iterations=result.iterations,
        objective=_NAN,
        regular_cost=_NAN,
        remedial_raw=_NAN,
        remedial_share=_NAN,
        variation_cost=_NAN,
        cr0=_NAN,
        z0=_NAN,
        allocation=(_NAN,) * (d + 1),
        wall_time=wall,
    )


def run_single(
    tree: ScenarioTree,
    instance: AlmInstance,
    mode: str,
    alpha: float,
    opts: SolveOptions | None = None,
) -> tuple[LpResult, Solution | None]:
    """Build and solve one instance; Solution is None unless optimal."""
    cfg = IccConfig(mode=mode, alpha=alpha, gamma=instance.params.shortfall_threshold)
    problem, reg = build_alm_lp(tree, instance, cfg)
    result = solve(problem, opts)
    if result.status != OPTIMAL:
        return result, None
    return result, extract_solution(tree, instance, cfg, reg, result)


def _solve_task(args) -> SweepPoint:
    config, tree, variable, value, mode = args
    instance = config.instance
    if variable == "F0":
        # liability level changes with the target funding ratio; the same
        # seed keeps the sampled growth factors identical across the grid
        initials = replace(config.initials, liability=config.liability_for(value))
        tree = build_tree(
            config.process, config.branching, initials, config.seed, config.initial_log_state
        )
        alpha = config.alpha
    else:
        alpha = value
    t0 = time.perf_counter()
    result, sol = run_single(tree, instance, mode, alpha)
    wall = time.perf_counter() - t0
    if sol is None:
        return _failed_point(mode, variable, value, result, instance.d, wall)
    return _point_from_solution(mode, variable, value, result, sol, wall)


def run_sweep(config: ExperimentConfig) -> list[SweepPoint]:
    """Solve the whole grid; infeasible points are recorded, not fatal.

    For risk-parameter sweeps one tree is built once and shared by every
    grid point.  Grid points are independent and may solve concurrently
    (``jobs``); results are always returned in grid-major, mode-minor
    order.
    """
    config.validate()
    grid = config.grid()
    shared_tree = build_tree(
        config.process, config.branching, config.initials, config.seed, config.initial_log_state
    )
    tasks = [
        (config, shared_tree, config.sweep_variable, value, mode)
        for value in grid
        for mode in config.modes
    ]
    log.info(
        "sweep: %d grid points x %d modes on branching %s (seed %d)",
        len(grid),
        len(config.modes),
        "x".join(str(b) for b in config.branching),
        config.seed,
    )
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            points = list(pool.map(_solve_task, tasks))
    else:
        points = [_solve_task(t) for t in tasks]
    for pt in points:
        log.info(
            "  %s %s=%s: %s obj=%s iters=%d (%.1fs)",
            pt.mode,
            pt.variable,
            pt.value,
            pt.status,
            format(pt.objective, ".6g"),
            pt.iterations,
            pt.wall_time,
        )
    return points


# -- emission -------------------------------------------------------------------


def csv_header(asset_names: tuple[str, ...]) -> list[str]:
    return [
        "mode",
        "variable",
        "value",
        "status",
        "iterations",
        "objective",
        "regular_cost",
        "remedial_cost",
        "remedial_share",
        "variation_cost",
        "cr0",
        "z0",
        *[f"frac_{name}" for name in asset_names],
        "frac_cash",
    ]


def write_csv(points: list[SweepPoint], asset_names: tuple[str, ...], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(csv_header(asset_names))
    for p in points:
        writer.writerow(
            [
                p.mode,
                p.variable,
                repr(p.value),
                p.status,
                p.iterations,
                repr(p.objective),
                repr(p.regular_cost),
                repr(p.remedial_raw),
                repr(p.remedial_share),
                repr(p.variation_cost),
                repr(p.cr0),
                repr(p.z0),
                *[repr(v) for v in p.allocation],
            ]
        )


def read_csv(stream: TextIO) -> list[dict[str, str]]:
    return list(csv.DictReader(stream))


def emit_outputs(points: list[SweepPoint], config: ExperimentConfig, out_dir: str) -> list[str]:
    """Write results.csv plus the SVG chart set; returns the paths written.

    Charts: ``cr0.svg`` (initial contribution rate per mode),
    ``total_cost.svg`` (objective per mode), and per mode
    ``cost_split_<mode>.svg`` (regular vs remedial share of the money cost)
    and ``allocation_<mode>.svg`` (initial allocation fractions, cash on
    top).  Grid points that did not solve to optimality are skipped in the
    charts but kept in the CSV.
    """
    os.makedirs(out_dir, exist_ok=True)
    names = tuple(a.name for a in config.instance.assets)
    written = []

    path = os.path.join(out_dir, "results.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_csv(points, names, fh)
    written.append(path)

    variable = points[0].variable if points else config.sweep_variable
    modes = list(dict.fromkeys(p.mode for p in points))
    by_mode = {
        m: [p for p in points if p.mode == m and p.status == OPTIMAL] for m in modes
    }

    def emit(name: str, text: str) -> None:
        p = os.path.join(out_dir, name)
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(p)

    xs_by_mode = {m: [p.value for p in pts] for m, pts in by_mode.items() if pts}
    if xs_by_mode:
        xs = max(xs_by_mode.values(), key=len)
        cr0 = {m: _aligned(by_mode[m], xs, "cr0") for m in modes if by_mode[m]}
        emit(
            "cr0.svg",
            svgplot.line_chart(
                "Initial contribution rate", variable, "cr0", xs, cr0
            ),
        )
        cost = {m: _aligned(by_mode[m], xs, "objective") for m in modes if by_mode[m]}
        emit(
            "total_cost.svg",
            svgplot.line_chart("Total discounted cost", variable, "cost", xs, cost),
        )
        for m in modes:
            pts = by_mode[m]
            if not pts:
                continue
            mxs = [p.value for p in pts]
            emit(
                f"cost_split_{m}.svg",
                svgplot.stacked_area_chart(
                    f"Cost split ({m})",
                    variable,
                    "share of money cost",
                    mxs,
                    {
                        "regular": [1.0 - p.remedial_share for p in pts],
                        "remedial": [p.remedial_share for p in pts],
                    },
                ),
            )
            alloc = {
                name: [p.allocation[k] for p in pts] for k, name in enumerate(names)
            }
            alloc["cash"] = [p.allocation[-1] for p in pts]
            emit(
                f"allocation_{m}.svg",
                svgplot.stacked_area_chart(
                    f"Initial allocation ({m})", variable, "fraction of total asset", mxs, alloc
                ),
            )
    return written


def _aligned(points: list[SweepPoint], xs: list[float], field: str) -> list[float]:
    by_x = {p.value: getattr(p, field) for p in points}
    return [by_x.get(x, _NAN) for x in xs]


# -- solution files --------------------------------------------------------------

_SOLUTION_TAG = "penalm-solution v1"


def save_solution(
    sol: Solution, alpha: float, stream: TextIO, seed: int, branching: tuple[int, ...]
) -> None:
    """Plain-text solution file: metadata then one line per decision column."""
    stream.write(f"{_SOLUTION_TAG}\n")
    stream.write(f"mode {sol.mode}\n")
    stream.write(f"alpha {alpha!r}\n")
    stream.write(f"seed {seed}\n")
    stream.write("branching " + ",".join(str(b) for b in branching) + "\n")
    stream.write(f"objective {sol.objective!r}\n")
    stream.write("columns role node asset value\n")
    for (role, node, k), value in sol.decisions.items():
        stream.write(f"{role} {node} {-1 if k is None else k} {value!r}\n")


def load_solution(stream: TextIO):
    """Returns (meta dict, decision map) from :func:`save_solution` text."""
    header = stream.readline().strip()
    if header != _SOLUTION_TAG:
        raise ValueError(f"unrecognised solution file header: {header!r}")
    meta: dict[str, str] = {}
    for line in stream:
        line = line.strip()
        if line.startswith("columns "):
            break
        key, _, value = line.partition(" ")
        meta[key] = value
    decisions: dict[tuple[str, int, int | None], float] = {}
    for line in stream:
        parts = line.split()
        if len(parts) != 4:
            continue
        role, node, k, value = parts
        decisions[(role, int(node), None if k == "-1" else int(k))] = float(value)
    return meta, decisions
