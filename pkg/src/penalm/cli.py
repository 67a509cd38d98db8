"""Command-line driver.

Verbs:
  tree    generate a scenario tree and export its text form
  build   write the LP as fixed-format MPS plus a human-readable audit dump
  solve   solve a single instance and write a solution file
  sweep   run the configured parameter sweep, emit CSV + SVG charts
  check   re-verify a solution file: LP residuals and the shortfall oracle

Every verb takes ``--config``; missing keys fall back to the built-in
calibration.  The exit code is 0 only if every requested solve reached
optimality (and, for check, every verification passed).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import experiment, icc, mps
from .alm_core import expected_row_counts
from .assemble import build_alm_lp
from .config import ExperimentConfig, default_config, load_config
from .icc import IccConfig
from .lp_engine import EQ, LE, OPTIMAL, dump_problem
from .scenario_tree import build_tree, save_tree

log = logging.getLogger("penalm")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        config = _replace(config, seed=args.seed)
    if getattr(args, "mode", None):
        config = _replace(config, modes=(args.mode,))
    if getattr(args, "jobs", None):
        config = _replace(config, jobs=args.jobs)
    return config


def _replace(config: ExperimentConfig, **kw) -> ExperimentConfig:
    from dataclasses import replace

    return replace(config, **kw)


def _tree_of(config: ExperimentConfig):
    return build_tree(
        config.process, config.branching, config.initials, config.seed, config.initial_log_state
    )


def cmd_tree(args) -> int:
    config = _load(args)
    tree = _tree_of(config)
    out = args.out or "tree.txt"
    with open(out, "w", encoding="utf-8") as fh:
        save_tree(tree, fh)
    log.info(
        "wrote %s: %d nodes, %d scenarios", out, len(tree.nodes), len(tree.leaves())
    )
    return 0


def cmd_build(args) -> int:
    config = _load(args)
    tree = _tree_of(config)
    out_dir = args.out or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    status = 0
    for mode in config.modes:
        cfg = IccConfig(mode, config.alpha, config.instance.params.shortfall_threshold)
        problem, _ = build_alm_lp(tree, config.instance, cfg)
        mps_path = os.path.join(out_dir, f"model_{mode}.mps")
        with open(mps_path, "w", encoding="utf-8") as fh:
            fh.write(mps.export_mps(problem))
        audit_path = os.path.join(out_dir, f"model_{mode}.audit.txt")
        with open(audit_path, "w", encoding="utf-8") as fh:
            dump_problem(problem, fh)
        counts = expected_row_counts(tree, config.instance, mode != "none")
        log.info(
            "wrote %s and %s (%d rows = %s, %d cols)",
            mps_path,
            audit_path,
            problem.n_rows,
            " + ".join(f"{v} {k}" for k, v in counts.items()),
            problem.n_cols,
        )
    return status


def cmd_solve(args) -> int:
    config = _load(args)
    tree = _tree_of(config)
    mode = config.modes[0]
    result, sol = experiment.run_single(tree, config.instance, mode, config.alpha)
    log.info(
        "%s: %s objective=%s iterations=%d",
        mode,
        result.status,
        format(result.objective, ".10g"),
        result.iterations,
    )
    if sol is None:
        return 1
    log.info(
        "cr0=%.6f z0=%.4f allocation=%s",
        sol.cr0,
        sol.z0,
        "/".join(format(v, ".4f") for v in sol.allocation0),
    )
    out = args.out or f"solution_{mode}.txt"
    with open(out, "w", encoding="utf-8") as fh:
        experiment.save_solution(sol, config.alpha, fh, config.seed, config.branching)
    log.info("wrote %s", out)
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    points = experiment.run_sweep(config)
    out_dir = args.out or config.output_dir
    written = experiment.emit_outputs(points, config, out_dir)
    for path in written:
        log.info("wrote %s", path)
    return 0 if all(p.status == OPTIMAL for p in points) else 1


def cmd_check(args) -> int:
    config = _load(args)
    with open(args.solution, "r", encoding="utf-8") as fh:
        meta, decisions = experiment.load_solution(fh)
    mode = meta.get("mode", config.modes[0])
    alpha = float(meta.get("alpha", config.alpha))
    seed = int(meta.get("seed", config.seed))
    branching = tuple(int(v) for v in meta.get("branching", "").split(",")) or config.branching
    tree = build_tree(config.process, branching, config.initials, seed, config.initial_log_state)
    cfg = IccConfig(mode, alpha, config.instance.params.shortfall_threshold)
    problem, reg = build_alm_lp(tree, config.instance, cfg)

    x = np.zeros(len(reg))
    missing = 0
    for key, col in reg.items():
        if key in decisions:
            x[col] = decisions[key]
        else:
            missing += 1
    act = problem.row_activity(x)
    worst = 0.0
    bad_rows = []
    for i, sense in enumerate(problem.senses):
        slack = problem.rhs[i] - act[i]
        viol = abs(slack) if sense == EQ else max(0.0, -slack if sense == LE else slack)
        rel = viol / (1.0 + abs(problem.rhs[i]))
        worst = max(worst, rel)
        if rel > 1e-7:
            bad_rows.append(problem.row_names[i])
    bound_viol = float(
        np.maximum(
            np.maximum(problem.lower - x, x - problem.upper), 0.0
        ).max()
    )
    log.info(
        "residuals: max row %.3e, max bound %.3e, %d rows flagged, %d columns missing",
        worst,
        bound_viol,
        len(bad_rows),
        missing,
    )
    for name in bad_rows[:20]:
        log.info("  violated: %s", name)

    ok = worst <= 1e-7 and bound_viol <= 1e-7 and missing == 0
    if mode != "none":
        report = icc.shortfall_report(tree, config.instance, cfg, decisions)
        worst_excess = max((sf - b for _, _, b, sf, _ in report), default=0.0)
        log.info("shortfall oracle: worst excess over budget %.3e", worst_excess)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                icc.write_shortfall_csv(report, fh)
            log.info("wrote %s", args.out)
        ok = ok and worst_excess <= 1e-6
    log.info("check %s", "passed" if ok else "FAILED")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="penalm", description=__doc__.split("\n")[0])
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, mode=True, jobs=False):
        p.add_argument("--config", help="configuration file (key = value sections)")
        p.add_argument("--seed", type=int, help="override the tree seed")
        p.add_argument("--out", help="output file or directory")
        if mode:
            p.add_argument("--mode", choices=["oicc", "micc", "none"], help="risk mode override")
        if jobs:
            p.add_argument("--jobs", type=int, help="concurrent solves")

    common(sub.add_parser("tree", help="generate and export a scenario tree"), mode=False)
    common(sub.add_parser("build", help="write MPS and audit dump"))
    common(sub.add_parser("solve", help="solve one instance"))
    common(sub.add_parser("sweep", help="run the configured sweep"), jobs=True)
    check_p = sub.add_parser("check", help="re-verify a solution file")
    common(check_p)
    check_p.add_argument("solution", help="solution file from the solve verb")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(message)s",
        stream=sys.stderr,
    )
    handlers = {
        "tree": cmd_tree,
        "build": cmd_build,
        "solve": cmd_solve,
        "sweep": cmd_sweep,
        "check": cmd_check,
    }
    return handlers[args.verb](args)


if __name__ == "__main__":
    sys.exit(main())
