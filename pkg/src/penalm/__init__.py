"""Multistage stochastic programming toolkit for defined-benefit pension ALM.

Builds scenario trees from a calibrated VAR(1) process, assembles the ALM
model (asset dynamics, operational constraints, expected-shortfall risk
constraints) as one sparse LP per tree, solves it with an embedded
bounded-variable revised simplex, and sweeps risk and funding parameters
from a small experiment CLI.
"""

from .alm_core import AlmInstance, AssetClass, FundParameters, default_instance
from .assemble import Solution, build_alm_lp, extract_solution
from .icc import IccConfig
from .lp_engine import LpProblem, LpResult, SolveOptions, check_solution, solve
from .scenario_tree import ScenarioTree, TreeInitials, build_tree, load_tree, save_tree
from .var_model import VarProcess, build_default_process

__version__ = "0.1.0"

__all__ = [
    "AlmInstance",
    "AssetClass",
    "FundParameters",
    "IccConfig",
    "LpProblem",
    "LpResult",
    "ScenarioTree",
    "Solution",
    "SolveOptions",
    "TreeInitials",
    "VarProcess",
    "build_alm_lp",
    "build_default_process",
    "build_tree",
    "check_solution",
    "default_instance",
    "extract_solution",
    "load_tree",
    "save_tree",
    "solve",
    "__version__",
]
