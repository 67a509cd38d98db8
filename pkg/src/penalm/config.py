"""Experiment configuration: flat key = value text files with sections.

The format is INI-style (parsed with :mod:`configparser`, no interpolation,
case-preserving keys).  Every key has a compiled-in default, so an empty
file is a valid configuration.  Sections:

``[fund]``
    horizon, risk_free_rate, remedial_penalty, rate_change_penalty,
    contribution_rate_min/max, rate_change_min/max, initial_cash,
    cash_min_frac/cash_max_frac, shortfall_threshold,
    terminal_funding_target, alpha, initial_liability OR funding_ratio,
    initial_wages, initial_benefits, benefit_indexation.

``[assets]``
    one key per asset class:
    ``name = min_frac max_frac buy_cost sell_cost initial_holding``.

``[var]``
    optional overrides: intercept, sd (one row of floats),
    autoregression, correlation (rows separated by ';'),
    initial_log_state (conditioning state for the first period's draws;
    default is the stationary mean).

``[tree]``
    branching (space- or comma-separated counts), seed.

``[sweep]``
    variable (alpha | F0), start, stop, step, modes (subset of
    none oicc micc), jobs.

``[output]``
    directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from dataclasses import replace as dataclasses_replace

from .alm_core import AlmInstance, AssetClass, FundParameters, default_instance
from .icc import MODES
from .scenario_tree import TreeInitials
from .var_model import VarProcess, build_default_process, make_process

__all__ = ["ExperimentConfig", "load_config", "parse_config"]

SWEEP_VARIABLES = ("alpha", "F0")


@dataclass(frozen=True)
class ExperimentConfig:
    instance: AlmInstance
    process: VarProcess
    initials: TreeInitials
    initial_log_state: tuple[float, ...] | None
    branching: tuple[int, ...]
    seed: int
    alpha: float
    sweep_variable: str
    sweep_start: float
    sweep_stop: float
    sweep_step: float
    modes: tuple[str, ...]
    jobs: int
    output_dir: str

    def grid(self) -> list[float]:
        """Inclusive monotone grid from start to stop by step."""
        if self.sweep_step <= 0:
            raise ValueError("sweep step must be positive")
        if self.sweep_stop < self.sweep_start:
            raise ValueError("sweep stop must not precede start")
        values = []
        k = 0
        while True:
            v = self.sweep_start + k * self.sweep_step
            if v > self.sweep_stop + 1e-12:
                break
            values.append(round(v, 12))
            k += 1
        return values

    def liability_for(self, funding_ratio: float) -> float:
        """Initial liability implied by a funding ratio at fixed total asset."""
        if funding_ratio <= 0:
            raise ValueError("funding ratio must be positive")
        return self.instance.total_initial_asset / funding_ratio

    def validate(self) -> None:
        self.instance.validate()
        self.initials.validate()
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}")
        if not self.modes:
            raise ValueError("at least one mode is required")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if not self.grid():
            raise ValueError("sweep grid is empty")


def default_config() -> ExperimentConfig:
    return ExperimentConfig(
        instance=default_instance(),
        process=build_default_process(),
        initials=TreeInitials(
            liability=120000.0, wages=20000.0, benefits=6000.0, indexation=0.5
        ),
        initial_log_state=None,
        branching=(4, 3, 3, 2, 2),
        seed=20240,
        alpha=0.035,
        sweep_variable="alpha",
        sweep_start=0.0,
        sweep_stop=0.085,
        sweep_step=0.0085,
        modes=("oicc", "micc"),
        jobs=1,
        output_dir="out",
    )


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _matrix(text: str) -> list[list[float]]:
    return [_floats(row) for row in text.split(";") if row.strip()]


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text over the compiled-in defaults."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    cp.read_string(text)
    base = default_config()

    fund = cp["fund"] if cp.has_section("fund") else {}
    dp = base.instance.params
    params = FundParameters(
        horizon=int(fund.get("horizon", dp.horizon)),
        risk_free_rate=float(fund.get("risk_free_rate", dp.risk_free_rate)),
        remedial_penalty=float(fund.get("remedial_penalty", dp.remedial_penalty)),
        rate_change_penalty=float(fund.get("rate_change_penalty", dp.rate_change_penalty)),
        cr_lower=float(fund.get("contribution_rate_min", dp.cr_lower)),
        cr_upper=float(fund.get("contribution_rate_max", dp.cr_upper)),
        rate_change_lower=float(fund.get("rate_change_min", dp.rate_change_lower)),
        rate_change_upper=float(fund.get("rate_change_max", dp.rate_change_upper)),
        initial_cash=float(fund.get("initial_cash", dp.initial_cash)),
        cash_lower_frac=float(fund.get("cash_min_frac", dp.cash_lower_frac)),
        cash_upper_frac=float(fund.get("cash_max_frac", dp.cash_upper_frac)),
        shortfall_threshold=float(fund.get("shortfall_threshold", dp.shortfall_threshold)),
        terminal_funding_target=float(
            fund.get("terminal_funding_target", dp.terminal_funding_target)
        ),
        shortfall_budget_frac=float(fund.get("alpha", dp.shortfall_budget_frac)),
    )

    if cp.has_section("assets"):
        assets = []
        for name, value in cp["assets"].items():
            parts = _floats(value)
            if len(parts) != 5:
                raise ValueError(
                    f"asset {name}: expected 'min_frac max_frac buy_cost sell_cost initial_holding'"
                )
            assets.append(AssetClass(name, parts[0], parts[1], parts[2], parts[3], parts[4]))
        assets = tuple(assets)
    else:
        assets = base.instance.assets
    instance = AlmInstance(params=params, assets=assets)

    if "initial_liability" in fund and "funding_ratio" in fund:
        raise ValueError("give either initial_liability or funding_ratio, not both")
    if "funding_ratio" in fund:
        liability = instance.total_initial_asset / float(fund["funding_ratio"])
    else:
        liability = float(fund.get("initial_liability", base.initials.liability))
    initials = TreeInitials(
        liability=liability,
        wages=float(fund.get("initial_wages", base.initials.wages)),
        benefits=float(fund.get("initial_benefits", base.initials.benefits)),
        indexation=float(fund.get("benefit_indexation", base.initials.indexation)),
    )

    process = base.process
    initial_log_state = None
    if cp.has_section("var"):
        var = cp["var"]
        intercept = (
            _floats(var["intercept"]) if "intercept" in var else list(process.intercept)
        )
        sd = _floats(var["sd"]) if "sd" in var else list(process.residual_sd)
        lag = (
            _matrix(var["autoregression"])
            if "autoregression" in var
            else process.lag_matrix.tolist()
        )
        corr = (
            _matrix(var["correlation"])
            if "correlation" in var
            else process.residual_corr.tolist()
        )
        names = process.series if len(intercept) == process.dim else None
        process = make_process(intercept, lag, sd, corr, series=names)
        if "initial_log_state" in var:
            initial_log_state = tuple(_floats(var["initial_log_state"]))
    if process.dim != len(assets) + 1:
        raise ValueError(
            f"process has {process.dim} series but {len(assets)} asset classes plus wages "
            f"require {len(assets) + 1}"
        )

    tree = cp["tree"] if cp.has_section("tree") else {}
    branching = (
        tuple(int(v) for v in tree["branching"].replace(",", " ").split())
        if "branching" in tree
        else base.branching
    )
    seed = int(tree.get("seed", base.seed))

    # the horizon is the number of stages; an explicit value must agree
    if "horizon" in fund and int(fund["horizon"]) != len(branching):
        raise ValueError(
            f"horizon {fund['horizon']} does not match branching of length {len(branching)}"
        )
    if params.horizon != len(branching):
        params = dataclasses_replace(params, horizon=len(branching))
        instance = AlmInstance(params=params, assets=assets)

    sweep = cp["sweep"] if cp.has_section("sweep") else {}
    modes = (
        tuple(sweep["modes"].replace(",", " ").split())
        if "modes" in sweep
        else base.modes
    )
    out = cp["output"] if cp.has_section("output") else {}

    config = ExperimentConfig(
        instance=instance,
        process=process,
        initials=initials,
        initial_log_state=initial_log_state,
        branching=branching,
        seed=seed,
        alpha=params.shortfall_budget_frac,
        sweep_variable=str(sweep.get("variable", base.sweep_variable)),
        sweep_start=float(sweep.get("start", base.sweep_start)),
        sweep_stop=float(sweep.get("stop", base.sweep_stop)),
        sweep_step=float(sweep.get("step", base.sweep_step)),
        modes=modes,
        jobs=int(sweep.get("jobs", base.jobs)),
        output_dir=str(out.get("directory", base.output_dir)),
    )
    config.validate()
    return config


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
