"""Sparse linear programs and a bounded-variable revised simplex solver.

The problem form is

    minimize    c @ x
    subject to  a_i @ x  (<=, >=, =)  b_i      for every row i
                lo <= x <= up                  (entries may be infinite)

The solver works on the computational form ``[A | I] (x, s) = b`` with one
logical (slack) column per row, bounded according to the row sense.  Phase 1
introduces signed artificial columns for rows whose logical cannot hold the
initial residual and minimises the sum of artificial values.

The basis inverse is kept as a sparse LU factorisation (SuperLU) plus a
product-form eta file, refactorised every ``refactor_every`` pivots.  Pricing
is Dantzig (most violating reduced cost); after a configurable streak of
degenerate steps Bland's smallest-index rule takes over until a nondegenerate
step occurs, which bounds the iteration count.  All tie-breaking is by lowest
index, so a solve is bit-deterministic for identical inputs and options.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "LinearRow",
    "LpProblem",
    "LpResult",
    "SingularBasisError",
    "SolutionReport",
    "SolveOptions",
    "check_solution",
    "dump_problem",
    "solve",
]

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

# variable states
_AT_LO, _AT_UP, _BASIC, _FREE, _FIXED = 0, 1, 2, 3, 4


class SingularBasisError(RuntimeError):
    """Basis remained numerically singular after refactorisation."""


@dataclass
class LinearRow:
    """One constraint row: ``sum(coeffs[j] * x[j]) sense rhs``."""

    name: str
    sense: str
    rhs: float
    coeffs: dict[int, float]


class LpProblem:
    """Immutable sparse LP in triplet form with named rows and columns."""

    def __init__(
        self,
        lower: Sequence[float],
        upper: Sequence[float],
        objective: Sequence[float],
        rows: Iterable[LinearRow],
        col_names: Sequence[str] | None = None,
        name: str = "LP",
    ):
        self.name = name
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.objective = np.asarray(objective, dtype=float)
        self.n_cols = self.lower.shape[0]
        if self.upper.shape != (self.n_cols,) or self.objective.shape != (self.n_cols,):
            raise ValueError("lower/upper/objective length mismatch")
        if col_names is None:
            col_names = [f"X{j}" for j in range(self.n_cols)]
        if len(col_names) != self.n_cols:
            raise ValueError("col_names length mismatch")
        self.col_names = list(col_names)

        row_names, senses, rhs = [], [], []
        tr, tc, tv = [], [], []
        for i, row in enumerate(rows):
            if row.sense not in _SENSES:
                raise ValueError(f"row {row.name}: unknown sense {row.sense!r}")
            if not np.isfinite(row.rhs):
                raise ValueError(f"row {row.name}: rhs is not finite")
            row_names.append(row.name)
            senses.append(row.sense)
            rhs.append(float(row.rhs))
            for j, v in row.coeffs.items():
                if not 0 <= j < self.n_cols:
                    raise ValueError(f"row {row.name}: column index {j} out of range")
                if not np.isfinite(v):
                    raise ValueError(f"row {row.name}: coefficient for column {j} not finite")
                if v == 0.0:
                    continue  # coefficients are per-column dict entries: no duplicates
                tr.append(i)
                tc.append(j)
                tv.append(float(v))
        self.row_names = row_names
        self.senses = senses
        self.rhs = np.asarray(rhs, dtype=float)
        self.n_rows = len(row_names)
        self._rows_idx = np.asarray(tr, dtype=np.int32)
        self._cols_idx = np.asarray(tc, dtype=np.int32)
        self._vals = np.asarray(tv, dtype=float)

        if np.any(~np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise ValueError(
                f"column {self.col_names[bad]}: lower bound exceeds upper bound"
            )

    def matrix(self) -> sp.csr_matrix:
        """Constraint coefficients as CSR (rows x cols)."""
        return sp.csr_matrix(
            (self._vals, (self._rows_idx, self._cols_idx)),
            shape=(self.n_rows, self.n_cols),
        )

    def nnz(self) -> int:
        return self._vals.shape[0]

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-9  # dual feasibility / pricing tolerance
    feas_tol: float = 1e-7  # phase-1 residual acceptance, scaled by (1 + max|b|)
    pivot_tol: float = 1e-10  # smallest usable ratio-test denominator
    max_iters: int | None = None  # default 50 * (rows + cols)
    refactor_every: int = 50
    bland_after: int = 40  # degenerate steps before Bland's rule engages
    seed: int = 0  # reserved for perturbation-based anti-degeneracy; unused


@dataclass
class LpResult:
    status: str
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    iterations: int
    phase1_infeasibility: float = 0.0


def solve(problem: LpProblem, opts: SolveOptions | None = None) -> LpResult:
    """Solve the LP; see the module docstring for the algorithm."""
    opts = opts or SolveOptions()
    return _Simplex(problem, opts).run()


class _Simplex:
    def __init__(self, problem: LpProblem, opts: SolveOptions):
        self.p = problem
        self.opts = opts
        n, m = problem.n_cols, problem.n_rows
        self.n, self.m = n, m
        self.iterations = 0
        self.max_iters = opts.max_iters or 50 * (m + n)

        # logical bounds by sense
        s_lo = np.empty(m)
        s_up = np.empty(m)
        for i, sense in enumerate(problem.senses):
            if sense == LE:
                s_lo[i], s_up[i] = 0.0, np.inf
            elif sense == GE:
                s_lo[i], s_up[i] = -np.inf, 0.0
            else:
                s_lo[i], s_up[i] = 0.0, 0.0

        self.lo = np.concatenate([problem.lower, s_lo, np.zeros(m)])
        self.up = np.concatenate([problem.upper, s_up, np.full(m, np.inf)])
        self.ncols_total = n + 2 * m
        self.art0 = n + m  # first artificial column

        # initial nonbasic values: finite lower bound first, else upper, else 0
        x = np.zeros(self.ncols_total)
        vstat = np.full(self.ncols_total, _AT_LO, dtype=np.int8)
        for j in range(n):
            if problem.lower[j] == problem.upper[j]:
                x[j], vstat[j] = problem.lower[j], _FIXED
            elif np.isfinite(problem.lower[j]):
                x[j], vstat[j] = problem.lower[j], _AT_LO
            elif np.isfinite(problem.upper[j]):
                x[j], vstat[j] = problem.upper[j], _AT_UP
            else:
                x[j], vstat[j] = 0.0, _FREE

        A = problem.matrix().tocsc()
        resid = problem.rhs - A @ x[:n]

        art_sign = np.ones(m)
        basis = np.empty(m, dtype=np.int64)
        any_artificial = False
        for i in range(m):
            if s_lo[i] - 1e-30 <= resid[i] <= s_up[i] + 1e-30:
                # logical can carry the residual: basic, artificial fixed out
                basis[i] = n + i
                x[n + i] = resid[i]
                vstat[n + i] = _BASIC
                vstat[self.art0 + i] = _FIXED
                self.up[self.art0 + i] = 0.0
            else:
                s_val = min(max(resid[i], s_lo[i]), s_up[i])
                x[n + i] = s_val
                vstat[n + i] = _AT_LO if s_val == s_lo[i] else _AT_UP
                if s_lo[i] == s_up[i]:
                    vstat[n + i] = _FIXED
                art_sign[i] = 1.0 if resid[i] - s_val >= 0 else -1.0
                basis[i] = self.art0 + i
                x[self.art0 + i] = abs(resid[i] - s_val)
                vstat[self.art0 + i] = _BASIC
                any_artificial = True

        logicals = sp.identity(m, format="csc")
        artificials = sp.diags(art_sign, format="csc")
        self.W = sp.hstack([A, logicals, artificials], format="csc")
        self.WT = self.W.T.tocsr()
        self.x = x
        self.vstat = vstat
        self.basis = basis
        self.any_artificial = any_artificial

        self.c_phase1 = np.zeros(self.ncols_total)
        self.c_phase1[self.art0 :] = 1.0
        self.c_phase2 = np.concatenate([problem.objective, np.zeros(2 * m)])

        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []
        self.degen_streak = 0
        self.bland = False

    # -- basis linear algebra -------------------------------------------------

    def _refactor(self) -> None:
        B = self.W[:, self.basis]
        try:
            self.lu = splu(B.tocsc())
        except RuntimeError as exc:  # pragma: no cover - defensive
            raise SingularBasisError(f"basis factorisation failed: {exc}") from exc
        self.etas = []

    def _recompute_basics(self, b: np.ndarray) -> None:
        z = self.x.copy()
        z[self.basis] = 0.0
        rhs = b - self.W @ z
        self.x[self.basis] = self.lu.solve(rhs)

    def _ftran(self, col: np.ndarray) -> np.ndarray:
        v = self.lu.solve(col)
        for r, w in self.etas:
            t = v[r] / w[r]
            if t != 0.0:
                v = v - w * t
            v[r] = t
        return v

    def _btran(self, c_b: np.ndarray) -> np.ndarray:
        y = c_b.copy()
        for r, w in reversed(self.etas):
            y[r] = (y[r] + w[r] * y[r] - w @ y) / w[r]
        return self.lu.solve(y, trans="T")

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        start, end = self.W.indptr[j], self.W.indptr[j + 1]
        col[self.W.indices[start:end]] = self.W.data[start:end]
        return col

    # -- main loop ------------------------------------------------------------

    def run(self) -> LpResult:
        if self.m == 0:
            return self._solve_bounds_only()

        b = self.p.rhs
        feas_scale = 1.0 + float(np.max(np.abs(b))) if self.m else 1.0
        self._refactor()

        if self.any_artificial:
            status = self._iterate(self.c_phase1, phase=1)
            if status == ITERATION_LIMIT:
                return self._result(ITERATION_LIMIT)
            infeas = float(self.x[self.art0 :].sum())
            if infeas > self.opts.feas_tol * feas_scale:
                res = self._result(INFEASIBLE)
                res.phase1_infeasibility = infeas
                return res
            # artificials are pinned at zero for phase 2
            self.up[self.art0 :] = 0.0
            nonbasic_art = (self.vstat[self.art0 :] != _BASIC).nonzero()[0]
            self.vstat[self.art0 + nonbasic_art] = _FIXED
            self.x[self.art0 + nonbasic_art] = 0.0

        status = self._iterate(self.c_phase2, phase=2)
        return self._result(status)

    def _iterate(self, c: np.ndarray, phase: int) -> str:
        tol = self.opts.tol
        while True:
            if self.iterations >= self.max_iters:
                return ITERATION_LIMIT
            if phase == 1 and self.x[self.art0 :].sum() <= 1e-12:
                return OPTIMAL

            y = self._btran(c[self.basis])
            d = c - self.WT @ y

            at_lo = self.vstat == _AT_LO
            at_up = self.vstat == _AT_UP
            free = self.vstat == _FREE
            viol = np.where(at_lo, -d, np.where(at_up, d, np.where(free, np.abs(d), -np.inf)))
            eligible = viol > tol
            if not eligible.any():
                return OPTIMAL

            if self.bland:
                q = int(np.argmax(eligible))
            else:
                q = int(np.argmax(viol))
            sigma = 1.0 if (at_lo[q] or (free[q] and d[q] < 0)) else -1.0

            w = self._ftran(self._column(q))
            # the eta file degrades; cross-check the priced reduced cost
            # against the direct one and refactorise on disagreement
            d_direct = c[q] - c[self.basis] @ w
            if abs(d_direct - d[q]) > 1e-7 * (1.0 + abs(d[q])) and self.etas:
                self._refactor()
                self._recompute_basics(self.p.rhs)
                continue

            step, r, hit_up = self._ratio_test(q, sigma, w)
            if r is not None and abs(w[r]) < 1e-7 and self.etas:
                # unacceptably small pivot; retry on a fresh factorisation
                self._refactor()
                self._recompute_basics(self.p.rhs)
                continue
            if step is None:
                if phase == 1:  # bounded below by zero; cannot happen cleanly
                    raise SingularBasisError("phase-1 direction unbounded")
                return UNBOUNDED

            self.iterations += 1
            if step <= 1e-11:
                self.degen_streak += 1
                if self.degen_streak >= self.opts.bland_after:
                    self.bland = True
            else:
                self.degen_streak = 0
                self.bland = False

            if r is None:
                # bound flip: entering moves across its own range
                self.x[self.basis] -= sigma * step * w
                self.x[q] = self.up[q] if sigma > 0 else self.lo[q]
                self.vstat[q] = _AT_UP if sigma > 0 else _AT_LO
                continue

            leaving = self.basis[r]
            self.x[self.basis] -= sigma * step * w
            self.x[q] += sigma * step
            if self.lo[leaving] == self.up[leaving]:
                self.vstat[leaving] = _FIXED
                self.x[leaving] = self.lo[leaving]
            elif hit_up:
                self.vstat[leaving] = _AT_UP
                self.x[leaving] = self.up[leaving]
            else:
                self.vstat[leaving] = _AT_LO
                self.x[leaving] = self.lo[leaving]
            self.vstat[q] = _BASIC
            self.basis[r] = q
            self.etas.append((r, w.copy()))
            if len(self.etas) >= self.opts.refactor_every:
                self._refactor()
                self._recompute_basics(self.p.rhs)

    def _ratio_test(self, q: int, sigma: float, w: np.ndarray):
        """Largest admissible step for entering column q moving by sigma.

        Two-pass Harris test: pass one computes the minimum ratio with a
        small feasibility slack, pass two picks the largest pivot among rows
        whose exact ratio fits under that bound.  This trades a bounded,
        transient bound violation (cleaned up at the next refactorisation)
        for much better numerical stability.  Under Bland's rule the exact
        minimum ratio with the smallest basic variable index is used
        instead.  Returns ``(step, row, hit_up)``; ``row`` is None for a
        bound flip and ``step`` is None when the direction is unbounded.
        """
        move = -sigma * w  # basic variable movement per unit step
        x_b = self.x[self.basis]
        lo_b = self.lo[self.basis]
        up_b = self.up[self.basis]
        piv = self.opts.pivot_tol

        dec = move < -piv
        inc = move > piv
        dist = np.full(self.m, np.inf)
        dist[dec] = x_b[dec] - lo_b[dec]
        dist[inc] = up_b[inc] - x_b[inc]
        blocking = np.isfinite(dist)
        own = self.up[q] - self.lo[q]  # distance to the entering column's far bound
        if not blocking.any():
            if not np.isfinite(own):
                return None, None, False
            return own, None, False

        absmove = np.abs(move)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(blocking, np.maximum(dist, 0.0) / absmove, np.inf)
            slack = 1e-9 * (1.0 + np.abs(x_b))
            relaxed = np.where(blocking, (np.maximum(dist, 0.0) + slack) / absmove, np.inf)

        if self.bland:
            row_min = float(ratios.min())
            if own <= row_min:
                return own, None, False
            cand = (ratios <= row_min).nonzero()[0]
            r = int(cand[np.argmin(self.basis[cand])])
            return row_min, r, bool(move[r] > 0)

        theta = float(relaxed.min())
        cand = (blocking & (ratios <= theta)).nonzero()[0]
        r = int(cand[np.argmax(absmove[cand])])
        step = float(ratios[r])
        if own <= step:
            return own, None, False
        return step, r, bool(move[r] > 0)

    # -- termination ----------------------------------------------------------

    def _result(self, status: str) -> LpResult:
        # clean refactorisation for final values
        self._refactor()
        self._recompute_basics(self.p.rhs)
        c = self.c_phase2
        y = self._btran(c[self.basis])
        d = c - self.WT @ y
        x = self.x[: self.n].copy()
        obj = float(self.p.objective @ x) if status == OPTIMAL else float("nan")
        return LpResult(
            status=status,
            x=x,
            duals=y,
            reduced_costs=d[: self.n].copy(),
            objective=obj,
            iterations=self.iterations,
        )

    def _solve_bounds_only(self) -> LpResult:
        x = np.empty(self.n)
        for j in range(self.n):
            c = self.p.objective[j]
            if c > 0:
                x[j] = self.p.lower[j]
            elif c < 0:
                x[j] = self.p.upper[j]
            else:
                x[j] = self.x[j]
            if not np.isfinite(x[j]):
                return LpResult(
                    status=UNBOUNDED,
                    x=np.zeros(self.n),
                    duals=np.zeros(0),
                    reduced_costs=self.p.objective.copy(),
                    objective=float("nan"),
                    iterations=0,
                )
        return LpResult(
            status=OPTIMAL,
            x=x,
            duals=np.zeros(0),
            reduced_costs=self.p.objective.copy(),
            objective=float(self.p.objective @ x),
            iterations=0,
        )


# -- post-solve verification ---------------------------------------------------


@dataclass
class SolutionReport:
    ok: bool
    max_primal_residual: float  # relative to 1 + |rhs|, max over rows
    max_bound_violation: float
    max_dual_violation: float  # reduced-cost sign conditions
    max_complementarity: float
    duality_gap: float  # |primal - dual| / (1 + |primal|)
    violated_rows: list[str] = field(default_factory=list)
    violated_cols: list[str] = field(default_factory=list)

    def summary(self) -> str:
        state = "OK" if self.ok else "FAILED"
        return (
            f"{state}: primal {self.max_primal_residual:.3e}, "
            f"bounds {self.max_bound_violation:.3e}, "
            f"dual {self.max_dual_violation:.3e}, "
            f"compl {self.max_complementarity:.3e}, "
            f"gap {self.duality_gap:.3e}"
        )


def check_solution(
    problem: LpProblem, result: LpResult, tol: float = 1e-7
) -> SolutionReport:
    """Independent residual check of an optimal result.

    Recomputes row activities, bound violations, reduced-cost sign
    conditions and the bounded-dual objective gap from scratch; nothing is
    taken from the solver's internal state.
    """
    if result.status != OPTIMAL:
        raise ValueError(f"check_solution requires an optimal result, got {result.status}")
    x = result.x
    y = result.duals
    act = problem.row_activity(x)
    scale = 1.0 + np.abs(problem.rhs)

    primal = np.zeros(problem.n_rows)
    dual_rows = np.zeros(problem.n_rows)
    compl_rows = np.zeros(problem.n_rows)
    for i, sense in enumerate(problem.senses):
        slack = problem.rhs[i] - act[i]
        if sense == LE:
            primal[i] = max(0.0, -slack)
            dual_rows[i] = max(0.0, y[i])  # y <= 0 for binding <= rows
        elif sense == GE:
            primal[i] = max(0.0, slack)
            dual_rows[i] = max(0.0, -y[i])
        else:
            primal[i] = abs(slack)
        compl_rows[i] = abs(y[i] * slack) / scale[i]
    primal_rel = primal / scale

    lo, up = problem.lower, problem.upper
    bound_viol = np.maximum(
        np.where(np.isfinite(lo), lo - x, 0.0), np.where(np.isfinite(up), x - up, 0.0)
    )
    bound_viol = np.maximum(bound_viol, 0.0)

    d = problem.objective - problem.matrix().T @ y
    col_scale = 1.0 + np.abs(problem.objective)
    dual_cols = np.zeros(problem.n_cols)
    compl_cols = np.zeros(problem.n_cols)
    for j in range(problem.n_cols):
        dist_lo = x[j] - lo[j] if np.isfinite(lo[j]) else np.inf
        dist_up = up[j] - x[j] if np.isfinite(up[j]) else np.inf
        interior = dist_lo > tol * (1 + abs(x[j])) and dist_up > tol * (1 + abs(x[j]))
        if interior:
            dual_cols[j] = abs(d[j]) / col_scale[j]
        elif dist_lo <= dist_up:
            dual_cols[j] = max(0.0, -d[j]) / col_scale[j]
            compl_cols[j] = abs(d[j] * dist_lo) if np.isfinite(dist_lo) else 0.0
        else:
            dual_cols[j] = max(0.0, d[j]) / col_scale[j]
            compl_cols[j] = abs(d[j] * dist_up) if np.isfinite(dist_up) else 0.0

    # bounded-variable dual objective: y @ b + sum of reduced costs at bounds
    dual_obj = float(y @ problem.rhs)
    dual_obj += float(np.sum(np.where(d > 0, d * np.where(np.isfinite(lo), lo, 0.0), 0.0)))
    dual_obj += float(np.sum(np.where(d < 0, d * np.where(np.isfinite(up), up, 0.0), 0.0)))
    gap = abs(result.objective - dual_obj) / (1.0 + abs(result.objective))

    max_primal = float(primal_rel.max()) if problem.n_rows else 0.0
    max_bound = float(bound_viol.max()) if problem.n_cols else 0.0
    max_dual = float(max(dual_rows.max() if problem.n_rows else 0.0, dual_cols.max()))
    max_compl = float(
        max(compl_rows.max() if problem.n_rows else 0.0, compl_cols.max() / (1.0 + abs(result.objective)))
    )
    report = SolutionReport(
        ok=True,
        max_primal_residual=max_primal,
        max_bound_violation=max_bound,
        max_dual_violation=max_dual,
        max_complementarity=max_compl,
        duality_gap=gap,
        violated_rows=[
            problem.row_names[i] for i in np.nonzero(primal_rel > tol)[0]
        ],
        violated_cols=[
            problem.col_names[j] for j in np.nonzero(bound_viol > tol)[0]
        ],
    )
    report.ok = (
        max_primal < tol and max_bound < tol and max_dual < tol and max_compl < tol and gap < tol
    )
    return report


def dump_problem(problem: LpProblem, stream: TextIO) -> None:
    """Human-readable dump: one line per row plus objective and bounds."""
    stream.write(f"problem {problem.name}: {problem.n_rows} rows, {problem.n_cols} cols\n")
    obj_terms = [
        f"{float(problem.objective[j])!r}*{problem.col_names[j]}"
        for j in range(problem.n_cols)
        if problem.objective[j] != 0.0
    ]
    stream.write("minimize " + " + ".join(obj_terms) + "\n")
    mat = problem.matrix().tocoo()
    by_row: dict[int, list[tuple[int, float]]] = {}
    for i, j, v in zip(mat.row, mat.col, mat.data):
        by_row.setdefault(int(i), []).append((int(j), float(v)))
    for i in range(problem.n_rows):
        terms = " + ".join(
            f"{v!r}*{problem.col_names[j]}" for j, v in sorted(by_row.get(i, []))
        )
        stream.write(
            f"{problem.row_names[i]}: {terms} {problem.senses[i]} {float(problem.rhs[i])!r}\n"
        )
    for j in range(problem.n_cols):
        stream.write(
            f"bound {problem.col_names[j]}: "
            f"[{float(problem.lower[j])!r}, {float(problem.upper[j])!r}]\n"
        )
