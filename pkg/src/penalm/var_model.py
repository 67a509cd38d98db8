"""First-order vector autoregression for wage growth and asset returns.

The economic uncertainty driving the ALM model is a VAR(1) process on
continuously compounded rates: the first series is the general wage
increase, the remaining ones are gross returns of the investable asset
classes.  The module keeps the process parameters, provides the one-step
map, and caches the Cholesky factor used to correlate innovations.
Sampling (drawing standard normals) is deliberately left to the caller so
the dynamics stay deterministic and testable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "VarProcess",
    "build_default_process",
    "cholesky",
    "make_process",
    "stationary_mean",
    "step",
]

#: Series order used throughout: wages first, then the asset classes.
DEFAULT_SERIES = ("wages", "deposits", "bonds", "real_estate", "stocks")

# Built-in annual calibration (log space).
_DEFAULT_INTERCEPT = (0.018, 0.020, 0.058, 0.072, 0.086)
_DEFAULT_LAG_DIAG = (0.693, 0.644, 0.0, 0.0, 0.0)
_DEFAULT_SD = (0.030, 0.017, 0.060, 0.112, 0.159)
_DEFAULT_CORR = (
    (1.0, 0.227, -0.152, -0.008, -0.389),
    (0.227, 1.0, -0.268, -0.179, -0.516),
    (-0.152, -0.268, 1.0, 0.343, 0.383),
    (-0.008, -0.179, 0.343, 1.0, 0.331),
    (-0.389, -0.516, 0.383, 0.331, 1.0),
)


class NotPositiveDefiniteError(ValueError):
    """Raised when a covariance passed to :func:`cholesky` is not SPD.

    ``pivot`` is the zero-based index of the first failing pivot.
    """

    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} is not strictly positive"
        )


@dataclass(frozen=True)
class VarProcess:
    """Calibrated VAR(1) process ``h_t = c + lag @ h_(t-1) + eps_t``.

    All vectors live in log space: component ``i`` of ``h_t`` is
    ``ln(1 + rate_i)`` over one period.  ``chol_factor`` is the lower
    triangular factor of ``diag(sd) @ corr @ diag(sd)``.  Instances are
    immutable and safe to share between tree-building workers.
    """

    dim: int
    intercept: np.ndarray
    lag_matrix: np.ndarray
    residual_sd: np.ndarray
    residual_corr: np.ndarray
    chol_factor: np.ndarray
    series: tuple[str, ...]


def cholesky(corr: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == diag(sd) @ corr @ diag(sd).

    Implemented directly (outer-product form) so that a non-positive-definite
    input can be reported with the index of the failing pivot, which
    ``numpy.linalg.cholesky`` does not expose.
    """
    corr = np.asarray(corr, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError(f"correlation matrix must be square, got shape {corr.shape}")
    n = corr.shape[0]
    if sd.shape != (n,):
        raise ValueError(f"sd must have length {n}, got shape {sd.shape}")
    if np.any(sd <= 0.0):
        raise ValueError("standard deviations must be strictly positive")

    cov = corr * np.outer(sd, sd)
    lower = np.zeros_like(cov)
    for j in range(n):
        pivot = cov[j, j] - np.dot(lower[j, :j], lower[j, :j])
        if pivot <= 0.0:
            raise NotPositiveDefiniteError(j)
        lower[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            lower[j + 1 :, j] = (
                cov[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]
            ) / lower[j, j]
    return lower


def make_process(
    intercept,
    lag_matrix,
    residual_sd,
    residual_corr,
    series: tuple[str, ...] | None = None,
) -> VarProcess:
    """Validate parameters and build a :class:`VarProcess`.

    Checks symmetry and unit diagonal of the correlation matrix, positivity
    of the standard deviations, and positive definiteness of the implied
    covariance (via the Cholesky factorisation, which is cached).
    """
    intercept = np.asarray(intercept, dtype=float)
    dim = intercept.shape[0]
    lag_matrix = np.asarray(lag_matrix, dtype=float)
    residual_sd = np.asarray(residual_sd, dtype=float)
    residual_corr = np.asarray(residual_corr, dtype=float)
    if series is None:
        series = tuple(f"series_{i}" for i in range(dim))

    if lag_matrix.shape != (dim, dim):
        raise ValueError(f"lag matrix must be {dim}x{dim}, got {lag_matrix.shape}")
    if residual_sd.shape != (dim,):
        raise ValueError("residual_sd length mismatch")
    if residual_corr.shape != (dim, dim):
        raise ValueError("residual_corr shape mismatch")
    if not np.allclose(residual_corr, residual_corr.T, atol=0.0):
        raise ValueError("residual correlation matrix must be symmetric")
    if not np.all(np.diag(residual_corr) == 1.0):
        raise ValueError("residual correlation matrix must have a unit diagonal")
    if np.any(np.abs(residual_corr) > 1.0):
        raise ValueError("correlations must lie in [-1, 1]")
    if len(series) != dim:
        raise ValueError("series names length mismatch")

    chol = cholesky(residual_corr, residual_sd)
    return VarProcess(
        dim=dim,
        intercept=intercept,
        lag_matrix=lag_matrix,
        residual_sd=residual_sd,
        residual_corr=residual_corr,
        chol_factor=chol,
        series=tuple(series),
    )


def build_default_process() -> VarProcess:
    """The built-in annual calibration.

    Five series (wages, deposits, bonds, real estate, stocks); wages and
    deposits are AR(1) on their own lag, the other series are pure
    intercept plus noise.
    """
    return make_process(
        intercept=_DEFAULT_INTERCEPT,
        lag_matrix=np.diag(_DEFAULT_LAG_DIAG),
        residual_sd=_DEFAULT_SD,
        residual_corr=_DEFAULT_CORR,
        series=DEFAULT_SERIES,
    )


def step(
    process: VarProcess, prev_log_state: np.ndarray, gaussian_draws: np.ndarray
) -> np.ndarray:
    """One step of the process: ``c + lag @ prev + L @ draws``.

    ``gaussian_draws`` must be i.i.d. standard normal samples supplied by
    the caller.  The result is in log space; ``exp(h) - 1`` gives rates.
    """
    prev_log_state = np.asarray(prev_log_state, dtype=float)
    gaussian_draws = np.asarray(gaussian_draws, dtype=float)
    if prev_log_state.shape != (process.dim,):
        raise ValueError(
            f"prev_log_state must have shape ({process.dim},), got {prev_log_state.shape}"
        )
    if gaussian_draws.shape != (process.dim,):
        raise ValueError(
            f"gaussian_draws must have shape ({process.dim},), got {gaussian_draws.shape}"
        )
    return (
        process.intercept
        + process.lag_matrix @ prev_log_state
        + process.chol_factor @ gaussian_draws
    )


def stationary_mean(process: VarProcess) -> np.ndarray:
    """Fixed point of the noiseless map, ``(I - lag)^-1 @ c``.

    Requires the spectral radius of the lag matrix to be below one, which
    holds for the built-in calibration.
    """
    eye = np.eye(process.dim)
    return np.linalg.solve(eye - process.lag_matrix, process.intercept)
