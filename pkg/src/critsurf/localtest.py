"""Apply calibrated critical surfaces to data.

The global decision and the map of locally significant cells come from
comparing the cell-averaged quantile-dependence surface of the sample
against the calibrated thresholds, cell by cell.  A small ordinary
least squares helper turns the classic residuals-versus-fitted
diagnostic plot into a testable sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibrate import CriticalSurfaces, rank_surface
from .depcore import QSurface, Sample, compute_ranks
from .errors import DataError, InputError

__all__ = [
    "CellHit",
    "TestReport",
    "RegressionDiagnostics",
    "run_test",
    "fit_simple_ols",
    "diagnose_regression",
]


@dataclass(frozen=True, slots=True)
class CellHit:
    """One locally significant cell: 1-based indices, sign, value, and
    the threshold that was crossed."""

    s: int
    t: int
    sign: str
    value: float
    threshold: float


@dataclass(frozen=True, eq=False)
class TestReport:
    """Outcome of the global test plus everything needed to plot it.

    ``reject_global`` is true exactly when ``significant_cells`` is
    nonempty.  The full surface is carried along (not only the
    crossings) so heat maps can show the dependence landscape next to
    the significance map.
    """

    reject_global: bool
    significant_cells: tuple[CellHit, ...]
    surface: QSurface
    surfaces_used: CriticalSurfaces
    tie_broken: bool

    def __post_init__(self) -> None:
        if self.reject_global != bool(self.significant_cells):
            raise InputError("reject_global must mirror significant_cells")


@dataclass(frozen=True, eq=False)
class RegressionDiagnostics:
    """Simple-regression fit summary for diagnostic testing."""

    fitted: np.ndarray
    studentized_residuals: np.ndarray
    slope: float
    intercept: float

    def __post_init__(self) -> None:
        if self.fitted.shape != self.studentized_residuals.shape:
            raise InputError("fitted and residual vectors must have equal length")


def run_test(sample: Sample, cs: CriticalSurfaces, seed=None) -> TestReport:
    """Test ``sample`` against calibrated surfaces.

    The surfaces are specific to their sample size: the null law of the
    cell averages depends on n and k jointly, so a size mismatch is an
    error rather than something to paper over by interpolation.  Ties in
    the data are broken with ``seed`` and reported, not fatal.
    """
    n = cs.config.n
    if sample.n != n:
        raise DataError(
            f"sample has n={sample.n} but the surfaces were calibrated for n={n}; "
            f"recalibrate for the actual sample size"
        )
    ranks = compute_ranks(sample, seed)
    surface = rank_surface(ranks, cs.config.k)
    hits = []
    k = cs.config.k
    for s in range(k):
        for t in range(k):
            value = surface.cells[s, t]
            if value > cs.upper[s, t]:
                hits.append(CellHit(s + 1, t + 1, "positive", float(value), float(cs.upper[s, t])))
            elif value < cs.lower[s, t]:
                hits.append(CellHit(s + 1, t + 1, "negative", float(value), float(cs.lower[s, t])))
    return TestReport(
        reject_global=bool(hits),
        significant_cells=tuple(hits),
        surface=surface,
        surfaces_used=cs,
        tie_broken=ranks.tie_broken,
    )


def fit_simple_ols(x, y) -> RegressionDiagnostics:
    """Least-squares line of y on x with internally studentized residuals.

    Residuals are scaled by sigma_hat * sqrt(1 - h_i) where h_i is the
    hat-matrix diagonal of the simple regression; a perfectly linear
    noiseless sample yields residuals that are exactly zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise InputError("x and y must be one-dimensional and of equal length")
    n = x.shape[0]
    if n < 3:
        raise InputError(f"need at least 3 observations for the fit, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("regression input contains non-finite values")
    x_centered = x - x.mean()
    sxx = float(x_centered @ x_centered)
    if sxx == 0.0:
        raise InputError("x is constant; the slope is not identified")
    slope = float(x_centered @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    fitted = intercept + slope * x
    residuals = y - fitted
    leverage = 1.0 / n + x_centered**2 / sxx
    sigma2 = float(residuals @ residuals) / (n - 2)
    studentized = np.zeros(n)
    if sigma2 > 0.0:
        denom = np.sqrt(sigma2 * np.clip(1.0 - leverage, 0.0, None))
        mask = (residuals != 0.0) & (denom > 0.0)
        studentized[mask] = residuals[mask] / denom[mask]
    return RegressionDiagnostics(
        fitted=fitted,
        studentized_residuals=studentized,
        slope=slope,
        intercept=intercept,
    )


def diagnose_regression(x, y, cs: CriticalSurfaces, seed=None) -> TestReport:
    """Test the residuals-versus-fitted diagnostic for local dependence.

    Fits y on x, forms the (fitted value, studentized residual) pairs,
    and runs the independence test on them; any structure the line
    failed to capture shows up as significant cells.
    """
    diag = fit_simple_ols(x, y)
    sample = Sample(diag.fitted, diag.studentized_residuals)
    return run_test(sample, cs, seed)
