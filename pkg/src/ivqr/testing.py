"""Quantile-restriction test statistics and their standardizations.

The integrated statistic sums instrument-moment quadratic forms over a
quantile grid; fixed-quantile, measure-weighted, exogeneity and additivity
variants share the same building blocks.  Critical values default to the
one-sided standard normal quantile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ivqr.estimation import (
    MomentQuadForm,
    SieveConfig,
    SieveDesign,
    SieveFit,
    fit_cqr,
    fit_ivqr,
    fit_ivqr_additive,
    fit_ivqr_path,
    instrument_basis,
)
from ivqr.moments import (
    Sample,
    indicator_residuals,
    instrument_design,
    predict_series,
    series_that,
)
from ivqr.numerics import QuantileGrid, dirac_grid


@dataclass
class TestResult:
    """Outcome of one test: raw and standardized statistic plus the decision."""

    __test__ = False  # keep pytest collection away despite the name

    name: str
    raw: float
    standardized: float
    alpha: float
    critical_value: float
    reject: bool
    critical_source: str
    dims: tuple[int | None, int | None, int]
    grid: QuantileGrid
    q: float | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.raw < 0:
            raise ValueError("raw statistic cannot be negative")
        if self.reject != (self.standardized > self.critical_value):
            raise ValueError("decision inconsistent with statistic and critical value")


def normal_critical_value(alpha: float) -> float:
    """One-sided (1 - alpha) standard normal quantile."""
    return float(norm.ppf(1.0 - alpha))


def standardize_sn(raw: float, m_n: int) -> float:
    """Center by m/6 and scale by the sieve standard deviation sqrt(m)/(3*sqrt(5))."""
    if m_n < 1:
        raise ValueError("m_n must be >= 1")
    return 3.0 * np.sqrt(5.0 / m_n) * (raw - m_n / 6.0)


def unstandardize_sn(value: float, m_n: int) -> float:
    """Inverse of standardize_sn."""
    return value / (3.0 * np.sqrt(5.0 / m_n)) + m_n / 6.0


def standardize_sn_at(raw: float, q: float, m_n: int) -> float:
    """Fixed-quantile standardization (2m)^(-1/2) (raw / (q(1-q)) - m)."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must lie strictly inside (0, 1)")
    return (raw / (q * (1.0 - q)) - m_n) / np.sqrt(2.0 * m_n)


def statistic_sn_at(
    sample: Sample,
    fit: SieveFit,
    q: float,
    basis_w_m,
    *,
    weights: np.ndarray | None = None,
    quad: MomentQuadForm | None = None,
) -> float:
    """Instrument-moment quadratic form at one quantile's fit."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must lie strictly inside (0, 1)")
    if quad is None:
        quad = MomentQuadForm(instrument_design(basis_w_m, sample.w))
    resid = indicator_residuals(sample, fit.fitted_values, q)
    if weights is not None:
        resid = resid * np.asarray(weights, dtype=float)
    return quad.of_residuals(resid)


def statistic_sn(
    sample: Sample,
    fits: list[SieveFit],
    basis_w_m,
    grid: QuantileGrid,
    *,
    weights: np.ndarray | None = None,
) -> float:
    """Grid-weighted sum of per-quantile statistics (the integrated statistic)."""
    if len(fits) != grid.size:
        raise ValueError("need exactly one fit per grid point")
    quad = MomentQuadForm(instrument_design(basis_w_m, sample.w))
    total = 0.0
    for weight, q, fit in zip(grid.weights, grid.points, fits):
        total += weight * statistic_sn_at(
            sample, fit, float(q), basis_w_m, weights=weights, quad=quad
        )
    return total


def measure_constants(grid: QuantileGrid) -> tuple[float, float]:
    """Mean constant int q(1-q) dmu and variance constant int (min(q,q')-qq')^2 dmu dmu."""
    pts, wts = grid.points, grid.weights
    mean_c = float(wts @ (pts * (1.0 - pts)))
    cov = np.minimum.outer(pts, pts) - np.outer(pts, pts)
    var_c = float(wts @ (cov**2) @ wts)
    return mean_c, var_c


def statistic_sn_measure(
    sample: Sample,
    fits: list[SieveFit],
    grid: QuantileGrid,
    basis_w_m,
    alpha: float = 0.05,
    *,
    dims: tuple[int | None, int | None, int] | None = None,
) -> TestResult:
    """Measure-weighted statistic standardized by the grid's own constants."""
    if grid.total_mass <= 0:
        raise ValueError("measure must have positive total mass")
    m_dim = basis_w_m.dimension
    raw = statistic_sn(sample, fits, basis_w_m, grid)
    mean_c, var_c = measure_constants(grid)
    standardized = (raw - m_dim * mean_c) / np.sqrt(2.0 * m_dim * var_c)
    critical = normal_critical_value(alpha)
    return TestResult(
        name="specification-measure",
        raw=raw,
        standardized=float(standardized),
        alpha=alpha,
        critical_value=critical,
        reject=bool(standardized > critical),
        critical_source="asymptotic",
        dims=dims if dims is not None else (None, None, m_dim),
        grid=grid,
    )


def spec_test(sample: Sample, config: SieveConfig, alpha: float = 0.05) -> TestResult:
    """Integrated specification test over the config's quantile grid."""
    design = SieveDesign(sample, config)
    fits = fit_ivqr_path(sample, config, design=design)
    basis_m = instrument_basis(sample, config.m_n)
    raw = statistic_sn(sample, fits, basis_m, config.grid)
    standardized = standardize_sn(raw, basis_m.dimension)
    critical = normal_critical_value(alpha)
    return TestResult(
        name="specification",
        raw=raw,
        standardized=standardized,
        alpha=alpha,
        critical_value=critical,
        reject=bool(standardized > critical),
        critical_source="asymptotic",
        dims=(config.k_n, config.l_n, basis_m.dimension),
        grid=config.grid,
    )


def spec_test_at(
    sample: Sample, q: float, config: SieveConfig, alpha: float = 0.05
) -> TestResult:
    """Specification test at a single quantile."""
    fit = fit_ivqr(sample, q, config)
    basis_m = instrument_basis(sample, config.m_n)
    raw = statistic_sn_at(sample, fit, q, basis_m)
    standardized = standardize_sn_at(raw, q, basis_m.dimension)
    critical = normal_critical_value(alpha)
    return TestResult(
        name="specification-q",
        raw=raw,
        standardized=float(standardized),
        alpha=alpha,
        critical_value=critical,
        reject=bool(standardized > critical),
        critical_source="asymptotic",
        dims=(config.k_n, config.l_n, basis_m.dimension),
        grid=dirac_grid(q),
        q=q,
    )


def exog_test(
    sample: Sample,
    q: float,
    k_n: int,
    m_n: int,
    alpha: float = 0.05,
    *,
    include_d_linear: bool = False,
) -> TestResult:
    """Exogeneity test: instrument moments evaluated at the check-function fit."""
    fit = fit_cqr(sample, q, k_n, include_d_linear=include_d_linear)
    basis_m = instrument_basis(sample, m_n)
    raw = statistic_sn_at(sample, fit, q, basis_m)
    standardized = standardize_sn_at(raw, q, basis_m.dimension)
    critical = normal_critical_value(alpha)
    return TestResult(
        name="exogeneity",
        raw=raw,
        standardized=float(standardized),
        alpha=alpha,
        critical_value=critical,
        reject=bool(standardized > critical),
        critical_source="asymptotic",
        dims=(k_n, None, basis_m.dimension),
        grid=dirac_grid(q),
        q=q,
    )


def addit_test(
    sample: Sample, q: float, config: SieveConfig, alpha: float = 0.05
) -> TestResult:
    """Additivity test: specification statistic at the additive-restricted fit."""
    if sample.d_z < 2:
        raise ValueError("additivity test requires at least two regressors")
    fit = fit_ivqr_additive(sample, q, config)
    basis_m = instrument_basis(sample, config.m_n)
    raw = statistic_sn_at(sample, fit, q, basis_m)
    standardized = standardize_sn_at(raw, q, basis_m.dimension)
    critical = normal_critical_value(alpha)
    return TestResult(
        name="additivity",
        raw=raw,
        standardized=float(standardized),
        alpha=alpha,
        critical_value=critical,
        reject=bool(standardized > critical),
        critical_source="asymptotic",
        dims=(config.k_n, config.l_n, basis_m.dimension),
        grid=dirac_grid(q),
        q=q,
    )


def default_w_grid(sample: Sample, num: int = 101) -> np.ndarray:
    """Equally spaced scalar instrument grid over the empirical range."""
    w = sample.w[:, 0]
    return np.linspace(float(w.min()), float(w.max()), num)


def deviation_diagnostic(
    sample: Sample, fit: SieveFit, q: float, basis_w_m, w_grid
) -> float:
    """Minimum over the grid of the series estimate of P(Y <= fit | W=w) - q.

    A clearly positive minimum indicates that no quantile function can
    rationalise the instrument restriction, pointing at instrument failure.
    """
    w_grid = np.asarray(w_grid, dtype=float)
    if w_grid.size == 0:
        raise ValueError("w_grid must be nonempty")
    coef = series_that(sample, fit.fitted_values, q, basis_w_m)
    return float(np.min(predict_series(basis_w_m, coef, w_grid)))
