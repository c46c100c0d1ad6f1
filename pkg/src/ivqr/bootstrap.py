"""Multiplier bootstrap for the integrated specification statistic.

Mean-one normal weights perturb the indicator residuals in both the fitting
criterion and the statistic; the standardization constants pick up the
factor (sigma^2 + 1).  With unit weights the bootstrap statistic equals the
plain statistic exactly, because both run the identical fitting code.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ivqr.estimation import SieveConfig, SieveDesign, fit_ivqr_path, instrument_basis
from ivqr.moments import Sample
from ivqr.testing import TestResult, standardize_sn, statistic_sn


@dataclass(frozen=True)
class BootstrapConfig:
    """Multiplier weight law: Normal(1, sigma_eps^2), replication count, seed."""

    b: int = 200
    sigma_eps: float = 0.5
    seed: int = 0
    weight_law: str = "normal"

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("bootstrap replication count must be >= 1")
        if not 0.0 < self.sigma_eps < np.inf:
            raise ValueError("sigma_eps must be positive and finite")
        if self.weight_law != "normal":
            raise ValueError("only the mean-one normal weight law is implemented")


def draw_weights(n: int, config: BootstrapConfig, replicate: int) -> np.ndarray:
    """IID Normal(1, sigma^2) multipliers, deterministic given (seed, replicate)."""
    if n < 1:
        raise ValueError("need at least one weight")
    rng = np.random.default_rng(
        np.random.SeedSequence((0xB005, config.seed, int(replicate)))
    )
    return 1.0 + config.sigma_eps * rng.standard_normal(n)


def standardize_star(raw: float, m_n: int, sigma_eps: float) -> float:
    """Bootstrap standardization with centering m(sigma^2+1)/6."""
    if m_n < 1:
        raise ValueError("m_n must be >= 1")
    c = sigma_eps**2 + 1.0
    return 3.0 * np.sqrt(5.0 / (m_n * c)) * (raw - m_n * c / 6.0)


def statistic_sn_star(
    sample: Sample,
    weights: np.ndarray,
    config: SieveConfig,
    *,
    warm_fits=None,
    design: SieveDesign | None = None,
    basis_m=None,
) -> float:
    """Bootstrap statistic: weighted refit per grid point, weighted moments.

    Called with weights identically one and no warm fits, this reproduces the
    plain integrated statistic exactly.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.size != sample.n:
        raise ValueError("one multiplier per observation required")
    if design is None:
        design = SieveDesign(sample, config)
    fits = fit_ivqr_path(
        sample,
        config,
        weights=weights,
        warm_fits=warm_fits,
        design=design,
        include_cqr_start=warm_fits is None,
    )
    if basis_m is None:
        basis_m = instrument_basis(sample, config.m_n)
    return statistic_sn(sample, fits, basis_m, config.grid, weights=weights)


def default_refit_config(config: SieveConfig) -> SieveConfig:
    """Lighter optimizer for bootstrap refits.

    Refits start warm at the original solutions of a mildly perturbed
    criterion, so the random restarts add nothing but runtime.
    """
    from dataclasses import replace

    opt = replace(config.optimizer, restarts=0, max_evals=min(config.optimizer.max_evals, 400))
    return replace(config, optimizer=opt)


def bootstrap_draws(
    sample: Sample,
    config: SieveConfig,
    boot: BootstrapConfig,
    *,
    refit_config: SieveConfig | None = None,
    warm_fits=None,
) -> np.ndarray:
    """Standardized bootstrap statistics for replicates 1..B."""
    refit = refit_config if refit_config is not None else config
    design = SieveDesign(sample, refit)
    basis_m = instrument_basis(sample, refit.m_n)
    m_dim = basis_m.dimension
    values = np.empty(boot.b)
    for b in range(boot.b):
        w = draw_weights(sample.n, boot, b + 1)
        raw = statistic_sn_star(
            sample, w, refit, warm_fits=warm_fits, design=design, basis_m=basis_m
        )
        values[b] = standardize_star(raw, m_dim, boot.sigma_eps)
    return values


def empirical_upper_quantile(values: np.ndarray, alpha: float) -> float:
    """Type-1 empirical (1-alpha) quantile: order statistic ceil(B(1-alpha))."""
    values = np.sort(np.asarray(values, dtype=float))
    b = values.size
    if b * alpha < 1.0:
        warnings.warn(
            "B*alpha < 1: upper quantile falls back to the maximum order statistic",
            RuntimeWarning,
            stacklevel=2,
        )
        return float(values[-1])
    rank = int(np.ceil(b * (1.0 - alpha)))
    rank = min(max(rank, 1), b)
    return float(values[rank - 1])


def bootstrap_critical_value(
    sample: Sample,
    config: SieveConfig,
    boot: BootstrapConfig,
    alpha: float,
    *,
    refit_config: SieveConfig | None = None,
    warm_fits=None,
) -> float:
    """Empirical (1-alpha) quantile of the standardized bootstrap draws."""
    draws = bootstrap_draws(
        sample, config, boot, refit_config=refit_config, warm_fits=warm_fits
    )
    return empirical_upper_quantile(draws, alpha)


def bootstrap_test(
    sample: Sample,
    config: SieveConfig,
    boot: BootstrapConfig,
    alpha: float = 0.05,
    *,
    refit_config: SieveConfig | None = None,
) -> TestResult:
    """Integrated specification test with a bootstrap critical value.

    The original fits warm-start every bootstrap refit; refit_config can
    lighten the refit optimizer without touching the original statistic.
    """
    design = SieveDesign(sample, config)
    fits = fit_ivqr_path(sample, config, design=design)
    basis_m = instrument_basis(sample, config.m_n)
    raw = statistic_sn(sample, fits, basis_m, config.grid)
    standardized = standardize_sn(raw, basis_m.dimension)
    if refit_config is None:
        refit_config = default_refit_config(config)
    critical = bootstrap_critical_value(
        sample, config, boot, alpha, refit_config=refit_config, warm_fits=fits
    )
    return TestResult(
        name="specification-bootstrap",
        raw=raw,
        standardized=standardized,
        alpha=alpha,
        critical_value=critical,
        reject=bool(standardized > critical),
        critical_source="bootstrap",
        dims=(config.k_n, config.l_n, basis_m.dimension),
        grid=config.grid,
        details={"b": boot.b, "sigma_eps": boot.sigma_eps, "seed": boot.seed},
    )
