"""Nonparametric instrumental quantile regression: estimation and testing."""

from ivqr.bootstrap import (
    BootstrapConfig,
    bootstrap_critical_value,
    bootstrap_test,
    draw_weights,
    standardize_star,
    statistic_sn_star,
)
from ivqr.estimation import (
    OptimizerSettings,
    SieveConfig,
    SieveDesign,
    SieveFit,
    check_loss,
    fit_cqr,
    fit_ivqr,
    fit_ivqr_additive,
    fit_ivqr_path,
)
from ivqr.moments import (
    Sample,
    criterion,
    indicator_residuals,
    moment_vector,
    predict_series,
    series_that,
)
from ivqr.numerics import (
    BSplineBasis,
    QuantileGrid,
    SymmetricPseudoInverse,
    TensorBSplineBasis,
    basis_from_data,
    default_basis,
    design_matrix,
    dirac_grid,
    eval_basis,
    make_random_grid,
    make_uniform_grid,
    pinv_gram,
    quad_form,
)
from ivqr.selection import SelectionResult, illposedness_diag, minmax_select
from ivqr.simulation import (
    DgpSpec,
    MonteCarloReport,
    TestConfig,
    gen_sample,
    phi_series,
    phie_series,
    rho_shift,
    run_monte_carlo,
    run_test,
    true_structural,
)
from ivqr.testing import (
    TestResult,
    addit_test,
    deviation_diagnostic,
    exog_test,
    spec_test,
    spec_test_at,
    standardize_sn,
    standardize_sn_at,
    statistic_sn,
    statistic_sn_at,
    statistic_sn_measure,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "BSplineBasis",
    "DgpSpec",
    "MonteCarloReport",
    "OptimizerSettings",
    "QuantileGrid",
    "Sample",
    "SelectionResult",
    "SieveConfig",
    "SieveDesign",
    "SieveFit",
    "SymmetricPseudoInverse",
    "TensorBSplineBasis",
    "TestConfig",
    "TestResult",
    "addit_test",
    "basis_from_data",
    "bootstrap_critical_value",
    "bootstrap_test",
    "check_loss",
    "criterion",
    "default_basis",
    "design_matrix",
    "deviation_diagnostic",
    "dirac_grid",
    "draw_weights",
    "eval_basis",
    "exog_test",
    "fit_cqr",
    "fit_ivqr",
    "fit_ivqr_additive",
    "fit_ivqr_path",
    "gen_sample",
    "illposedness_diag",
    "indicator_residuals",
    "make_random_grid",
    "make_uniform_grid",
    "minmax_select",
    "moment_vector",
    "phi_series",
    "phie_series",
    "pinv_gram",
    "predict_series",
    "quad_form",
    "rho_shift",
    "run_monte_carlo",
    "run_test",
    "series_that",
    "spec_test",
    "spec_test_at",
    "standardize_sn",
    "standardize_sn_at",
    "standardize_star",
    "statistic_sn",
    "statistic_sn_at",
    "statistic_sn_measure",
    "statistic_sn_star",
    "true_structural",
    "__version__",
]
