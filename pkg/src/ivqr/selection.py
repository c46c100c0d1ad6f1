"""Dimension choice by the minimum-maximum principle, plus an ill-posedness
diagnostic based on the restricted derivative of the moment map.

Admissible dimensions: k < n^(1/4) and k^2 <= m < n^(1/2), with strictness
exactly as stated; ties break toward smaller k, then smaller m.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ivqr.estimation import (
    MomentQuadForm,
    OptimizerSettings,
    SieveConfig,
    SieveDesign,
    SieveFit,
    fit_cqr,
    fit_ivqr_path,
    instrument_basis,
    structural_basis,
)
from ivqr.moments import Sample, indicator_residuals, instrument_design
from ivqr.numerics import QuantileGrid, make_uniform_grid, pinv_gram
from ivqr.testing import standardize_sn, standardize_sn_at, statistic_sn, statistic_sn_at


@dataclass(frozen=True)
class SelectionResult:
    """Chosen dimensions plus the full standardized-statistic lattice."""

    chosen_k: int
    chosen_l: int
    chosen_m: int
    statistic_at_choice: float
    table: dict[tuple[int, int], float]
    n: int

    def __post_init__(self):
        if (self.chosen_k, self.chosen_m) not in self.table:
            raise ValueError("chosen pair must appear in the lattice table")
        if self.table[(self.chosen_k, self.chosen_m)] != self.statistic_at_choice:
            raise ValueError("statistic_at_choice must equal its table entry")


def admissible_lattice(n: int, candidate_ks, candidate_ms) -> dict[int, list[int]]:
    """Filter candidates by k < n^(1/4), k^2 <= m < n^(1/2)."""
    k_cap = n ** 0.25
    m_cap = n ** 0.5
    ks = sorted({int(k) for k in candidate_ks if 1 <= k < k_cap})
    if not ks:
        raise ValueError(f"no candidate k satisfies k < n^(1/4) = {k_cap:.2f}")
    lattice = {}
    for k in ks:
        ms = sorted({int(m) for m in candidate_ms if k * k <= m < m_cap})
        if ms:
            lattice[k] = ms
    if not lattice:
        raise ValueError(
            f"no candidate m satisfies k^2 <= m < n^(1/2) = {m_cap:.2f} for any admissible k"
        )
    return lattice


def minmax_select(
    sample: Sample,
    test_kind: str,
    candidate_ks,
    candidate_ms,
    alpha: float = 0.05,
    *,
    q: float = 0.5,
    grid: QuantileGrid | None = None,
    optimizer: OptimizerSettings | None = None,
) -> SelectionResult:
    """Pick k minimizing the maximum (over admissible m) standardized statistic.

    test_kind "spec" uses the integrated statistic, "spec_q" the fixed-quantile
    statistic, "exog" the check-function-based statistic.  Fits are reused
    across m for a given k since they do not depend on m.
    """
    if test_kind not in ("spec", "spec_q", "exog"):
        raise ValueError("test_kind must be one of spec, spec_q, exog")
    lattice = admissible_lattice(sample.n, candidate_ks, candidate_ms)
    grid = grid if grid is not None else make_uniform_grid(20)
    optimizer = optimizer if optimizer is not None else OptimizerSettings()

    table: dict[tuple[int, int], float] = {}
    best = None
    for k, ms in lattice.items():
        fits = None
        fit_q = None
        if test_kind == "spec":
            config = SieveConfig(k_n=k, m_n=max(ms), grid=grid, optimizer=optimizer)
            fits = fit_ivqr_path(sample, config)
        elif test_kind == "spec_q":
            config = SieveConfig(k_n=k, m_n=max(ms), grid=grid, optimizer=optimizer)
            from ivqr.estimation import fit_ivqr

            fit_q = fit_ivqr(sample, q, config)
        else:
            fit_q = fit_cqr(sample, q, k)
        worst = -np.inf
        worst_m = None
        for m in ms:
            basis_m = instrument_basis(sample, m)
            if test_kind == "spec":
                raw = statistic_sn(sample, fits, basis_m, grid)
                value = standardize_sn(raw, basis_m.dimension)
            else:
                raw = statistic_sn_at(sample, fit_q, q, basis_m)
                value = standardize_sn_at(raw, q, basis_m.dimension)
            table[(k, m)] = float(value)
            if value > worst:
                worst, worst_m = float(value), m
        if best is None or worst < best[0]:
            best = (worst, k, worst_m)

    _, chosen_k, chosen_m = best
    return SelectionResult(
        chosen_k=chosen_k,
        chosen_l=2 * chosen_k,
        chosen_m=chosen_m,
        statistic_at_choice=table[(chosen_k, chosen_m)],
        table=table,
        n=sample.n,
    )


def illposedness_diag(
    sample: Sample, fit: SieveFit, q: float, k_n: int
) -> np.ndarray:
    """Ascending singular values of the restricted derivative of the moment map.

    The derivative of c -> mean_i 1{y_i <= design_z c} f_l(w_i) at the fitted
    coefficients is estimated by central finite differences with bandwidth
    n^(-1/5) sd(y), then whitened by the marginal Gram square roots so the
    values approximate the operator restricted to L2-orthonormal coordinates.
    Small leading values flag a severely ill-posed criterion.
    """
    z_basis = structural_basis(sample, k_n)
    design_z = z_basis.evaluate(sample.z if sample.d_z > 1 else sample.z[:, 0])
    w_basis = instrument_basis(sample, 2 * k_n)
    design_w = instrument_design(w_basis, sample.w)
    n = sample.n
    coefs = np.asarray(fit.coefficients, dtype=float)[: design_z.shape[1]]
    h = n ** (-0.2) * (float(np.std(sample.y)) or 1.0)

    def moment_map(c):
        return design_w.T @ ((sample.y <= design_z @ c).astype(float)) / n

    deriv = np.empty((design_w.shape[1], design_z.shape[1]))
    for j in range(design_z.shape[1]):
        shift = np.zeros_like(coefs)
        shift[j] = h
        deriv[:, j] = (moment_map(coefs + shift) - moment_map(coefs - shift)) / (2 * h)

    try:
        white_w = np.linalg.cholesky(np.linalg.inv(design_w.T @ design_w / n))
        white_z = np.linalg.cholesky(np.linalg.inv(design_z.T @ design_z / n))
    except np.linalg.LinAlgError:
        import warnings

        warnings.warn(
            "degenerate basis Gram matrix; ill-posedness diagnostic returns zeros",
            RuntimeWarning,
            stacklevel=2,
        )
        return np.zeros(design_z.shape[1])
    restricted = white_w.T @ deriv @ white_z
    singulars = np.linalg.svd(restricted, compute_uv=False)
    return np.sort(singulars)
