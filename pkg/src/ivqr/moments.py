"""Empirical conditional-moment machinery for quantile instrument restrictions.

Moment vectors are kept as raw sums over observations (no 1/n); the Gram
pseudo-inverse weighting absorbs the scale.  Ties Y_i == phi(Z_i) count as
"below" throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ivqr.numerics import (
    SymmetricPseudoInverse,
    TensorBSplineBasis,
    design_matrix,
    pinv_gram,
    quad_form,
)


@dataclass
class Sample:
    """Observed data: outcome y, regressors z, instruments w, optional d.

    z, w and d are stored as 2-d column blocks; all blocks must share the
    number of rows and contain only finite values.
    """

    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    d: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.z = _as_columns(self.z, "z")
        self.w = _as_columns(self.w, "w")
        if self.d is not None:
            self.d = _as_columns(self.d, "d")
        n = self.y.size
        if n < 1:
            raise ValueError("sample must contain at least one observation")
        for name, block in (("z", self.z), ("w", self.w), ("d", self.d)):
            if block is None:
                continue
            if block.shape[0] != n:
                raise ValueError(f"block {name!r} has {block.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"block {name!r} contains non-finite values")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y contains non-finite values")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d_z(self) -> int:
        return self.z.shape[1]

    @property
    def d_w(self) -> int:
        return self.w.shape[1]


def _as_columns(block, name: str) -> np.ndarray:
    arr = np.asarray(block, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"block {name!r} must be 1- or 2-dimensional")
    return arr


def indicator_residuals(sample: Sample, phi_values, q: float) -> np.ndarray:
    """1{y_i <= phi_i} - q, with ties counted as below; entries in {-q, 1-q}."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must lie strictly inside (0, 1)")
    phi = np.asarray(phi_values, dtype=float).reshape(-1)
    if phi.size != sample.n:
        raise ValueError("phi_values must have one entry per observation")
    return (sample.y <= phi).astype(float) - q


def moment_vector(residuals, design_w) -> np.ndarray:
    """Raw-sum instrument moments: entry j is sum_i residuals_i * design_w[i, j]."""
    r = np.asarray(residuals, dtype=float).reshape(-1)
    d = np.asarray(design_w, dtype=float)
    if d.ndim != 2 or d.shape[0] != r.size:
        raise ValueError("residuals and instrument design have mismatched rows")
    return d.T @ r


def criterion(
    sample: Sample,
    phi_values,
    q: float,
    design_w_l: np.ndarray,
    pinv_l: SymmetricPseudoInverse,
) -> float:
    """Minimum-distance objective: moment vector weighted by the Gram inverse."""
    resid = indicator_residuals(sample, phi_values, q)
    return quad_form(moment_vector(resid, design_w_l), pinv_l)


def instrument_design(basis, w: np.ndarray) -> np.ndarray:
    """Design matrix of an instrument basis over a (possibly 2-d) w block."""
    if isinstance(basis, TensorBSplineBasis):
        return design_matrix(basis, w)
    return design_matrix(basis, np.asarray(w, dtype=float).reshape(-1, 1))


def series_that(sample: Sample, phi_values, q: float, basis_w) -> np.ndarray:
    """Series regression coefficients for w -> estimated P(Y <= phi(Z) | W=w) - q.

    The fitted value at a point w is eval_basis(basis_w, w) @ coefficients.
    """
    resid = indicator_residuals(sample, phi_values, q)
    design = instrument_design(basis_w, sample.w)
    gram = design.T @ design
    mv = moment_vector(resid, design)
    return pinv_gram(gram).matrix @ mv


def predict_series(basis_w, coefficients, points) -> np.ndarray:
    """Evaluate a series fit at new instrument values."""
    return design_matrix(basis_w, points) @ np.asarray(coefficients, dtype=float)
