"""Sieve estimation of structural quantile functions.

Two fitting routes: a convex check-function fit of the conditional quantile
(exact linear program) and the instrument minimum-distance fit, whose
objective is piecewise constant in the coefficients and is minimised by a
multi-start Nelder-Mead simplex seeded at the check-function solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ivqr.moments import Sample, instrument_design
from ivqr.numerics import (
    QuantileGrid,
    TensorBSplineBasis,
    basis_from_data,
    make_uniform_grid,
    pinv_gram,
)


@dataclass(frozen=True)
class OptimizerSettings:
    """Multi-start simplex controls for the minimum-distance fit."""

    restarts: int = 5
    max_evals: int = 2000
    tol: float = 1e-4
    box_bound: float | None = None  # None: 10 * range(y)
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 0 or self.max_evals < 1:
            raise ValueError("restarts must be >= 0 and max_evals >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.box_bound is not None and not (0 < self.box_bound < np.inf):
            raise ValueError("box_bound must be positive and finite")


@dataclass(frozen=True)
class SieveConfig:
    """Dimensions, quantile grid and optimizer settings for one fit problem.

    For multi-column z or w the dimensions are per coordinate; tensor
    products supply the joint basis.
    """

    k_n: int
    m_n: int
    l_n: int | None = None
    grid: QuantileGrid = field(default_factory=lambda: make_uniform_grid(20))
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    additive_groups: tuple[tuple[int, ...], ...] | None = None
    include_d_linear: bool = False

    def __post_init__(self):
        l_n = 2 * self.k_n if self.l_n is None else self.l_n
        object.__setattr__(self, "l_n", int(l_n))
        if not 1 <= self.k_n <= self.l_n <= self.m_n:
            raise ValueError("dimensions must satisfy 1 <= k_n <= l_n <= m_n")
        if self.additive_groups is not None:
            groups = tuple(tuple(int(i) for i in g) for g in self.additive_groups)
            flat = [i for g in groups for i in g]
            if not groups or any(len(g) == 0 for g in groups):
                raise ValueError("additive groups must be nonempty")
            if len(set(flat)) != len(flat):
                raise ValueError("additive groups must not overlap")
            object.__setattr__(self, "additive_groups", groups)


@dataclass
class SieveFit:
    """Fitted coefficients for one quantile plus optimizer diagnostics."""

    q: float
    coefficients: np.ndarray
    criterion_value: float
    evaluations: int
    restarts_used: int
    fitted_values: np.ndarray
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        self.fitted_values = np.asarray(self.fitted_values, dtype=float)
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("fitted coefficients must be finite")
        if self.criterion_value < 0:
            raise ValueError("criterion value cannot be negative")


def check_loss(u, q: float) -> np.ndarray:
    """Check function |u| + (2q-1)u = 2(q u+ + (1-q) u-); minimised at the q-quantile."""
    u = np.asarray(u, dtype=float)
    return np.abs(u) + (2.0 * q - 1.0) * u


def cqr_objective(y, fitted, q: float) -> float:
    """Total check loss of a candidate conditional-quantile fit."""
    return float(np.sum(check_loss(np.asarray(y, float) - np.asarray(fitted, float), q)))


class MomentQuadForm:
    """Quadratic form of raw-sum instrument moments with the Gram inverse.

    The Gram matrix is scaled by 1/n before eigen-inversion; the factor is
    restored in the value so results equal the unscaled quadratic form.
    """

    def __init__(self, design: np.ndarray, tol: float = 1e-10):
        design = np.asarray(design, dtype=float)
        self.design = design
        self.n = design.shape[0]
        self.pinv_scaled = pinv_gram(design.T @ design / self.n, tol)
        self._m = design @ self.pinv_scaled.half

    def of_residuals(self, residuals: np.ndarray) -> float:
        u = self._m.T @ residuals
        return float(u @ u) / self.n

    def of_moment_vector(self, vector: np.ndarray) -> float:
        u = self.pinv_scaled.half.T @ vector
        return float(u @ u) / self.n


class SieveDesign:
    """Structural design (scalar, tensor or additive) plus criterion weighting."""

    def __init__(self, sample: Sample, config: SieveConfig):
        self.sample = sample
        self.config = config
        self._build_z(sample, config)
        self.w_basis_l = instrument_basis(sample, config.l_n)
        self.quad_l = MomentQuadForm(instrument_design(self.w_basis_l, sample.w))
        if config.include_d_linear and sample.d is not None:
            self.z_design = np.hstack([self.z_design, sample.d])
        self.dim = self.z_design.shape[1]

    def _build_z(self, sample: Sample, config: SieveConfig):
        groups = config.additive_groups
        if groups is not None and len(groups) == 1 and len(groups[0]) == sample.d_z:
            groups = None  # one group spanning all regressors is unrestricted
        if groups is None:
            self.z_basis = structural_basis(sample, config.k_n)
            self.group_bases = None
            self.z_design = self.z_basis.evaluate(
                sample.z if sample.d_z > 1 else sample.z[:, 0]
            )
            self.z_dim = self.z_design.shape[1]
            return
        cols = {i for g in groups for i in g}
        if not cols <= set(range(sample.d_z)):
            raise ValueError("additive groups reference unknown z columns")
        self.z_basis = None
        self.group_bases = []
        blocks = [np.ones((sample.n, 1))]
        for g in groups:
            basis = _group_basis(sample.z, g, config.k_n)
            self.group_bases.append((g, basis))
            block = basis.evaluate(sample.z[:, list(g)] if len(g) > 1 else sample.z[:, g[0]])
            blocks.append(block[:, 1:])  # drop one column; intercept restores the span
        self.z_design = np.hstack(blocks)
        self.z_dim = self.z_design.shape[1]

    def evaluate_z(self, z_points) -> np.ndarray:
        """Structural design rows at new regressor points (no d columns)."""
        z_points = np.asarray(z_points, dtype=float)
        if self.group_bases is None:
            return self.z_basis.evaluate(z_points)
        if z_points.ndim == 1:
            z_points = z_points.reshape(-1, 1)
        blocks = [np.ones((z_points.shape[0], 1))]
        for g, basis in self.group_bases:
            block = basis.evaluate(z_points[:, list(g)] if len(g) > 1 else z_points[:, g[0]])
            blocks.append(block[:, 1:])
        return np.hstack(blocks)

    def structural_part(self, coefficients: np.ndarray) -> np.ndarray:
        return np.asarray(coefficients, dtype=float)[: self.z_dim]


def structural_basis(sample: Sample, dim: int):
    """Basis for the regressors: scalar B-splines, tensor product if multi-column."""
    if sample.d_z == 1:
        return basis_from_data(sample.z[:, 0], dim)
    return TensorBSplineBasis(
        tuple(basis_from_data(sample.z[:, j], dim) for j in range(sample.d_z))
    )


def instrument_basis(sample: Sample, dim: int):
    """Basis for the instruments, tensor product over columns if needed."""
    if sample.d_w == 1:
        return basis_from_data(sample.w[:, 0], dim)
    return TensorBSplineBasis(
        tuple(basis_from_data(sample.w[:, j], dim) for j in range(sample.d_w))
    )


def _group_basis(z: np.ndarray, group: tuple[int, ...], dim: int):
    if len(group) == 1:
        return basis_from_data(z[:, group[0]], dim)
    return TensorBSplineBasis(tuple(basis_from_data(z[:, j], dim) for j in group))


def _quantile_lp(design: np.ndarray, y: np.ndarray, q: float):
    """Exact check-function minimiser via the standard LP formulation."""
    n, p = design.shape
    rank = int(np.linalg.matrix_rank(design))
    flags: tuple[str, ...] = ()
    basis_map = None
    work = design
    if rank < p:
        flags = ("rank_deficient",)
        u, s, vt = np.linalg.svd(design, full_matrices=False)
        keep = s > s[0] * 1e-12 if s.size else np.zeros(0, dtype=bool)
        work = u[:, keep] * s[keep]
        basis_map = vt[keep].T  # coefficients = basis_map @ reduced solution
        p = work.shape[1]
    cost = np.concatenate([np.zeros(p), np.full(n, q), np.full(n, 1.0 - q)])
    a_eq = sp.hstack([sp.csr_matrix(work), sp.eye(n), -sp.eye(n)], format="csr")
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(cost, A_eq=a_eq, b_eq=y, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"quantile LP failed: {res.message}")
    coef = res.x[:p]
    if basis_map is not None:
        coef = basis_map @ coef
    return coef, flags


def fit_cqr(
    sample: Sample,
    q: float,
    k_n: int,
    *,
    include_d_linear: bool = False,
    design: np.ndarray | None = None,
) -> SieveFit:
    """Conditional quantile fit: minimise the check loss over the linear sieve."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must lie strictly inside (0, 1)")
    if design is None:
        basis = structural_basis(sample, k_n)
        design = basis.evaluate(sample.z if sample.d_z > 1 else sample.z[:, 0])
        if include_d_linear and sample.d is not None:
            design = np.hstack([design, sample.d])
    if design.shape[1] > sample.n:
        raise ValueError("sieve dimension exceeds the sample size")
    coef, flags = _quantile_lp(design, sample.y, q)
    fitted = design @ coef
    return SieveFit(
        q=q,
        coefficients=coef,
        criterion_value=cqr_objective(sample.y, fitted, q),
        evaluations=0,
        restarts_used=0,
        fitted_values=fitted,
        flags=flags,
    )


def nelder_mead(fn, x0, step, *, max_evals=2000, xatol=1e-4, fatol=0.0, bounds=None):
    """Bounded Nelder-Mead returning (x, f, evaluations, best-value trace).

    The trace records the running best objective, which is nonincreasing by
    construction.  Suited to piecewise-constant objectives: termination
    requires both a flat simplex and a small diameter.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    lo = hi = None
    if bounds is not None:
        lo, hi = bounds
    def clipped(x):
        return np.clip(x, lo, hi) if lo is not None else x

    simplex = np.empty((dim + 1, dim))
    simplex[0] = clipped(x0)
    for j in range(dim):
        point = x0.copy()
        point[j] += step[j]
        simplex[j + 1] = clipped(point)
    values = np.array([fn(x) for x in simplex])
    nfev = dim + 1
    trace = [float(values.min())]

    alpha, gamma, beta, delta = 1.0, 2.0, 0.5, 0.5
    while nfev < max_evals:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        spread = values[-1] - values[0]
        diameter = np.max(np.abs(simplex[1:] - simplex[0]))
        if spread <= fatol and diameter <= xatol:
            break
        centroid = simplex[:-1].mean(axis=0)
        reflected = clipped(centroid + alpha * (centroid - simplex[-1]))
        f_r = fn(reflected)
        nfev += 1
        if f_r < values[0]:
            expanded = clipped(centroid + gamma * (reflected - centroid))
            f_e = fn(expanded)
            nfev += 1
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = clipped(centroid + beta * (reflected - centroid))
            else:
                contracted = clipped(centroid + beta * (simplex[-1] - centroid))
            f_c = fn(contracted)
            nfev += 1
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                for j in range(1, dim + 1):
                    simplex[j] = clipped(simplex[0] + delta * (simplex[j] - simplex[0]))
                    values[j] = fn(simplex[j])
                nfev += dim
        trace.append(float(values.min()))

    best = int(np.argmin(values))
    return simplex[best], float(values[best]), nfev, trace


def _q_seed(base: int, q: float) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((0x1F17, base, int(round(q * 2**20)))))


def fit_ivqr(
    sample: Sample,
    q: float,
    config: SieveConfig,
    *,
    warm_starts=(),
    weights: np.ndarray | None = None,
    design: SieveDesign | None = None,
    include_cqr_start: bool = True,
) -> SieveFit:
    """Instrument minimum-distance fit of the structural quantile function.

    Starts at the check-function solution, optionally at caller-supplied warm
    starts, and at seeded random perturbations; returns the best point found.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must lie strictly inside (0, 1)")
    if design is None:
        design = SieveDesign(sample, config)
    if sample.n <= config.l_n:
        raise ValueError("fit requires n > l_n")
    y = sample.y
    z_design = design.z_design
    quad = design.quad_l

    if weights is None:
        def objective(c):
            return quad.of_residuals((y <= z_design @ c) - q)
    else:
        weights = np.asarray(weights, dtype=float)

        def objective(c):
            return quad.of_residuals(((y <= z_design @ c) - q) * weights)

    opt = config.optimizer
    sd_y = float(np.std(y)) or 1.0
    box = opt.box_bound if opt.box_bound is not None else 10.0 * max(np.ptp(y), sd_y)
    bounds = (-box, box)

    starts = []
    if include_cqr_start:
        cqr = fit_cqr(sample, q, config.k_n, design=z_design)
        starts.append(np.clip(cqr.coefficients, *bounds))
    starts.extend(np.clip(np.asarray(w, dtype=float), *bounds) for w in warm_starts)
    if not starts:
        raise ValueError("need the check-function start or at least one warm start")
    rng = _q_seed(opt.seed, q)
    scale = 0.5 * np.maximum(np.abs(starts[0]), 0.1 * sd_y)
    for _ in range(opt.restarts):
        starts.append(np.clip(starts[0] + scale * rng.standard_normal(design.dim), *bounds))

    step = np.maximum(0.25 * np.abs(starts[0]), 0.15 * sd_y)
    best_x, best_f, total_evals = None, np.inf, 0
    start_values = []
    for x0 in starts:
        x, f, nfev, _ = nelder_mead(
            objective,
            x0,
            step,
            max_evals=opt.max_evals,
            xatol=opt.tol * max(1.0, sd_y),
            bounds=bounds,
        )
        start_values.append(objective(x0))
        total_evals += nfev + 1
        if f < best_f:
            best_x, best_f = x, f

    flags = ()
    if best_f >= min(start_values):  # simplex never beat the best start
        flags = ("no_improvement",)
    return SieveFit(
        q=q,
        coefficients=best_x,
        criterion_value=best_f,
        evaluations=total_evals,
        restarts_used=len(starts),
        fitted_values=z_design @ best_x,
        flags=flags,
    )


def fit_ivqr_additive(sample: Sample, q: float, config: SieveConfig) -> SieveFit:
    """Minimum-distance fit restricted to an additive structural function."""
    if config.additive_groups is None:
        raise ValueError("config.additive_groups must be set for an additive fit")
    if len(config.additive_groups) == 1 and len(config.additive_groups[0]) == sample.d_z:
        return fit_ivqr(sample, q, replace(config, additive_groups=None))
    return fit_ivqr(sample, q, config)


def fit_ivqr_path(
    sample: Sample,
    config: SieveConfig,
    *,
    weights: np.ndarray | None = None,
    warm_fits: list[SieveFit] | None = None,
    design: SieveDesign | None = None,
    include_cqr_start: bool = True,
) -> list[SieveFit]:
    """Fit every grid quantile, warm-starting each fit from its neighbour."""
    if design is None:
        design = SieveDesign(sample, config)
    if warm_fits is not None and len(warm_fits) != config.grid.size:
        raise ValueError("warm_fits must supply one fit per grid point")
    fits: list[SieveFit] = []
    previous = None
    for idx, q in enumerate(config.grid.points):
        warm = [] if previous is None else [previous.coefficients]
        if warm_fits is not None:
            warm.append(warm_fits[idx].coefficients)
        fit = fit_ivqr(
            sample,
            float(q),
            config,
            warm_starts=warm,
            weights=weights,
            design=design,
            include_cqr_start=include_cqr_start or (previous is None and warm_fits is None),
        )
        fits.append(fit)
        previous = fit
    return fits
