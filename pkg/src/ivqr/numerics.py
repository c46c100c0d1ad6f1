"""Quantile grids, B-spline bases, Gram pseudo-inverses and quadratic forms.

Everything in this module is a pure function of its inputs; the returned
objects are immutable and safe to share between threads or processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuantileGrid:
    """Discrete measure on (0, 1) used to integrate per-quantile statistics.

    ``points`` must be strictly increasing and strictly inside (0, 1);
    ``weights`` are the nonnegative masses attached to each point.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid needs at least one point")
        if wts.shape != pts.shape:
            raise ValueError("points and weights must have equal length")
        if np.any(pts <= 0.0) or np.any(pts >= 1.0):
            raise ValueError("grid points must lie strictly inside (0, 1)")
        if np.any(np.diff(pts) <= 0.0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(wts < 0.0):
            raise ValueError("grid weights must be nonnegative")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values) -> float:
        """Weighted sum of one value per grid point."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.points.shape:
            raise ValueError("one value per grid point required")
        return float(self.weights @ values)


def make_uniform_grid(n: int) -> QuantileGrid:
    """Riemann grid {1/N, ..., (N-1)/N} with weight 1/N at every point."""
    n = int(n)
    if n < 2:
        raise ValueError("uniform grid requires N >= 2")
    points = np.arange(1, n) / n
    weights = np.full(n - 1, 1.0 / n)
    return QuantileGrid(points, weights)


def make_random_grid(n: int, seed: int = 0) -> QuantileGrid:
    """Sorted uniform draws on (0, 1), each with weight 1/N (seeded)."""
    n = int(n)
    if n < 1:
        raise ValueError("random grid requires N >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((0x51D, seed)))
    while True:
        pts = np.sort(rng.uniform(0.0, 1.0, size=n))
        if pts[0] > 0.0 and pts[-1] < 1.0 and np.all(np.diff(pts) > 0.0):
            break
    return QuantileGrid(pts, np.full(n, 1.0 / n))


def dirac_grid(q: float) -> QuantileGrid:
    """Point mass at a single quantile."""
    return QuantileGrid(np.array([float(q)]), np.array([1.0]))


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis on a closed interval.

    dimension = degree + 1 + number of interior knots.  Evaluation clamps
    points outside ``domain`` to the nearest endpoint, so the partition of
    unity extends to the whole real line.
    """

    degree: int
    interior_knots: np.ndarray
    domain: tuple[float, float]
    _knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a, b = float(self.domain[0]), float(self.domain[1])
        if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
            raise ValueError("domain must be a nondegenerate finite interval")
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        inner = np.asarray(self.interior_knots, dtype=float)
        if inner.ndim != 1:
            inner = inner.reshape(-1)
        if inner.size and (np.any(np.diff(inner) <= 0.0)
                           or inner[0] <= a or inner[-1] >= b):
            raise ValueError("interior knots must be strictly increasing inside the domain")
        knots = np.concatenate([
            np.full(self.degree + 1, a), inner, np.full(self.degree + 1, b),
        ])
        inner.setflags(write=False)
        knots.setflags(write=False)
        object.__setattr__(self, "interior_knots", inner)
        object.__setattr__(self, "domain", (a, b))
        object.__setattr__(self, "_knots", knots)

    @classmethod
    def uniform(cls, degree: int, n_interior: int, domain=(0.0, 1.0)) -> "BSplineBasis":
        """Equally spaced interior knots on the domain."""
        a, b = float(domain[0]), float(domain[1])
        inner = np.linspace(a, b, n_interior + 2)[1:-1]
        return cls(degree=degree, interior_knots=inner, domain=(a, b))

    @property
    def dimension(self) -> int:
        return self.degree + 1 + self.interior_knots.size

    def evaluate(self, points) -> np.ndarray:
        """Design matrix with one row of basis values per point."""
        x = np.atleast_1d(np.asarray(points, dtype=float))
        if x.ndim == 2 and x.shape[1] != 1:
            raise ValueError("scalar basis cannot evaluate multi-column points")
        x = x.reshape(-1)
        n, p, dim = x.size, self.degree, self.dimension
        t = self._knots
        a, b = self.domain
        xc = np.clip(x, a, b)
        span = np.searchsorted(t, xc, side="right") - 1
        span = np.clip(span, p, dim - 1)
        vals = np.zeros((n, p + 1))
        vals[:, 0] = 1.0
        if p > 0:
            left = np.empty((n, p + 1))
            right = np.empty((n, p + 1))
            for j in range(1, p + 1):
                left[:, j] = xc - t[span + 1 - j]
                right[:, j] = t[span + j] - xc
                saved = np.zeros(n)
                for r in range(j):
                    temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
                    vals[:, r] = saved + right[:, r + 1] * temp
                    saved = left[:, j - r] * temp
                vals[:, j] = saved
        out = np.zeros((n, dim))
        cols = span[:, None] - p + np.arange(p + 1)[None, :]
        np.put_along_axis(out, cols, vals, axis=1)
        return out


@dataclass(frozen=True)
class TensorBSplineBasis:
    """Tensor product of per-coordinate B-spline bases (rows still sum to 1)."""

    marginals: tuple[BSplineBasis, ...]

    def __post_init__(self):
        if not self.marginals:
            raise ValueError("tensor basis requires at least one marginal")
        object.__setattr__(self, "marginals", tuple(self.marginals))

    @property
    def dimension(self) -> int:
        dim = 1
        for m in self.marginals:
            dim *= m.dimension
        return dim

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.shape[1] != len(self.marginals):
            raise ValueError("points must have one column per marginal basis")
        out = np.ones((pts.shape[0], 1))
        for j, marg in enumerate(self.marginals):
            block = marg.evaluate(pts[:, j])
            out = np.einsum("ni,nj->nij", out, block).reshape(pts.shape[0], -1)
        return out


def default_basis(dimension: int, domain=(0.0, 1.0)) -> BSplineBasis:
    """Quadratic B-spline basis of the requested dimension.

    Dimensions 1 and 2 fall back to degree 0 and 1 (constant / linear),
    the only degrees those dimensions admit without interior knots.
    """
    dimension = int(dimension)
    if dimension < 1:
        raise ValueError("basis dimension must be >= 1")
    degree = min(2, dimension - 1)
    return BSplineBasis.uniform(degree, dimension - degree - 1, domain)


def basis_from_data(x, dimension: int) -> BSplineBasis:
    """Basis on the empirical range of the data, equally spaced knots."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot build a basis from empty data")
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return default_basis(dimension, (lo, hi))


def eval_basis(basis, x) -> np.ndarray:
    """Basis vector at a single point (clamped to the basis domain)."""
    return basis.evaluate(np.atleast_1d(x))[0]


def design_matrix(basis, points) -> np.ndarray:
    """Stack of basis vectors, one row per evaluation point."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("design matrix requires at least one point")
    return basis.evaluate(pts)


@dataclass(frozen=True)
class SymmetricPseudoInverse:
    """Eigen-truncated generalized inverse of a symmetric PSD matrix.

    ``half`` satisfies half @ half.T == matrix, so quadratic forms can be
    computed as exactly nonnegative squared norms.
    """

    matrix: np.ndarray
    source: np.ndarray
    tol: float
    rank: int
    half: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def pinv_gram(gram, tol: float = 1e-10) -> SymmetricPseudoInverse:
    """Generalized inverse via symmetric eigendecomposition.

    Eigenvalues at or below ``tol`` times the largest eigenvalue are mapped
    to zero instead of inverted.
    """
    g = np.asarray(gram, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("gram matrix must be square")
    scale = max(1.0, float(np.max(np.abs(g))) if g.size else 0.0)
    if float(np.max(np.abs(g - g.T))) > 1e-10 * scale:
        raise ValueError("gram matrix must be symmetric")
    sym = 0.5 * (g + g.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    top = float(eigvals[-1]) if eigvals.size else 0.0
    if top <= 0.0:
        keep = np.zeros(eigvals.shape, dtype=bool)
    else:
        keep = eigvals > tol * top
    inv = np.zeros_like(eigvals)
    inv[keep] = 1.0 / eigvals[keep]
    matrix = (eigvecs * inv) @ eigvecs.T
    half = eigvecs[:, keep] / np.sqrt(eigvals[keep])
    matrix.setflags(write=False)
    half.setflags(write=False)
    return SymmetricPseudoInverse(
        matrix=matrix, source=g, tol=float(tol), rank=int(keep.sum()), half=half,
    )


def quad_form(v, pinv: SymmetricPseudoInverse) -> float:
    """v' A^- v for a vector and a Gram pseudo-inverse; always >= 0."""
    vec = np.asarray(v, dtype=float).reshape(-1)
    if vec.size != pinv.dimension:
        raise ValueError(
            f"vector length {vec.size} does not match matrix dimension {pinv.dimension}"
        )
    u = pinv.half.T @ vec
    return float(u @ u)
