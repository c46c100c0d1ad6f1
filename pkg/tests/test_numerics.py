"""Grid, basis and pseudo-inverse contracts.

Expected values are either forced analytically (identity matrices,
constant bases) or computed from closed-form sums stated in each test.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ivqr.numerics import (
    BSplineBasis,
    QuantileGrid,
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


class TestQuantileGrid:
    def test_uniform_grid_n20(self):
        grid = make_uniform_grid(20)
        assert grid.size == 19
        np.testing.assert_allclose(grid.points, np.arange(1, 20) / 20)
        np.testing.assert_allclose(grid.weights, 0.05)

    def test_smallest_legal_grid(self):
        grid = make_uniform_grid(2)
        np.testing.assert_allclose(grid.points, [0.5])
        np.testing.assert_allclose(grid.weights, [0.5])

    def test_rejects_n_below_two(self):
        with pytest.raises(ValueError):
            make_uniform_grid(1)

    def test_integral_of_q_one_minus_q_n20(self):
        # closed form: sum_{i=1}^{19} i(20-i)/20^3 = 1330/8000
        grid = make_uniform_grid(20)
        value = grid.integrate(grid.points * (1 - grid.points))
        assert value == pytest.approx(1330 / 8000, abs=1e-15)
        assert abs(value - 1 / 6) == pytest.approx(4.1667e-4, rel=1e-3)

    def test_integral_converges_to_one_sixth(self):
        grid = make_uniform_grid(200)
        value = grid.integrate(grid.points * (1 - grid.points))
        assert abs(value - 1 / 6) < 5e-6

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            QuantileGrid(np.array([0.2, 0.2]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            QuantileGrid(np.array([0.0, 0.5]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            QuantileGrid(np.array([0.5]), np.array([-1.0]))
        with pytest.raises(ValueError):
            QuantileGrid(np.array([]), np.array([]))

    def test_dirac_grid(self):
        grid = dirac_grid(0.25)
        assert grid.size == 1
        assert grid.total_mass == 1.0

    def test_random_grid_is_seeded(self):
        g1 = make_random_grid(20, seed=7)
        g2 = make_random_grid(20, seed=7)
        np.testing.assert_array_equal(g1.points, g2.points)
        assert g1.size == 20
        assert np.all(np.diff(g1.points) > 0)


class TestBSplineBasis:
    def test_constant_basis(self):
        basis = default_basis(1)
        assert basis.dimension == 1
        for x in (0.0, 0.3, 1.0, -2.0):
            np.testing.assert_allclose(eval_basis(basis, x), [1.0])

    def test_paper_dimensions(self):
        # quadratic splines: 1 knot -> 4, 17 knots -> 20, 27 knots -> 30
        assert BSplineBasis.uniform(2, 1).dimension == 4
        assert BSplineBasis.uniform(2, 17).dimension == 20
        assert BSplineBasis.uniform(2, 27).dimension == 30
        assert default_basis(20).degree == 2
        assert default_basis(20).interior_knots.size == 17

    def test_partition_of_unity_random_points(self):
        basis = default_basis(20)
        x = np.random.default_rng(42).uniform(0, 1, 100)
        values = basis.evaluate(x)
        np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(values >= 0)

    @given(
        dim=st.integers(min_value=1, max_value=25),
        x=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_partition_of_unity_property(self, dim, x):
        vec = eval_basis(default_basis(dim), x)
        assert vec.size == dim
        assert abs(vec.sum() - 1.0) < 1e-12
        assert np.all(vec >= 0)

    def test_out_of_domain_clamps(self):
        basis = default_basis(6, domain=(0.0, 2.0))
        np.testing.assert_array_equal(eval_basis(basis, -3.0), eval_basis(basis, 0.0))
        np.testing.assert_array_equal(eval_basis(basis, 5.0), eval_basis(basis, 2.0))

    def test_basis_from_data_uses_empirical_range(self):
        x = np.array([-1.5, 0.2, 3.0])
        basis = basis_from_data(x, 5)
        assert basis.domain == (-1.5, 3.0)
        basis = basis_from_data(np.array([2.0, 2.0]), 3)
        assert basis.domain[0] < 2.0 < basis.domain[1]


class TestDesignMatrix:
    def test_constant_basis_three_points(self):
        out = design_matrix(default_basis(1), [0.1, 0.5, 0.9])
        np.testing.assert_array_equal(out, np.ones((3, 1)))

    def test_row_sums_are_one(self):
        basis = default_basis(12, domain=(-1.0, 4.0))
        pts = np.random.default_rng(3).uniform(-1, 4, 200)
        out = design_matrix(basis, pts)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_table_one_shape(self):
        pts = np.random.default_rng(4).uniform(0, 1, 500)
        assert design_matrix(default_basis(20), pts).shape == (500, 20)

    def test_empty_points_rejected(self):
        with pytest.raises(ValueError):
            design_matrix(default_basis(3), [])

    def test_tensor_rows_sum_to_one(self):
        tensor = TensorBSplineBasis((default_basis(3), default_basis(4)))
        assert tensor.dimension == 12
        pts = np.random.default_rng(5).uniform(0, 1, (60, 2))
        out = tensor.evaluate(pts)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(out >= 0)


class TestPinvGram:
    def test_identity(self):
        pinv = pinv_gram(np.eye(3))
        np.testing.assert_allclose(pinv.matrix, np.eye(3), atol=1e-14)
        assert pinv.rank == 3

    def test_diagonal_with_zero(self):
        pinv = pinv_gram(np.diag([2.0, 0.0]))
        np.testing.assert_allclose(pinv.matrix, np.diag([0.5, 0.0]), atol=1e-14)

    def test_rank_deficient_design_gram(self):
        rng = np.random.default_rng(11)
        design = rng.normal(size=(40, 6))
        design[:, 5] = design[:, 2]  # duplicated column
        gram = design.T @ design
        pinv = pinv_gram(gram)
        residual = gram @ pinv.matrix @ gram - gram
        assert np.abs(residual).max() <= 1e-8 * np.abs(gram).max()
        assert pinv.rank == 5

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            pinv_gram(np.array([[1.0, 0.5], [0.0, 1.0]]))

    @pytest.mark.parametrize("seed", range(10))
    def test_pseudoinverse_identities_random_psd(self, seed):
        rng = np.random.default_rng(seed)
        dim = rng.integers(2, 51)
        rank = rng.integers(1, dim + 1)
        b = rng.normal(size=(dim, rank))
        gram = b @ b.T
        pinv = pinv_gram(gram)
        scale = np.abs(gram).max()
        assert np.abs(gram @ pinv.matrix @ gram - gram).max() <= 1e-8 * scale
        p = pinv.matrix
        assert np.abs(p @ gram @ p - p).max() <= 1e-8 * max(np.abs(p).max(), 1.0)


class TestQuadForm:
    def test_zero_vector(self):
        pinv = pinv_gram(np.eye(4))
        assert quad_form(np.zeros(4), pinv) == 0.0

    def test_identity_unit_vector(self):
        pinv = pinv_gram(np.eye(2))
        assert quad_form(np.array([1.0, 0.0]), pinv) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            quad_form(np.ones(3), pinv_gram(np.eye(2)))

    @pytest.mark.parametrize("seed", range(5))
    def test_nonnegative_and_matches_eigen_expansion(self, seed):
        rng = np.random.default_rng(100 + seed)
        b = rng.normal(size=(20, 7))
        gram = b.T @ b
        pinv = pinv_gram(gram)
        v = rng.normal(size=7)
        value = quad_form(v, pinv)
        assert value >= 0.0
        # independent route: eigen-expansion of the quadratic form
        eigvals, eigvecs = np.linalg.eigh(0.5 * (gram + gram.T))
        keep = eigvals > 1e-10 * eigvals[-1]
        coords = eigvecs.T @ v
        expected = float(np.sum(coords[keep] ** 2 / eigvals[keep]))
        assert value == pytest.approx(expected, rel=1e-10)
