import numpy as np
import pytest

from nbeatsx.basis import (exogenous_basis, harmonic_basis, identity_basis,
                           time_grid, trend_basis)
from nbeatsx.errors import DataValidationError


def test_forecast_grid_normalized_by_horizon():
    grid = time_grid("forecast", 168, 24)
    assert np.array_equal(grid, np.arange(24) / 24)


def test_backcast_grid_extends_left_of_origin():
    grid = time_grid("backcast", 168, 24)
    assert len(grid) == 168
    assert grid[0] == -7.0
    assert grid[-1] == pytest.approx(-1 / 24)


def test_single_point_horizon():
    assert np.array_equal(time_grid("forecast", 1, 1), [0.0])


def test_grids_continuous_across_boundary():
    back = time_grid("backcast", 48, 24)
    fore = time_grid("forecast", 48, 24)
    combined = np.concatenate([back, fore])
    assert np.allclose(np.diff(combined), 1 / 24)


def test_trend_shape_and_constant_column():
    b = trend_basis(time_grid("forecast", 168, 24), 2)
    assert b.matrix.shape == (24, 3)
    assert np.array_equal(b.matrix[:, 0], np.ones(24))


def test_trend_degenerate_polynomial():
    b = trend_basis(time_grid("forecast", 24, 24), 0)
    assert b.matrix.shape == (24, 1)


def test_trend_entry_value():
    grid = time_grid("forecast", 168, 24)
    b = trend_basis(grid, 2)
    assert b.matrix[12, 2] == pytest.approx(0.25)  # (12/24)^2


def test_harmonic_shape_24():
    b = harmonic_basis(time_grid("forecast", 168, 24), 24, 1)
    assert b.matrix.shape == (24, 23)


def test_harmonic_backcast_keeps_forecast_column_count():
    b = harmonic_basis(time_grid("backcast", 168, 24), 24, 1)
    assert b.matrix.shape == (168, 23)


def test_harmonic_phase_at_origin():
    m = harmonic_basis(time_grid("forecast", 24, 24), 24, 1).matrix
    n_pairs = 11
    assert m[0, 1] == pytest.approx(1.0)            # first cos column
    assert m[0, 1 + n_pairs] == pytest.approx(0.0)  # first sin column


def test_harmonic_near_orthogonality():
    m = harmonic_basis(time_grid("forecast", 24, 24), 24, 1).matrix
    gram = m.T @ m
    n_pairs = 11
    for i in range(1, 1 + n_pairs):
        for j in range(1 + n_pairs, m.shape[1]):
            assert abs(gram[i, j]) / np.sqrt(gram[i, i] * gram[j, j]) < 1e-8


def test_exogenous_basis_is_the_window():
    x = np.random.default_rng(0).normal(size=(24, 2))
    b = exogenous_basis(x)
    assert np.array_equal(b.matrix, x)


def test_exogenous_constant_regressor_gives_level():
    b = exogenous_basis(np.ones((24, 1)))
    out = b.matrix @ np.array([3.5])
    assert np.allclose(out, 3.5)


def test_exogenous_one_hot_selects_column():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(24, 3))
    out = exogenous_basis(x).matrix @ np.array([0.0, 1.0, 0.0])
    assert np.array_equal(out, x[:, 1])


def test_exogenous_least_squares_recovers_coefficients():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(200, 2))
    y = 2.0 * x[:, 0] - 1.0 * x[:, 1]
    basis = exogenous_basis(x).matrix
    # normal-equations oracle
    theta = np.linalg.solve(basis.T @ basis, basis.T @ y)
    assert np.allclose(theta, [2.0, -1.0], atol=1e-8)


def test_exogenous_rejects_nan():
    x = np.ones((4, 1))
    x[2, 0] = np.nan
    with pytest.raises(DataValidationError):
        exogenous_basis(x)


def test_identity_basis():
    b = identity_basis(24)
    assert np.array_equal(b.matrix, np.eye(24))
    theta = np.random.default_rng(3).normal(size=24)
    assert np.array_equal(b.matrix @ theta, theta)
    assert np.array_equal(b.matrix @ np.zeros(24), np.zeros(24))


@pytest.mark.parametrize("L,H,n_pol,n_hr", [
    (168, 24, 2, 1), (168, 24, 3, 2), (168, 24, 4, 1), (168, 168, 2, 1),
])
def test_shapes_across_hyperparameter_space(L, H, n_pol, n_hr):
    for span, length in (("backcast", L), ("forecast", H)):
        grid = time_grid(span, L, H)
        assert trend_basis(grid, n_pol, span).matrix.shape == (length, n_pol + 1)
        assert harmonic_basis(grid, H, n_hr, span).matrix.shape == (length, H - 1)


def test_bases_are_pure_functions():
    a = harmonic_basis(time_grid("forecast", 24, 24), 24, 2).matrix
    b = harmonic_basis(time_grid("forecast", 24, 24), 24, 2).matrix
    assert np.array_equal(a, b)
