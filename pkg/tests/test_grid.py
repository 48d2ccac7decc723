import numpy as np
import pytest

from cflow.exceptions import FieldError
from cflow.grid.field import Field
from cflow.grid.lattice import Grid4
from cflow.maps.samples import fourier_mode, random_smooth_field


def test_grid_rejects_bad_dims():
    with pytest.raises(FieldError):
        Grid4((8, 8, 8, 7))
    with pytest.raises(FieldError):
        Grid4((6, 8, 8, 8))
    with pytest.raises(FieldError):
        Grid4((8, 8, 8, 8), (1.0, 1.0, 0.0, 1.0))


def test_diff_of_constant_and_linear_mode():
    # setup
    # -------------------------------------------------------------------------
    grid = Grid4((16, 8, 8, 8))
    h    = grid.spacing[0]
    f    = np.sin(2 * np.pi * grid.coordinate(0)) * np.ones(grid.dims)

    # constants are annihilated, a mode is scaled by its discrete symbol
    # -------------------------------------------------------------------------
    assert np.max(np.abs(grid.diff(np.full(grid.dims, 3.0), 2))) == 0.0

    expected = np.sin(2 * np.pi * h) / h * np.cos(2 * np.pi * grid.coordinate(0))
    assert np.allclose(grid.diff(f, 0), expected, atol=1e-12)

    expected2 = -(np.sin(2 * np.pi * h) / h) ** 2 * f
    assert np.allclose(grid.diff(f, 0, order=2), expected2, atol=1e-10)


def test_diff_bad_arguments():
    grid = Grid4((8, 8, 8, 8))
    f = np.zeros(grid.dims)
    with pytest.raises(FieldError):
        grid.diff(f, 4)
    with pytest.raises(FieldError):
        grid.diff(f, 0, order=3)
    g = f.copy()
    g[0, 0, 0, 0] = np.nan
    with pytest.raises(FieldError):
        grid.diff(g, 0)


def test_diff_converges_at_second_order():
    errors = []
    for n in (16, 32):
        grid = Grid4((n, 8, 8, 8))
        x = grid.coordinate(0)
        f = np.exp(0.3 * np.sin(2 * np.pi * x)) * np.ones(grid.dims)
        exact = 0.3 * 2 * np.pi * np.cos(2 * np.pi * x) * f
        errors.append(np.max(np.abs(grid.diff(f, 0) - exact)))
    order = np.log2(errors[0] / errors[1])
    assert order >= 1.9


def test_translation_commutes_with_diff():
    grid = Grid4((8, 10, 8, 8))
    f = random_smooth_field(grid, 1, np.random.default_rng(3), axes=None)[..., 0]
    for axis in range(4):
        a = grid.diff(np.roll(f, 1, axis=2), axis)
        b = np.roll(grid.diff(f, axis), 1, axis=2)
        assert np.max(np.abs(a - b)) == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_discrete_divergence_theorem(seed):
    grid = Grid4((8, 8, 10, 8), (1.0, 2.0, 1.0, 0.5))
    f = random_smooth_field(grid, 1, np.random.default_rng(seed), axes=None)[..., 0]
    one = np.ones(grid.dims)
    scale = grid.integrate(np.abs(f), one) / grid.h_min
    for axis in range(4):
        assert abs(grid.integrate(grid.diff(f, axis), one)) <= 1e-10 * scale


def test_integrate_examples():
    # setup
    # -------------------------------------------------------------------------
    grid = Grid4((16, 8, 8, 8))
    one  = np.ones(grid.dims)

    # unit volume, constant conformal factor, band-limited integrand
    # -------------------------------------------------------------------------
    assert grid.integrate(one, one) == pytest.approx(1.0, abs=1e-14)

    phi = 0.1
    assert grid.integrate(one, np.full(grid.dims, np.exp(4 * phi))) == pytest.approx(np.exp(4 * phi), abs=1e-12)

    f = np.sin(2 * np.pi * grid.coordinate(0)) ** 2 * one
    assert grid.integrate(f, one) == pytest.approx(0.5, abs=1e-12)


def test_integrate_rejects_nonpositive_volume():
    grid = Grid4((8, 8, 8, 8))
    vol = np.ones(grid.dims)
    vol[1, 2, 3, 4] = 0.0
    with pytest.raises(FieldError):
        grid.integrate(np.ones(grid.dims), vol)


# --------------------------------------------------------------------------- #
#  spectral solve                                                             #
# --------------------------------------------------------------------------- #
def test_spectral_solve_constant_and_identity_limit():
    grid = Grid4((8, 8, 8, 8))
    rhs = np.full(grid.dims + (2,), 1.7)
    assert np.allclose(grid.spectral_solve_bilaplacian(rhs, 0.3), 1.7, atol=1e-14)

    f = random_smooth_field(grid, 2, np.random.default_rng(5), axes=None)
    assert np.array_equal(grid.spectral_solve_bilaplacian(f, 0.0), f)


def test_spectral_solve_single_mode():
    grid  = Grid4((16, 8, 8, 8))
    alpha = 1e-3
    f     = fourier_mode(grid, (1, 0, 0, 0), 0.4)
    lam   = np.sin(2 * np.pi / 16) ** 2 / grid.spacing[0] ** 2
    w     = grid.spectral_solve_bilaplacian(f, alpha)
    assert np.allclose(w, f / (1 + alpha * lam ** 2), atol=1e-12)


def test_spectral_solve_matches_dense_solve():
    # setup: dense (Id + alpha Δ₀²) on 8⁴ built column by column
    # -------------------------------------------------------------------------
    grid  = Grid4((8, 8, 8, 8), (1.0, 1.5, 1.0, 2.0))
    alpha = 2e-4
    n     = grid.n_nodes
    rng   = np.random.default_rng(11)
    rhs   = rng.normal(size=grid.dims)

    A = np.empty((n, n))
    e = np.zeros(n)
    for k in range(n):
        e[:] = 0.0
        e[k] = 1.0
        col = e.reshape(grid.dims)
        A[:, k] = (col + alpha * grid.bilaplacian0(col)).ravel()

    # compare
    # -------------------------------------------------------------------------
    dense    = np.linalg.solve(A, rhs.ravel()).reshape(grid.dims)
    spectral = grid.spectral_solve_bilaplacian(rhs, alpha)
    assert np.max(np.abs(dense - spectral)) <= 1e-10 * np.max(np.abs(dense))

    res = spectral + alpha * grid.bilaplacian0(spectral) - rhs
    assert np.max(np.abs(res)) <= 1e-10 * np.max(np.abs(rhs))


def test_spectral_solve_errors():
    grid = Grid4((8, 8, 8, 8))
    with pytest.raises(FieldError):
        grid.spectral_solve_bilaplacian(np.zeros(grid.dims), -1.0)
    with pytest.raises(FieldError):
        grid.spectral_solve_bilaplacian(np.zeros((8, 8, 8, 8, 0)), 1.0)


def test_field_is_read_only_and_rank_checked():
    grid = Grid4((8, 8, 8, 8))
    f = Field(grid, "vector", np.zeros(grid.dims + (4,)))
    with pytest.raises(ValueError):
        f.values[0, 0, 0, 0, 0] = 1.0
    with pytest.raises(FieldError):
        Field(grid, "sym2", np.zeros(grid.dims + (4,)))
    with pytest.raises(FieldError):
        Field(grid, "tensor9", np.zeros(grid.dims))
