import math

import numpy as np
import pytest
from pydantic import ValidationError

from krl.errors import ConfigError, DimensionMismatch, NegativeEntry
from krl.instances import (GridFunction, GridSpec, HardySobolevSpec, PLaplaceSpec, PucciSpec, best_constant,
                           build_hardy_sobolev_operator, build_matrix_operator, build_operator,
                           build_plaplace_operator, build_pucci_operator, hardy_sobolev_dirichlet_solve,
                           load_matrix, plaplace_dirichlet_solve, pucci_dirichlet_solve, radial_plaplace_solve)
from krl.instances.newton import minimize_energy
from krl.instances.plaplace import face_differences, phi
from krl.instances.pucci import pucci, second_difference
from krl.solver import continuation


def plaplace_eigenvalue(p):
    """First Dirichlet eigenvalue of the 1D p-Laplacian on (0, 1)."""
    pi_p = 2.0 * math.pi / (p * math.sin(math.pi / p))
    return (p - 1.0) * pi_p ** p


def ones(grid):
    return GridFunction(np.ones(grid.n), grid)


# --- grid ---

def test_grid_spacing_and_nodes():
    grid = GridSpec(n=3)
    assert grid.h == 0.25
    np.testing.assert_allclose(grid.nodes(), [0.25, 0.5, 0.75])
    assert GridSpec(n=4, interval=(0.0, 2.0)).h == pytest.approx(0.4)


def test_grid_validation():
    with pytest.raises(ValidationError):
        GridSpec(n=2)
    with pytest.raises(ValidationError):
        GridSpec(n=5, interval=(1.0, 0.0))


def test_grid_function_length_is_checked(small_grid):
    with pytest.raises(DimensionMismatch):
        GridFunction(np.ones(small_grid.n + 1), small_grid)


def test_grid_function_shapes(small_grid):
    hat = GridFunction.hat(small_grid)
    assert hat.values.max() == pytest.approx(1.0)
    assert np.all(hat.values > 0)
    bump = GridFunction.bump(small_grid)
    assert np.all(bump.values >= 0)
    assert bump.values[0] == 0.0
    assert hat.with_boundary().shape == (small_grid.n + 2,)


# --- matrix ---

def test_matrix_rejects_negative_entry():
    with pytest.raises(NegativeEntry) as info:
        build_matrix_operator([[1.0, -0.5], [0.0, 1.0]])
    assert info.value.details["row"] == 0
    assert info.value.details["col"] == 1
    assert info.value.exit_code == 2


def test_matrix_must_be_square():
    with pytest.raises(ConfigError):
        build_matrix_operator([[1.0, 2.0, 3.0]])


def test_load_matrix(tmp_path):
    path = tmp_path / "A.txt"
    path.write_text("# 2x2\n2, 1\n1 2\n", encoding="utf-8")
    np.testing.assert_array_equal(load_matrix(str(path)), [[2.0, 1.0], [1.0, 2.0]])
    with pytest.raises(ConfigError):
        load_matrix(str(tmp_path / "missing.txt"))


def test_build_operator_dispatches(small_grid):
    assert build_operator(np.eye(2)).label == "matrix"
    assert build_operator(PLaplaceSpec(p=3.0, grid=small_grid)).eigenvalue_power == 2.0
    assert build_operator(PucciSpec(grid=small_grid)).eigenvalue_power == 1.0


# --- damped Newton ---

def quadratic(diag, b):
    def energy(v):
        return 0.5 * float(v @ (diag * v)) - float(b @ v)

    def gradient(v):
        return diag * v - b

    return energy, gradient


def test_newton_solves_quadratic_in_one_step():
    diag, b = np.array([2.0, 3.0, 4.0]), np.array([1.0, 1.0, 1.0])
    energy, gradient = quadratic(diag, b)

    def hessians(v):
        ab = np.zeros((2, 3))
        ab[1] = diag
        yield ab

    result = minimize_energy(energy, gradient, hessians, np.zeros(3), gtol=1e-14, accept_tol=1e-10)
    np.testing.assert_allclose(result.v, b / diag, rtol=1e-14)
    assert result.iterations == 1
    assert not result.fallback


def test_newton_uses_gradient_when_no_band_factors():
    diag, b = np.full(3, 2.0), np.array([1.0, -2.0, 3.0])
    energy, gradient = quadratic(diag, b)

    def hessians(v):
        ab = np.zeros((2, 3))
        ab[1] = -1.0
        yield ab

    result = minimize_energy(energy, gradient, hessians, np.zeros(3), gtol=1e-14, accept_tol=1e-10)
    np.testing.assert_allclose(result.v, b / 2.0, atol=1e-14)


# --- p-Laplacian ---

def test_plaplace_p2_is_exact_for_quadratics():
    grid = GridSpec(n=99)
    v = plaplace_dirichlet_solve(PLaplaceSpec(p=2.0, grid=grid), ones(grid)).values
    x = grid.nodes()
    np.testing.assert_allclose(v, x * (1.0 - x) / 2.0, atol=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_plaplace_solve_balances_fluxes(p, small_grid):
    g = GridFunction.bump(small_grid).values + 0.1
    v = plaplace_dirichlet_solve(PLaplaceSpec(p=p, grid=small_grid), GridFunction(g, small_grid)).values
    flux = phi(face_differences(v, small_grid.h), p)
    balance = flux[:-1] - flux[1:]
    np.testing.assert_allclose(balance, small_grid.h * g, rtol=1e-7, atol=1e-12)
    assert np.all(v > 0)


def test_plaplace_solve_of_zero_data(small_grid):
    v = plaplace_dirichlet_solve(PLaplaceSpec(p=3.0, grid=small_grid), GridFunction(np.zeros(49), small_grid))
    np.testing.assert_array_equal(v.values, np.zeros(49))


def test_plaplace_operator_is_homogeneous_and_monotone(plaplace3, small_grid):
    f = GridFunction.hat(small_grid).values
    np.testing.assert_allclose(plaplace3(3.0 * f), 3.0 * plaplace3(f), rtol=1e-9)
    bigger = plaplace3(f + GridFunction.bump(small_grid).values)
    assert np.all(bigger >= plaplace3(f) - 1e-12)


def test_plaplace_needs_p_above_one():
    with pytest.raises(ValidationError):
        PLaplaceSpec(p=1.0)


def test_plaplace_p2_eigenvalue():
    T = build_plaplace_operator(PLaplaceSpec(p=2.0, grid=GridSpec(n=199)))
    pair, _ = continuation(T)
    assert pair.pde_eigenvalue == pytest.approx(math.pi ** 2, rel=1e-2)
    assert np.argmax(pair.x) in (99, 100)


@pytest.mark.slow
@pytest.mark.parametrize("p", [1.5, 3.0])
def test_plaplace_eigenvalue_matches_closed_form(p):
    T = build_plaplace_operator(PLaplaceSpec(p=p, grid=GridSpec(n=199)))
    pair, _ = continuation(T)
    assert pair.pde_eigenvalue == pytest.approx(plaplace_eigenvalue(p), rel=1e-2)


# --- Hardy-Sobolev ---

def test_best_constant():
    assert best_constant(2.0, 3) == pytest.approx(0.25)
    assert best_constant(1.5, 2) == pytest.approx((1.0 / 3.0) ** 1.5)


def test_hardy_mu_must_be_below_best_constant():
    with pytest.raises(ConfigError, match="best constant"):
        HardySobolevSpec(p=2.0, n_dim=3, mu=0.25)
    with pytest.raises(ConfigError):
        HardySobolevSpec(p=3.0, n_dim=3)


def test_hardy_grid_starts_at_origin():
    with pytest.raises(ValueError):
        HardySobolevSpec(p=2.0, grid=GridSpec(n=9, interval=(0.5, 1.0)))


def test_hardy_mu_zero_matches_radial_solve():
    grid = GridSpec(n=99)
    spec = HardySobolevSpec(p=3.0 / 2.0, n_dim=3, grid=grid)
    g = GridFunction.hat(grid)
    np.testing.assert_allclose(hardy_sobolev_dirichlet_solve(spec, g).values,
                               radial_plaplace_solve(1.5, 3, grid, g).values, atol=1e-10)


def test_hardy_poisson_on_the_ball():
    grid = GridSpec(n=99)
    v = hardy_sobolev_dirichlet_solve(HardySobolevSpec(p=2.0, n_dim=3, grid=grid), ones(grid)).values
    r = grid.nodes()
    np.testing.assert_allclose(v, (1.0 - r ** 2) / 6.0, atol=1e-3)


def test_hardy_solution_grows_with_mu():
    grid = GridSpec(n=99)
    solutions = [hardy_sobolev_dirichlet_solve(HardySobolevSpec(p=2.0, n_dim=3, mu=mu, grid=grid), ones(grid)).values
                 for mu in (0.0, 0.05, 0.1)]
    assert np.all(solutions[1] >= solutions[0] - 1e-12)
    assert np.all(solutions[2] >= solutions[1] - 1e-12)
    assert solutions[2][0] > solutions[0][0]


@pytest.mark.parametrize("j", [0, 24, 47])
def test_hardy_small_p_solution_balances_the_flux(j):
    grid = GridSpec(n=49)
    spec = HardySobolevSpec(p=1.5, mu=0.5, grid=grid)
    g = GridFunction(np.eye(grid.n)[j], grid)
    v = hardy_sobolev_dirichlet_solve(spec, g).values
    # L_0 v = g + mu r^{-p} phi(v) at the solution
    rhs = GridFunction(g.values + spec.mu / grid.nodes() ** 1.5 * phi(v, 1.5), grid)
    np.testing.assert_allclose(radial_plaplace_solve(1.5, 3, grid, rhs).values, v,
                               rtol=1e-9, atol=1e-12 * np.max(v))
    assert np.all(v >= radial_plaplace_solve(1.5, 3, grid, g).values)


def test_hardy_weight_is_positive():
    spec = HardySobolevSpec(p=2.0, v_scale=2.0, v_decay=1.0)
    w = spec.weight(np.linspace(0.0, 1.0, 5))
    assert w[0] == 2.0
    assert np.all(np.diff(w) < 0)


@pytest.mark.slow
def test_hardy_p2_eigenvalue_is_first_ball_eigenvalue():
    T = build_hardy_sobolev_operator(HardySobolevSpec(p=2.0, n_dim=3, grid=GridSpec(n=99)))
    pair, _ = continuation(T)
    assert pair.pde_eigenvalue == pytest.approx(math.pi ** 2, rel=1e-2)


# --- Pucci ---

def test_pucci_variant_aliases():
    assert PucciSpec(variant="M-").variant == "minus"
    assert PucciSpec(variant="+").variant == "plus"


def test_pucci_ellipticity_order():
    with pytest.raises(ConfigError):
        PucciSpec(lambda_p=2.0, big_lambda=1.0)


def test_pucci_pointwise():
    spec = PucciSpec(lambda_p=1.0, big_lambda=2.0)
    np.testing.assert_array_equal(pucci(spec, np.array([-1.0, 1.0])), [-1.0, 2.0])
    minus = PucciSpec(lambda_p=1.0, big_lambda=2.0, variant="minus")
    np.testing.assert_array_equal(pucci(minus, np.array([-1.0, 1.0])), [-2.0, 1.0])


@pytest.mark.parametrize("variant,active", [("plus", 1.0), ("minus", 2.0)])
def test_pucci_constant_data_gives_concave_parabola(variant, active):
    grid = GridSpec(n=99)
    spec = PucciSpec(lambda_p=1.0, big_lambda=2.0, variant=variant, grid=grid)
    v = pucci_dirichlet_solve(spec, ones(grid)).values
    x = grid.nodes()
    np.testing.assert_allclose(v, x * (1.0 - x) / (2.0 * active), rtol=1e-10)


def test_pucci_sign_changing_data():
    grid = GridSpec(n=99)
    spec = PucciSpec(lambda_p=1.0, big_lambda=3.0, grid=grid)
    f = np.sin(2.0 * np.pi * grid.nodes())
    v = pucci_dirichlet_solve(spec, GridFunction(f, grid)).values
    np.testing.assert_allclose(-pucci(spec, second_difference(v, grid.h)), f, atol=1e-8)


def test_pucci_operator_is_homogeneous(small_grid):
    T = build_pucci_operator(PucciSpec(lambda_p=0.5, big_lambda=2.0, grid=small_grid))
    f = GridFunction.bump(small_grid).values
    np.testing.assert_allclose(T(2.5 * f), 2.5 * T(f), rtol=1e-10)


@pytest.mark.parametrize("variant,expected", [("plus", math.pi ** 2), ("minus", 2.0 * math.pi ** 2)])
def test_pucci_eigenvalue(variant, expected):
    T = build_pucci_operator(PucciSpec(lambda_p=1.0, big_lambda=2.0, variant=variant, grid=GridSpec(n=99)))
    pair, _ = continuation(T)
    assert pair.pde_eigenvalue == pytest.approx(expected, rel=1e-2)
