import logging
import math

import numpy as np
import pytest

from ensemble_sim import midpoint_quantiles
from errors import DomainError, InfeasibleAlpha, SingularGram
from models import ModelSpec
from rs_core import rs_constants
from spectral_law import Gaussian, PointMass, Rademacher, Semicircle, transform_cache
from state_evolution import amp_denoiser, run_state_evolution
from variational import (
    concavity_probe,
    dv_decay,
    f2_func,
    f2_func_grad,
    f_func,
    f_func_prime,
    f_weight_sup,
    gradcheck,
    gradcheck_components,
    h2_func,
    h2_func_grad,
    h_func,
    h_func_grad,
    hciz_mc,
    hciz_rank1,
    hciz_rank2,
    inf_gamma_closed,
    inf_gamma_matrix,
    inf_gamma_matrix_detailed,
    inf_gamma_matrix_numeric,
    inf_gamma_minimizer,
    inf_gamma_numeric,
    phi1_objective,
    phi1_stationary,
    phi2_objective,
    phi2_stationary,
    sample_joint_law,
    schur_complement,
    symmetric_sqrt,
)
from variational.phi import phi1_star_point, phi2_star_point

LAWS = [Semicircle(), Rademacher()]


@pytest.fixture(scope="module")
def stationary_setup():
    model = ModelSpec(0.1, Rademacher(), PointMass(0.3))
    constants = rs_constants(model)
    se_state = run_state_evolution(constants, model.field, 6)
    return model, constants, se_state


# --- 𝓗 and inf_γ ----------------------------------------------------------------

@pytest.mark.parametrize("law", LAWS)
@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.85])
def test_inf_gamma_closed_form(law, alpha):
    transforms = transform_cache(law)
    numeric = inf_gamma_numeric(alpha, transforms)
    np.testing.assert_allclose(numeric.value, inf_gamma_closed(alpha, transforms), atol=1e-8)
    np.testing.assert_allclose(numeric.x, inf_gamma_minimizer(alpha, transforms), atol=1e-6)
    np.testing.assert_allclose(h_func(inf_gamma_minimizer(alpha, law), alpha, law),
                               transforms.integral_r(alpha), atol=1e-10)


def test_h_func_gradient():
    law = transform_cache(Semicircle())
    report = gradcheck(lambda x: h_func(x[0], x[1], law), lambda x: np.array(h_func_grad(x[0], x[1], law)),
                       np.array([2.7, 0.4]))
    assert report.passed


def test_h_func_domain():
    with pytest.raises(DomainError):
        h_func(1.5, 0.5, Semicircle())
    with pytest.raises(DomainError):
        h_func(2.5, 0.0, Semicircle())
    with pytest.raises(DomainError):
        inf_gamma_closed(1.2, Semicircle())


@pytest.mark.parametrize("law", LAWS)
def test_inf_gamma_matrix(law):
    transforms = transform_cache(law)
    matrix = np.array([[0.5, 0.1], [0.1, 0.3]])
    detailed = inf_gamma_matrix_detailed(matrix, transforms)
    numeric = inf_gamma_matrix_numeric(matrix, transforms)
    np.testing.assert_allclose(numeric["value"], detailed["value"], atol=1e-6)
    gamma, nu, rho = numeric["theta"]
    np.testing.assert_allclose([[gamma, nu], [nu, rho]], detailed["minimizer"], atol=1e-5)
    diagonal = inf_gamma_matrix(np.diag([0.5, 0.3]), transforms, crosscheck=False)
    np.testing.assert_allclose(diagonal, transforms.integral_r(0.5) + transforms.integral_r(0.3), atol=1e-12)


def test_inf_gamma_matrix_rejects_out_of_range():
    with pytest.raises(DomainError):
        inf_gamma_matrix_detailed(np.array([[1.5, 0.0], [0.0, 0.3]]), Semicircle())
    with pytest.raises(DomainError):
        inf_gamma_matrix_detailed(np.array([[0.5, 0.1], [0.2, 0.3]]), Semicircle())


def test_h2_reduces_to_scalar_on_diagonals():
    law = transform_cache(Semicircle())
    value = h2_func(2.6, 0.0, 3.1, 0.4, 0.0, 0.7, law)
    np.testing.assert_allclose(value, h_func(2.6, 0.4, law) + h_func(3.1, 0.7, law), atol=1e-12)


def test_h2_gradient():
    law = transform_cache(Rademacher())
    x = np.array([1.8, 0.2, 2.3, 0.5, 0.1, 0.6])
    report = gradcheck(lambda y: h2_func(*y, law), lambda y: h2_func_grad(*y, law), x)
    assert report.passed, gradcheck_components(report, ["gamma", "nu", "rho", "a", "b", "c"])


# --- 𝓕 -----------------------------------------------------------------------------

def test_f_func_matrix_version_on_identity(stationary_setup):
    model, constants, _ = stationary_setup
    gamma = constants.lambda_star
    np.testing.assert_allclose(f2_func(gamma, 0.0, gamma, model, constants),
                               f_func(gamma, model, constants) * np.eye(2), atol=1e-14)


def test_f_func_derivatives(stationary_setup):
    model, constants, _ = stationary_setup
    report = gradcheck(lambda x: f_func(x[0], model, constants),
                       lambda x: np.array([f_func_prime(x[0], model, constants)]),
                       np.array([constants.lambda_star]))
    assert report.passed
    theta = np.array([constants.lambda_star, 0.05, constants.lambda_star + 0.1])
    for i, j in [(0, 0), (0, 1), (1, 1)]:
        report = gradcheck(lambda x: f2_func(*x, model, constants)[i, j],
                           lambda x: f2_func_grad(*x, model, constants)[:, i, j], theta)
        assert report.passed


def test_f_weight_scales_as_beta_to_the_fourth():
    def sup(beta):
        model = ModelSpec(beta, Semicircle(), PointMass(0.3))
        return f_weight_sup(model, rs_constants(model))

    np.testing.assert_allclose(sup(0.04) / sup(0.02), 16.0, rtol=0.15)


# --- HCIZ exponents ---------------------------------------------------------------

def semicircle_spectrum(n, beta):
    return beta * Semicircle().quantile(midpoint_quantiles(n))


def test_rank1_zero_load_approaches_limit():
    d = semicircle_spectrum(400, 0.2)
    a = math.sqrt(0.5) * np.ones(400)
    result = hciz_rank1(a, np.zeros(400), d)
    assert not result.boundary_active
    assert abs(result.derivative) < 1e-10
    limit = inf_gamma_closed(0.5, ModelSpec(0.2, Semicircle(), PointMass(0.0)).transforms)
    assert abs(result.value - limit) < 1e-3


def test_rank1_trivial_spectrum_is_zero():
    result = hciz_rank1(np.full(10, 0.7), np.zeros(10), np.zeros(10))
    np.testing.assert_allclose(result.value, 0.0, atol=1e-12)
    np.testing.assert_allclose(result.gamma_opt, 1.0 / 0.49, rtol=1e-10)


def test_rank1_boundary_minimizer():
    d = np.zeros(100)
    d[-1] = 1.0
    result = hciz_rank1(math.sqrt(1e5) * np.ones(100), np.zeros(100), d)
    assert result.boundary_active
    assert result.gamma_opt == pytest.approx(1.0 + result.epsilon)
    assert result.derivative > 0


def test_rank1_infeasible_alpha():
    with pytest.raises(InfeasibleAlpha):
        hciz_rank1(np.zeros(5), np.ones(5), np.zeros(5))
    with pytest.raises(DomainError):
        hciz_rank1(np.ones(5), np.array([0.0, 1.0, np.nan, 0.0, 0.0]), np.zeros(5))


def test_rank2_decouples_into_two_rank1_problems():
    n = 64
    d = semicircle_spectrum(n, 0.2)
    a = math.sqrt(0.6) * np.ones(n)
    c = math.sqrt(0.6) * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    zero = np.zeros(n)
    rank2 = hciz_rank2(a, zero, c, zero, d)
    rank1 = hciz_rank1(a, zero, d)
    np.testing.assert_allclose(rank2.value, 2.0 * rank1.value, atol=1e-8)
    np.testing.assert_allclose(rank2.nu, 0.0, atol=1e-7)
    np.testing.assert_allclose([rank2.gamma, rank2.rho], [rank1.gamma_opt] * 2, atol=1e-6)


def test_rank2_is_symmetric_under_swapping_pairs():
    n = 50
    d = semicircle_spectrum(n, 0.3)
    rng = np.random.default_rng(8)
    a, b, c, e = (rng.standard_normal(n) * s for s in (0.8, 0.1, 0.6, 0.1))
    first = hciz_rank2(a, b, c, e, d)
    second = hciz_rank2(c, e, a, b, d)
    np.testing.assert_allclose(first.value, second.value, atol=1e-9)
    np.testing.assert_allclose([first.gamma, first.rho], [second.rho, second.gamma], atol=1e-6)
    assert first.gradient_norm < 1e-8


def test_rank2_singular_gram():
    a = np.ones(6)
    with pytest.raises(SingularGram):
        hciz_rank2(a, np.zeros(6), 2.0 * a, np.zeros(6), np.zeros(6))


def test_monte_carlo_trivial_and_seeded():
    n = 20
    result = hciz_mc(np.ones(n), np.zeros(n), np.zeros(n), draws=1000, seed=1)
    assert result["value"] == pytest.approx(0.0, abs=1e-14)
    d = semicircle_spectrum(n, 0.2)
    first = hciz_mc(np.ones(n), 0.1 * np.ones(n), d, draws=5000, seed=3, chunk=1000)
    assert first == hciz_mc(np.ones(n), 0.1 * np.ones(n), d, draws=5000, seed=3, chunk=1000)
    assert first["stderr"] > 0.0 and first["effective_draws"] <= 5000


def test_monte_carlo_agrees_with_rank1():
    n = 100
    u = midpoint_quantiles(n)
    d = semicircle_spectrum(n, 0.2)
    a = math.sqrt(0.8) * np.ones(n)
    b = 0.1 * Gaussian().quantile(u)
    mc = hciz_mc(a, b, d, draws=50_000, seed=11)
    assert abs(mc["value"] - hciz_rank1(a, b, d).value) < 0.05


@pytest.mark.slow
def test_monte_carlo_agrees_with_rank1_at_scale():
    n = 400
    u = midpoint_quantiles(n)
    d = semicircle_spectrum(n, 0.1)
    a = math.sqrt(0.8) * np.ones(n)
    b = 0.1 * Gaussian().quantile(u)
    mc = hciz_mc(a, b, d, draws=400_000, seed=5)
    assert abs(mc["value"] - hciz_rank1(a, b, d).value) < 0.05


# --- joint law and stationary points ----------------------------------------------

def test_linear_algebra_helpers():
    matrix = np.array([[2.0, 0.5], [0.5, 1.0]])
    root = symmetric_sqrt(matrix)
    np.testing.assert_allclose(root @ root, matrix, atol=1e-14)
    np.testing.assert_allclose(schur_complement(matrix), 1.0 - 0.25 / 2.0, rtol=1e-14)
    assert schur_complement(np.ones((2, 2)) + np.diag([0.0, -1e-3])) == 0.0


def test_joint_law_covariance(stationary_setup):
    model, constants, se_state = stationary_setup
    sample = sample_joint_law(constants, model.field, se_state, 2, 200_000, seed=4)
    assert sample.x.shape == (200_000, 3) and sample.y.shape == (200_000, 3)
    expected = np.zeros((3, 3))
    expected[0, 0] = constants.delta_star
    expected[1:, 1:] = se_state.leading(2)
    np.testing.assert_allclose(np.cov(sample.y.T), constants.kappa_star * expected,
                               atol=0.02 * constants.sigma_star_sq)
    np.testing.assert_allclose(sample.x, amp_denoiser(constants)(sample.h[:, None], sample.y))


@pytest.mark.parametrize("t", [1, 2, 3, 4, 5])
def test_first_moment_stationary_point(stationary_setup, t):
    model, constants, se_state = stationary_setup
    report = phi1_stationary(model, constants, se_state, t)
    np.testing.assert_allclose(report.value, constants.psi_rs, atol=1e-8)
    assert report.max_partial <= 1e-8, report.partials


@pytest.mark.parametrize("t", [1, 2, 3, 4, 5])
def test_second_moment_stationary_point(stationary_setup, t):
    model, constants, se_state = stationary_setup
    report = phi2_stationary(model, constants, se_state, t)
    np.testing.assert_allclose(report.value, 2.0 * constants.psi_rs, atol=1e-7)
    assert report.max_partial <= 1e-8, report.partials


def test_dv_norm_decays(stationary_setup):
    model, constants, se_state = stationary_setup
    reports = [phi1_stationary(model, constants, se_state, t) for t in range(1, 7)]
    decay = dv_decay(reports, constants)
    assert decay["monotone"]
    assert decay["norms"][0] > decay["norms"][-1]
    assert decay["decay_ratio"] < 1.0


def test_first_moment_gradient_on_a_draw(stationary_setup):
    model, constants, se_state = stationary_setup
    sample = sample_joint_law(constants, model.field, se_state, 2, 2000, seed=9)
    star = phi1_star_point(constants, sample.delta, symmetric_sqrt(sample.delta)[:, 1])
    x0 = star.flatten() + 0.01 * np.random.default_rng(1).standard_normal(len(star.flatten()))
    report = gradcheck(lambda x: phi1_objective(star.with_flat(x), model, constants, sample)[0],
                       lambda x: phi1_objective(star.with_flat(x), model, constants, sample)[1], x0)
    assert report.passed


def test_second_moment_gradient_on_a_draw(stationary_setup):
    model, constants, se_state = stationary_setup
    sample = sample_joint_law(constants, model.field, se_state, 2, 2000, seed=10)
    star = phi2_star_point(constants, sample.delta, symmetric_sqrt(sample.delta)[:, 1])
    x0 = star.flatten() + 0.01 * np.random.default_rng(2).standard_normal(len(star.flatten()))
    report = gradcheck(lambda x: phi2_objective(star.with_flat(x), model, constants, sample)[0],
                       lambda x: phi2_objective(star.with_flat(x), model, constants, sample)[1], x0)
    assert report.passed


def test_gradcheck_flags_a_wrong_gradient(caplog):
    with caplog.at_level(logging.WARNING):
        report = gradcheck(lambda x: float(x @ x), lambda x: 3.0 * x, np.array([1.0, -2.0]))
    assert not report.passed
    assert "gradient check failed" in caplog.text


def test_concavity_along_u(stationary_setup):
    model, constants, se_state = stationary_setup
    directions = np.zeros((2, 3))
    directions[0, 0], directions[1, 0] = 1.0, -1.0
    probe = concavity_probe(model, constants, se_state, 1, directions=directions, radius=0.05,
                            draws=20_000, seed=0)
    assert probe["all_decreased"]


def test_rank1_large_alpha_lands_on_boundary_and_overflow_is_infeasible():
    d = semicircle_spectrum(40, 0.2)
    result = hciz_rank1(1000.0 * np.ones(40), np.zeros(40), d)
    assert result.boundary_active
    assert result.gamma_opt == pytest.approx(d.max() + result.epsilon)
    with pytest.raises(InfeasibleAlpha):
        hciz_rank1(np.full(40, 1e200), np.zeros(40), d)
