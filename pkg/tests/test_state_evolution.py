import csv

import numpy as np
import pytest

from errors import DomainError
from models import ModelSpec
from rs_core import rs_constants
from spectral_law import Gaussian, PointMass, Rademacher, Semicircle
from state_evolution import (
    g_map,
    g_prime,
    initial_state,
    run_state_evolution,
    se_advance,
    se_limit_check,
    write_csv,
)


@pytest.fixture(params=[
    ModelSpec(0.1, Rademacher(), PointMass(0.4)),
    ModelSpec(0.1, Semicircle(), Gaussian(0.2, 0.5, 40)),
])
def setup(request):
    model = request.param
    return model, rs_constants(model)


def test_delta_star_is_a_fixed_point_of_g(setup):
    model, c = setup
    np.testing.assert_allclose(g_map(c, c.delta_star, model.field), c.delta_star, atol=1e-8)


def test_g_prime_matches_finite_difference(setup):
    model, c = setup
    delta, step = 0.5 * c.delta_star, 1e-5 * c.delta_star
    numeric = (g_map(c, delta + step, model.field) - g_map(c, delta - step, model.field)) / (2 * step)
    np.testing.assert_allclose(g_prime(c, delta, model.field), numeric, rtol=1e-5)
    assert 0.0 < g_prime(c, c.delta_star, model.field) < 1.0


def test_delta_matrix_structure(setup):
    model, c = setup
    state = run_state_evolution(c, model.field, 6)
    assert state.t == 6
    np.testing.assert_array_equal(np.diag(state.delta), np.full(6, c.delta_star))
    np.testing.assert_allclose(state.delta, state.delta.T, atol=0)
    assert np.linalg.eigvalsh(state.delta).min() > -1e-10
    first_row = g_map(c, 0.0, model.field)
    np.testing.assert_allclose(state.delta[0, 1:], first_row, rtol=1e-14)
    superdiagonal = np.array([state.delta[k, k + 1] for k in range(5)])
    assert np.all(np.diff(superdiagonal) >= 0)


def test_advance_extends_without_changing_prefix(setup):
    model, c = setup
    state = run_state_evolution(c, model.field, 4)
    longer = se_advance(state)
    np.testing.assert_array_equal(longer.delta[:4, :4], state.delta)
    assert initial_state(c, model.field).t == 0


def test_limit_check_bound(setup):
    model, c = setup
    report = se_limit_check(run_state_evolution(c, model.field, 8))
    assert report["bound_holds"]
    assert report["max_tail_deviation"] < c.delta_star
    assert 0.0 <= report["decay_ratio"] < 0.5
    assert se_limit_check(run_state_evolution(c, model.field, 2))["degenerate"]


def test_delta_outside_range_raises(setup):
    model, c = setup
    with pytest.raises(DomainError):
        g_map(c, 2.0 * c.delta_star + 1.0, model.field)


def test_write_csv(setup, tmp_path):
    model, c = setup
    state = run_state_evolution(c, model.field, 3)
    path = write_csv(state, str(tmp_path / "delta.csv"))
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["s", "1", "2", "3"]
    np.testing.assert_allclose([float(v) for v in rows[2][1:]], state.delta[1], rtol=0)


def test_quadrature_order_is_converged(setup):
    model, constants = setup
    coarse = run_state_evolution(constants, model.field, 6, gh_order=40)
    fine = run_state_evolution(constants, model.field, 6, gh_order=80)
    assert np.max(np.abs(coarse.delta - fine.delta)) <= 1e-9
