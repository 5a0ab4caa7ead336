import json
import os

import numpy as np
import pytest

from ensemble_sim import (
    coupling_matvec,
    dump_iterates,
    freeness_check,
    magnetization,
    midpoint_quantiles,
    orthogonality_error,
    row_moment_check,
    run_amp,
    sample_haar,
    sample_model,
    tap_residual_curve,
    trace_summary,
)
from models import CouplingSample, ModelSpec
from numerics import generator
from rs_core import rs_constants
from spectral_law import PointMass, Rademacher, Semicircle
from state_evolution import run_state_evolution


@pytest.fixture(scope="module")
def amp_run():
    model = ModelSpec(0.1, Rademacher(), PointMass(0.4))
    constants = rs_constants(model)
    se_state = run_state_evolution(constants, model.field, 4)
    sample = sample_model(model, 1000, 17)
    trace = run_amp(sample, model, constants, 4)
    return model, constants, se_state, sample, trace


def test_haar_matrix_is_orthogonal():
    o = sample_haar(200, generator(1))
    assert orthogonality_error(o) < 1e-10
    np.testing.assert_array_equal(o, sample_haar(200, generator(1)))


def test_quantile_placement():
    model = ModelSpec(0.2, Semicircle(), PointMass(0.3))
    sample = sample_model(model, 50, 4)
    np.testing.assert_allclose(sample.d, Semicircle().quantile(midpoint_quantiles(50)))
    np.testing.assert_array_equal(sample.h, np.full(50, 0.3))
    coupling = sample.coupling(model.beta)
    np.testing.assert_allclose(coupling, coupling.T, atol=1e-14)
    np.testing.assert_allclose(np.linalg.eigvalsh(coupling), np.sort(0.2 * sample.d), atol=1e-12)


def test_iid_placement_uses_seeded_streams():
    model = ModelSpec(0.2, Rademacher(), PointMass(0.3))
    first = sample_model(model, 40, 9, "iid")
    again = sample_model(model, 40, 9, "iid")
    np.testing.assert_array_equal(first.d, again.d)
    assert set(np.unique(first.d)) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        sample_model(model, 40, 9, "sobol")


def test_matvec_matches_dense(amp_run):
    model, _, _, sample, _ = amp_run
    v = generator(2).standard_normal(sample.n)
    np.testing.assert_allclose(coupling_matvec(sample, model, v), sample.coupling(model.beta) @ v, atol=1e-12)


def test_amp_shapes_and_initialization(amp_run):
    _, constants, _, sample, trace = amp_run
    assert trace.x.shape == (1000, 4) and trace.y.shape == (1000, 5) and trace.s.shape == (1000, 4)
    assert not trace.degenerate
    np.testing.assert_allclose(np.var(trace.y[:, 0]), constants.sigma_star_sq, rtol=0.15)
    np.testing.assert_allclose(magnetization(trace, sample), np.tanh(sample.h + trace.y[:, 3]))


def test_gram_matrices_track_state_evolution(amp_run):
    _, constants, se_state, _, trace = amp_run
    delta = se_state.leading(4)
    assert np.max(np.abs(trace.gram_xx - delta)) < 0.1
    assert np.max(np.abs(trace.gram_yy - constants.kappa_star * delta)) < 0.1
    assert np.max(np.abs(trace.gram_xy)) < 0.1


def test_freeness_of_constant_function_is_gram_deviation(amp_run):
    model, _, se_state, sample, trace = amp_run
    deviation = freeness_check(trace, sample, model, se_state, lambda x: np.ones_like(x))
    np.testing.assert_allclose(deviation, trace.gram_xx - se_state.leading(4), atol=1e-10)


def test_summary_and_moments(amp_run):
    model, constants, se_state, sample, trace = amp_run
    summary = trace_summary(trace, sample, model, constants, se_state)
    assert len(summary["tap_residuals"]) == 3
    assert summary["tap_residuals"] == tap_residual_curve(trace, sample, model, constants)
    assert set(summary["freeness_deviation"]) == {"x", "x^2", "resolvent"}
    moments = row_moment_check(trace, sample, model, constants, 4)
    assert len(moments["z_scores"]) == 14
    assert np.isfinite(moments["max_abs_z"])


def test_zero_field_is_degenerate():
    model = ModelSpec(0.1, Rademacher(), PointMass(0.0))
    constants = rs_constants(model)
    trace = run_amp(sample_model(model, 30, 1), model, constants, 3)
    assert trace.degenerate
    np.testing.assert_array_equal(trace.x, np.zeros((30, 3)))


def test_dump_iterates(amp_run, tmp_path):
    trace = amp_run[4]
    path = dump_iterates(trace, str(tmp_path / "iterates.bin"))
    data = np.fromfile(path, dtype=np.float64)
    with open(path + ".json") as handle:
        sidecar = json.load(handle)
    assert sidecar["shape"] == [1000, 13]
    assert data.size == 13000
    np.testing.assert_array_equal(data.reshape(1000, 13)[:, :4], trace.x)
    assert os.path.exists(path)


def test_haar_entries_have_variance_one_over_n():
    n, draws = 500, 200
    rng = generator(23)
    second_moment = np.mean([np.mean(np.diag(sample_haar(n, rng)) ** 2) for _ in range(draws)])
    np.testing.assert_allclose(n * second_moment, 1.0, rtol=0.1)


def test_tap_residual_decreases_along_a_convergent_run():
    model = ModelSpec(0.1, Rademacher(), PointMass(0.3))
    constants = rs_constants(model)
    sample = sample_model(model, 500, 29)
    trace = run_amp(sample, model, constants, 5)
    curve = tap_residual_curve(trace, sample, model, constants)
    # round-off floor once the iteration has converged
    assert all(later < earlier or later < 1e-13 for earlier, later in zip(curve, curve[1:])), curve
    assert curve[-1] < 1e-2 * curve[0]


def test_two_spin_amp_step_by_hand():
    model = ModelSpec(0.1, Rademacher(), PointMass(0.4))
    c = rs_constants(model)
    theta = 0.3
    o = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    d = np.array([-1.0, 1.0])
    h = np.array([0.4, 0.4])
    sample = CouplingSample(n=2, d=d, o=o, h=h, seed=0)
    trace = run_amp(sample, model, c, 1, rng=generator(5))

    z = c.one_minus_q
    y0 = c.sigma_star * generator(5).standard_normal(2)
    x1 = np.tanh(0.4 + y0) / z - y0
    lam = [1.0 / (z * (c.lambda_star - 0.1 * di)) - 1.0 for di in d]
    s1 = np.array([o[0, 0] * x1[0] + o[0, 1] * x1[1], o[1, 0] * x1[0] + o[1, 1] * x1[1]])
    y1 = np.array([
        o[0, 0] * lam[0] * s1[0] + o[1, 0] * lam[1] * s1[1],
        o[0, 1] * lam[0] * s1[0] + o[1, 1] * lam[1] * s1[1],
    ])
    np.testing.assert_allclose(trace.y[:, 0], y0, rtol=1e-14)
    np.testing.assert_allclose(trace.x[:, 0], x1, rtol=1e-13)
    np.testing.assert_allclose(trace.s[:, 0], s1, rtol=1e-13)
    np.testing.assert_allclose(trace.y[:, 1], y1, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(trace.gram_xx, [[x1 @ x1 / 2.0]], rtol=1e-13)
