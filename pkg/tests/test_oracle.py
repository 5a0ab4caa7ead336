import math

import numpy as np
import pytest

from ensemble_sim import sample_model
from errors import DomainError, TooLarge
from models import CouplingSample, ModelSpec
from oracle import (
    MAX_ENUMERATION_N,
    annealed_h0,
    brute_force_log_partition,
    enumerate_log_partition,
    enumeration_row,
    exact_log_z,
    gray_code_flips,
    quenched_free_energy,
    spherical_finite_n,
    spherical_finite_n_detailed,
    summarize,
    to_gray_code,
)
from oracle.enumeration import all_spin_configurations
from rs_core import psi_rs, psi_rs_sphere
from spectral_law import Gaussian, PointMass, Rademacher, Semicircle


def naive_log_z(coupling, field):
    """Double loop over configurations and pairs."""
    n = len(field)
    energies = []
    for index in range(2 ** n):
        sigma = [1.0 - 2.0 * ((index >> k) & 1) for k in range(n)]
        energy = sum(field[i] * sigma[i] for i in range(n))
        for i in range(n):
            for j in range(n):
                energy += 0.5 * coupling[i, j] * sigma[i] * sigma[j]
        energies.append(energy)
    top = max(energies)
    return top + math.log(sum(math.exp(e - top) for e in energies))


def test_gray_code_sequence():
    assert [to_gray_code(i) for i in range(8)] == [0, 1, 3, 2, 6, 7, 5, 4]
    assert list(gray_code_flips(3)) == [0, 1, 0, 2, 0, 1, 0]


def test_spin_configurations():
    spins = all_spin_configurations(3)
    assert spins.shape == (8, 3)
    np.testing.assert_array_equal(spins[0], np.ones(3))
    assert len({tuple(row) for row in spins}) == 8


@pytest.mark.parametrize("batch_bits", [0, 3, 8])
def test_gray_code_matches_naive_double_loop(batch_bits):
    model = ModelSpec(0.3, Rademacher(), Gaussian(0.0, 0.5, 20))
    sample = sample_model(model, 8, 21, "iid")
    coupling = sample.coupling(model.beta)
    log_z, max_energy = enumerate_log_partition(coupling, sample.h, batch_bits)
    np.testing.assert_allclose(log_z, naive_log_z(coupling, sample.h), atol=1e-10)
    assert max_energy <= log_z


@pytest.mark.parametrize("batch_bits", [None, 4, 12])
def test_gray_code_matches_brute_force(batch_bits):
    model = ModelSpec(0.1, Semicircle(), PointMass(0.3))
    sample = sample_model(model, 12, 5)
    coupling = sample.coupling(model.beta)
    log_z, _ = enumerate_log_partition(coupling, sample.h, batch_bits)
    np.testing.assert_allclose(log_z, brute_force_log_partition(coupling, sample.h), atol=1e-10)


def test_free_spins():
    field = np.array([0.1, -0.4, 0.7, 0.0, 1.2])
    log_z, _ = enumerate_log_partition(np.zeros((5, 5)), field, 2)
    np.testing.assert_allclose(log_z, np.sum(np.log(2.0 * np.cosh(field))), atol=1e-12)


def test_exact_log_z_result(rademacher_model):
    result = exact_log_z(sample_model(rademacher_model, 10, 3), rademacher_model)
    assert result.n == 10
    assert result.max_energy <= result.log_z <= 10 * math.log(2.0) + result.max_energy
    assert result.log_z_per_n == pytest.approx(result.log_z / 10)
    row = enumeration_row(result, 0.7)
    assert row["gap"] == pytest.approx(result.log_z_per_n - 0.7)


def test_size_guard(rademacher_model):
    sample = sample_model(rademacher_model, MAX_ENUMERATION_N + 1, 1)
    with pytest.raises(TooLarge):
        exact_log_z(sample, rademacher_model)
    with pytest.raises(TooLarge):
        brute_force_log_partition(np.zeros((17, 17)), np.zeros(17))


def test_quenched_average_is_seeded(rademacher_model):
    first = quenched_free_energy(rademacher_model, 8, 4, seed=12)
    assert first == quenched_free_energy(rademacher_model, 8, 4, seed=12)
    assert first[1] is not None and first[1] >= 0.0
    assert summarize([0.5]) == (0.5, None)


def test_small_n_is_close_to_rs(rademacher_model):
    mean, _ = quenched_free_energy(rademacher_model, 12, 8, seed=4)
    assert abs(mean - psi_rs(rademacher_model)) < 0.05


@pytest.mark.slow
def test_quenched_free_energy_converges_to_rs(rademacher_model):
    mean, _ = quenched_free_energy(rademacher_model, 20, 32, seed=2024)
    assert abs(mean - psi_rs(rademacher_model)) <= 0.02


def test_annealed_value_at_zero_field():
    model = ModelSpec(0.1, Rademacher(), PointMass(0.0))
    np.testing.assert_allclose(annealed_h0(model), psi_rs(model), atol=1e-12)
    with pytest.raises(DomainError):
        annealed_h0(ModelSpec(0.1, Rademacher(), PointMass(0.2)))


def test_spherical_zero_field_semicircle():
    model = ModelSpec(0.3, Semicircle(), PointMass(0.0))
    value = spherical_finite_n(sample_model(model, 400, 8), model)
    np.testing.assert_allclose(value, 0.3 ** 2 / 4, atol=1e-3)


def test_spherical_detailed_fields():
    model = ModelSpec(0.3, Semicircle(), Gaussian(0.0, 0.5, 40))
    sample = sample_model(model, 200, 6)
    detailed = spherical_finite_n_detailed(sample, model)
    assert detailed["gamma"] > model.beta * sample.d.max()
    assert not detailed["boundary"]
    assert detailed["value"] == spherical_finite_n(sample, model)


def test_spherical_needs_two_sites():
    model = ModelSpec(0.3, Semicircle(), PointMass(0.0))
    sample = CouplingSample(n=1, d=np.zeros(1), o=np.eye(1), h=np.zeros(1), seed=0)
    with pytest.raises(DomainError):
        spherical_finite_n(sample, model)


@pytest.mark.slow
def test_spherical_converges_to_rs():
    model = ModelSpec(0.3, Semicircle(), Gaussian(0.0, 0.5, 40))
    values = [spherical_finite_n(sample_model(model, 2000, seed), model) for seed in range(8)]
    assert abs(np.mean(values) - psi_rs_sphere(model)) <= 0.01
