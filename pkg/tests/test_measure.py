import math

import numpy as np
import pytest
from pydantic import ValidationError

from cgan_tomography.exceptions import (
    DimensionMismatchError,
    InvalidProbabilityError,
    OutOfRangeError,
    ShapeError,
)
from cgan_tomography.physics.measure import (
    DataVector,
    MeasurementRecipe,
    MeasurementSet,
    add_shot_noise,
    disk,
    explicit,
    expectation_values,
    generalized_q_ops,
    husimi_ops,
    sensing_matrix_rank,
    shot_noise_sigma,
    simulate_data,
    square_grid,
    subset,
    wigner_ops,
    within_disk,
)
from cgan_tomography.physics.states import (
    StateSpec,
    density_from_ket,
    fock_state,
    make_state,
    random_density,
)

DIM = 32
POINTS = [0.0, 0.5, -1.0 + 0.3j, 1.2 - 0.8j, 2.0j, 1.5 + 1.5j]


def coherent(alpha: complex):
    return make_state(StateSpec(kind="coherent", dim=DIM, alpha_real=alpha.real, alpha_imag=alpha.imag))


class TestAnalyticObservables:
    def test_vacuum_wigner_at_origin(self):
        data = simulate_data(density_from_ket(fock_state(0, DIM)), wigner_ops(explicit([0.0]), DIM))
        assert data.values[0] == pytest.approx(2 / np.pi, abs=1e-6)

    def test_single_photon_wigner_at_origin_is_negative(self):
        data = simulate_data(density_from_ket(fock_state(1, DIM)), wigner_ops(explicit([0.0]), DIM))
        assert data.values[0] == pytest.approx(-2 / np.pi, abs=1e-6)

    def test_coherent_husimi_is_displaced_gaussian(self):
        alpha = 1.0 + 0.5j
        points = np.array(POINTS)
        data = simulate_data(coherent(alpha), husimi_ops(explicit(points), DIM))
        expected = np.exp(-np.abs(points - alpha) ** 2) / np.pi
        assert np.allclose(data.values, expected, atol=1e-6)

    def test_coherent_wigner_is_displaced_gaussian(self):
        alpha = -0.5 + 1.0j
        points = np.array(POINTS)
        data = simulate_data(coherent(alpha), wigner_ops(explicit(points), DIM))
        expected = 2 / np.pi * np.exp(-2 * np.abs(points - alpha) ** 2)
        assert np.allclose(data.values, expected, atol=1e-6)

    def test_coherent_generalized_q_is_poissonian(self):
        alpha, beta = 1.0 + 0.2j, 0.3 - 0.4j
        n_list = [0, 1, 2, 3]
        data = simulate_data(coherent(alpha), generalized_q_ops(explicit([beta]), n_list, DIM))
        mean = abs(alpha - beta) ** 2
        expected = [math.exp(-mean) * mean**n / math.factorial(n) for n in n_list]
        assert np.allclose(data.values, expected, atol=1e-6)

    def test_two_head_cat_husimi(self):
        alpha = 2.0
        points = np.array(POINTS)
        data = simulate_data(
            make_state(StateSpec(kind="cat", dim=DIM, alpha_real=alpha, heads=2)), husimi_ops(explicit(points), DIM)
        )

        def overlap(beta, a):
            return np.exp(-abs(beta) ** 2 / 2 - abs(a) ** 2 / 2 + np.conj(beta) * a)

        norm = 2 * (1 + np.exp(-2 * alpha**2))
        expected = np.abs(overlap(points, alpha) + overlap(points, -alpha)) ** 2 / norm / np.pi
        assert np.allclose(data.values, expected, atol=1e-6)


def test_cat_husimi_grid_respects_bound():
    rho = make_state(StateSpec(kind="cat", dim=DIM, alpha_real=2.0, heads=2))
    data = simulate_data(rho, husimi_ops(square_grid(5.0, 32, 32), DIM))
    assert len(data) == 1024
    assert data.values.max() <= 1 / np.pi
    assert data.values.min() >= -1e-12


def test_square_grid_orders_real_part_fastest():
    points = square_grid(1.0, 3, 2).points
    assert np.allclose(points.real[:3], [-1.0, 0.0, 1.0])
    assert np.allclose(points.imag[:3], -1.0)


def test_disk_points_are_reproducible_and_inside():
    first, second = disk(2.0, 50, seed=4), disk(2.0, 50, seed=4)
    assert np.array_equal(first.points, second.points)
    assert np.all(np.abs(first.points) <= 2.0)


def test_generalized_q_order_is_displacement_major():
    points = explicit([0.0, 1.0])
    measurement_set = generalized_q_ops(points, [0, 2], dim=6)
    single = generalized_q_ops(explicit([1.0]), [0, 2], dim=6)
    assert len(measurement_set) == 4
    assert np.allclose(measurement_set.operators[2:], single.operators)


def test_generalized_q_rejects_photon_numbers_outside_space():
    with pytest.raises(OutOfRangeError):
        generalized_q_ops(explicit([0.0]), [8], dim=8)


def test_recipe_rebuilds_identical_operators(husimi_set_4):
    rebuilt = husimi_set_4.recipe.build()
    assert np.array_equal(rebuilt.operators, husimi_set_4.operators)


def test_custom_sets_have_no_recipe(povm_set_6):
    assert povm_set_6.recipe is None
    with pytest.raises(ShapeError):
        MeasurementSet.from_operators(np.eye(3))


def test_non_hermitian_operators_are_rejected():
    with pytest.raises(AssertionError, match="Hermitian"):
        MeasurementSet.from_operators(np.array([[[0.0, 1.0], [0.0, 0.0]]]))


def test_sensing_matrix_reproduces_traces(husimi_set_4):
    rho = random_density(4, 4, seed=1)
    assert np.allclose(husimi_set_4.sensing_matrix @ rho.matrix.ravel(), expectation_values(rho.matrix, husimi_set_4))


def test_dense_husimi_grid_is_informationally_complete(husimi_set_4):
    rank, singular_values = sensing_matrix_rank(husimi_set_4)
    assert rank == 16
    assert singular_values.size == 16


def test_simulate_data_checks_dimensions(husimi_set_4):
    with pytest.raises(DimensionMismatchError):
        simulate_data(random_density(5, 1, seed=0), husimi_set_4)


def test_simulate_data_rejects_a_bare_matrix(husimi_set_4):
    with pytest.raises(ValidationError):
        simulate_data(np.eye(4) / 4, husimi_set_4)


def test_subset_keeps_matching_rows():
    measurement_set = generalized_q_ops(square_grid(1.0, 3, 3), [0, 1], dim=4)
    data = simulate_data(random_density(4, 2, seed=2), measurement_set)
    restricted, values = subset(measurement_set, data, [1, 4])
    assert len(restricted) == 4
    assert np.allclose(values.values, data.values[[2, 3, 8, 9]])
    assert np.allclose(restricted.displacements.points, measurement_set.displacements.points[[1, 4]])


def test_within_disk_selects_central_points(husimi_set_4):
    data = simulate_data(random_density(4, 4, seed=3), husimi_set_4)
    restricted, values = within_disk(husimi_set_4, data, 1.5)
    assert np.all(np.abs(restricted.displacements.points) <= 1.5)
    assert len(restricted) == len(values) == int(np.sum(np.abs(husimi_set_4.displacements.points) <= 1.5))


class TestShotNoise:
    @pytest.fixture
    def husimi_data(self, husimi_set_4):
        return simulate_data(random_density(4, 2, seed=5), husimi_set_4)

    def test_binomial_noise_is_seeded(self, husimi_data):
        first = add_shot_noise(husimi_data, shots=100, seed=9)
        second = add_shot_noise(husimi_data, shots=100, seed=9)
        assert np.array_equal(first.values, second.values)
        assert first.shots == 100 and first.noise == "binomial"

    def test_binomial_values_are_frequencies(self, husimi_data):
        noisy = add_shot_noise(husimi_data, shots=50, seed=1)
        counts = noisy.values * np.pi * 50
        assert np.allclose(counts, np.round(counts))
        assert np.all(noisy.values >= 0) and np.all(noisy.values <= 1 / np.pi + 1e-12)

    def test_binomial_noise_shrinks_with_shots(self, husimi_data):
        noisy = add_shot_noise(husimi_data, shots=10**8, seed=2)
        sigma = shot_noise_sigma(husimi_data, 10**8)
        assert np.all(np.abs(noisy.values - husimi_data.values) <= 6 * sigma + 1e-12)

    def test_wigner_values_map_to_parity_probabilities(self):
        measurement_set = wigner_ops(square_grid(1.0, 3, 3), dim=6)
        data = simulate_data(random_density(6, 2, seed=0), measurement_set)
        noisy = add_shot_noise(data, shots=200, seed=3)
        assert np.all(np.abs(noisy.values) <= 2 / np.pi + 1e-12)

    def test_gaussian_noise_uses_sigma(self, husimi_data):
        noisy = add_shot_noise(husimi_data, noise="gaussian", sigma=0.0, seed=0)
        assert np.allclose(noisy.values, husimi_data.values)
        assert noisy.noise == "gaussian"

    def test_out_of_range_values_are_not_probabilities(self):
        with pytest.raises(InvalidProbabilityError):
            add_shot_noise(DataVector(values=[0.2, 1.0], kind="husimi"), shots=10)

    def test_custom_data_has_no_probability_map(self):
        with pytest.raises(InvalidProbabilityError):
            add_shot_noise(DataVector(values=[0.2], kind="custom"), shots=10)

    def test_no_noise_returns_input(self, husimi_data):
        assert add_shot_noise(husimi_data, noise="none") is husimi_data


def test_measurement_recipe_builds_each_kind():
    for kind in ("husimi", "wigner", "generalized-q"):
        recipe = MeasurementRecipe(kind=kind, dim=4, n_list=[0, 1] if kind == "generalized-q" else None)
        assert recipe.build().kind == kind
