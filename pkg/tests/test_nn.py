import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigvalsh

from cgan_tomography import autodiff as ad
from cgan_tomography.autodiff import Tensor, numerical_gradient, relative_error
from cgan_tomography.exceptions import DimensionMismatchError, ShapeError
from cgan_tomography.nn import (
    MLP,
    AdamState,
    ExpectationLayer,
    adam_step,
    bce_discriminator,
    bce_generator,
    density_matrix_layer,
    gradient_penalty,
    l1,
    pack_density_parameters,
    schedule_lr,
)
from cgan_tomography.nn.layers import INIT_STD
from cgan_tomography.physics.measure import husimi_ops, simulate_data, square_grid
from cgan_tomography.physics.states import DensityMatrix, random_density


def _assert_physical(rho: np.ndarray, tolerance: float = 1e-10) -> None:
    assert np.max(np.abs(rho - rho.conj().T)) < tolerance
    assert eigvalsh(rho)[0] >= -tolerance
    assert abs(np.trace(rho) - 1) < tolerance


class TestDensityMatrixLayer:
    @pytest.mark.parametrize("dim", [2, 4, 8, 16, 32])
    def test_output_is_physical_for_random_inputs(self, dim):
        rng = np.random.default_rng(dim)
        for _ in range(2000):
            scale = 10.0 ** rng.uniform(-3, 3)
            rho_real, rho_imag = density_matrix_layer(Tensor(scale * rng.standard_normal(dim**2)), dim)
            _assert_physical(rho_real.values + 1j * rho_imag.values)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=2**32 - 1))
    def test_dimension_is_inferred_from_input_length(self, dim, seed):
        vector = np.random.default_rng(seed).standard_normal(dim**2)
        rho_real, rho_imag = density_matrix_layer(Tensor(vector))
        assert rho_real.shape == (dim, dim)
        _assert_physical(rho_real.values + 1j * rho_imag.values)

    @pytest.mark.parametrize("dim", [2, 5, 9])
    def test_packed_parameters_reproduce_full_rank_states(self, dim):
        rho = random_density(dim, dim, seed=dim)
        rho_real, rho_imag = density_matrix_layer(Tensor(pack_density_parameters(rho.matrix)), dim)
        assert np.allclose(rho_real.values + 1j * rho_imag.values, rho.matrix, atol=1e-10)

    def test_input_length_must_be_a_square(self):
        with pytest.raises(ShapeError):
            density_matrix_layer(Tensor(np.ones(5)))

    def test_hand_built_factor(self):
        factor = np.array([[1, 0], [1 + 1j, 0]])
        gram = factor.conj().T @ factor
        rho_real, rho_imag = density_matrix_layer(Tensor(np.array([1.0, 0.0, 1.0, 1.0])), 2)
        assert np.allclose(rho_real.values + 1j * rho_imag.values, gram / np.trace(gram), atol=1e-12)

    def test_identity_factor_gives_the_maximally_mixed_state(self):
        rho_real, rho_imag = density_matrix_layer(Tensor(np.array([1.0, 1.0, 0.0, 0.0])), 2)
        assert np.allclose(rho_real.values, np.diag([0.5, 0.5]), atol=1e-12)
        assert np.allclose(rho_imag.values, 0.0, atol=1e-12)

    def test_negative_diagonal_entries_are_used_as_given(self):
        rho_real, _ = density_matrix_layer(Tensor(np.array([-1.0, 1.0, 0.0, 0.0])), 2)
        assert np.allclose(rho_real.values, np.diag([0.5, 0.5]), atol=1e-12)
        rho_real, _ = density_matrix_layer(Tensor(np.array([-3.0, 1.0, 0.0, 0.0])), 2)
        assert np.allclose(rho_real.values, np.diag([0.9, 0.1]), atol=1e-12)

    @pytest.mark.parametrize("x", [0.7, -2.0, 1e-4])
    def test_single_level_is_always_the_unit_matrix(self, x):
        rho_real, rho_imag = density_matrix_layer(Tensor(np.array([x])), 1)
        assert rho_real.values == pytest.approx(np.ones((1, 1)), abs=1e-12)
        assert rho_imag.values == pytest.approx(np.zeros((1, 1)), abs=1e-12)

    def test_small_inputs_above_the_guard_keep_unit_trace(self, caplog):
        # tr(T^dag T) is about 4e-10 here, above the 1e-12 guard
        with caplog.at_level(logging.ERROR, logger="cgan_tomography.nn.layers"):
            rho_real, _ = density_matrix_layer(Tensor(1e-5 * np.ones(4)), 2)
        assert np.trace(rho_real.values) == pytest.approx(1.0, abs=1e-14)
        assert caplog.records == []

    def test_vanishing_input_is_logged(self, caplog):
        with caplog.at_level(logging.ERROR, logger="cgan_tomography.nn.layers"):
            rho_real, rho_imag = density_matrix_layer(Tensor(np.zeros(4)), 2)
        assert "Degenerate density-matrix parametrization" in caplog.text
        assert np.all(np.isfinite(rho_real.values)) and np.all(np.isfinite(rho_imag.values))


class TestExpectationLayer:
    def test_matches_direct_traces(self, husimi_set_4):
        rho = random_density(4, 3, seed=8)
        layer = ExpectationLayer(husimi_set_4)
        statistics = layer(Tensor(rho.matrix.real), Tensor(rho.matrix.imag))
        assert np.allclose(statistics.values, simulate_data(rho, husimi_set_4).values, atol=1e-12)

    def test_rejects_states_of_other_dimensions(self, husimi_set_4):
        layer = ExpectationLayer(husimi_set_4)
        with pytest.raises(DimensionMismatchError):
            layer(Tensor(np.eye(3) / 3), Tensor(np.zeros((3, 3))))


def _end_to_end_loss(trunk, discriminator, expectation, condition, dim):
    rho_real, rho_imag = density_matrix_layer(trunk(condition), dim)
    statistics = expectation(rho_real, rho_imag)
    scores = discriminator(ad.concat([condition, statistics]))
    loss = bce_generator(scores) + 10.0 * l1(condition, statistics)
    return loss + bce_discriminator(discriminator(ad.concat([condition, condition])), scores), statistics


@pytest.mark.parametrize("seed", range(50))
def test_end_to_end_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 4))
    measurement_set = husimi_ops(square_grid(2.0, 3, 3), dim=dim)
    size = len(measurement_set)
    trunk = MLP([size, 8, dim**2], hidden_activation="tanh", rng=rng, init_std=0.5)
    discriminator = MLP([2 * size, 6, size], hidden_activation="tanh", output_activation="sigmoid", rng=rng)
    expectation = ExpectationLayer(measurement_set)
    condition = Tensor(simulate_data(random_density(dim, dim, seed), measurement_set).values)

    loss, statistics = _end_to_end_loss(trunk, discriminator, expectation, condition, dim)
    # stay away from the |x| kink of the L1 term
    if np.min(np.abs(statistics.values - condition.values)) < 1e-4:
        pytest.skip("generated statistics coincide with the data")
    weights = trunk.layers[0].weights
    ad.backward(loss, wrt=[weights])
    analytic = weights.grad.copy()

    original = weights.values.copy()

    def evaluate(point):
        weights.values[...] = point
        return float(_end_to_end_loss(trunk, discriminator, expectation, condition, dim)[0].values)

    numeric = numerical_gradient(evaluate, original)
    weights.values[...] = original
    assert relative_error(analytic, numeric) < 1e-4


class TestLosses:
    def test_discriminator_loss_at_equilibrium_is_two_log_two(self):
        half = Tensor(np.full(4, 0.5))
        assert float(bce_discriminator(half, half).values) == pytest.approx(2 * np.log(2))

    def test_generator_loss_forms(self):
        scores = Tensor(np.array([0.25, 0.75]))
        assert float(bce_generator(scores).values) == pytest.approx(-np.mean(np.log([0.25, 0.75])))
        assert float(bce_generator(scores, saturating=True).values) == pytest.approx(np.mean(np.log([0.75, 0.25])))

    def test_l1_is_mean_absolute_difference(self):
        assert float(l1(Tensor([1.0, 2.0]), Tensor([0.0, 4.0])).values) == pytest.approx(1.5)

    def test_gradient_penalty_of_a_unit_slope_critic_vanishes(self):
        direction = np.array([3.0, 4.0]) / 5.0

        def critic(condition, candidate):
            return ad.sum(ad.as_tensor(candidate) * Tensor(direction))

        penalty = gradient_penalty(critic, Tensor([0.1, 0.2]), Tensor([0.3, 0.0]), rng=np.random.default_rng(0))
        assert float(penalty.values) == pytest.approx(0.0, abs=1e-8)

    def test_gradient_penalty_of_a_constant_critic_is_one(self):
        def critic(condition, candidate):
            return ad.as_tensor(candidate) * 0.0 + 1.0

        penalty = gradient_penalty(critic, Tensor([0.1, 0.2]), Tensor([0.3, 0.0]), rng=np.random.default_rng(0))
        assert float(penalty.values) == pytest.approx(1.0)

    def test_gradient_penalty_is_differentiable_in_critic_parameters(self):
        rng = np.random.default_rng(3)
        critic_net = MLP([4, 5, 2], hidden_activation="tanh", output_activation="sigmoid", rng=rng, init_std=0.5)

        def critic(condition, candidate):
            return critic_net(ad.concat([ad.as_tensor(condition), ad.as_tensor(candidate)]))

        penalty = gradient_penalty(critic, Tensor([0.1, 0.2]), Tensor([0.25, 0.05]), rng=rng)
        ad.backward(penalty, wrt=critic_net.parameters)
        assert any(np.any(parameter.grad != 0) for parameter in critic_net.parameters)


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        parameter = Tensor(np.array([1.0, -1.0]), requires_grad=True)
        state = AdamState(lr=0.1, decay_rate=None)
        adam_step(state, [parameter], [np.array([2.0, -0.5])])
        assert np.allclose(parameter.values, [0.9, -0.9], atol=1e-7)
        assert state.step == 1

    def test_minimizes_a_quadratic(self):
        parameter = Tensor(np.array([3.0, -2.0]), requires_grad=True)
        state = AdamState(lr=0.05, beta1=0.9, decay_rate=0.5, decay_every=200)
        for _ in range(2000):
            parameter.zero_grad()
            ad.backward(ad.sum(ad.square(parameter)))
            adam_step(state, [parameter])
        assert np.allclose(parameter.values, 0.0, atol=1e-2)

    def test_learning_rate_decays_stepwise(self):
        state = AdamState(lr=1e-3, decay_rate=0.5, decay_every=10)
        assert schedule_lr(state) == pytest.approx(1e-3)
        state.step = 25
        assert schedule_lr(state) == pytest.approx(2.5e-4)

    def test_mismatched_gradients_are_rejected(self):
        parameter = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(ShapeError):
            adam_step(AdamState(), [parameter], [np.ones(3)])
        with pytest.raises(ShapeError):
            adam_step(AdamState(), [parameter], [])


class TestMLP:
    def test_state_dict_round_trip_and_clone_independence(self):
        net = MLP([3, 4, 2], rng=np.random.default_rng(1))
        other = MLP([3, 4, 2], rng=np.random.default_rng(2))
        other.load_state_dict(net.state_dict())
        x = Tensor(np.array([0.1, -0.2, 0.3]))
        assert np.array_equal(other(x).values, net(x).values)

        twin = net.clone()
        twin.layers[0].weights.values[...] = 0.0
        assert not np.allclose(net.layers[0].weights.values, 0.0)

    def test_default_initialisation_scale(self):
        net = MLP([400, 300], rng=np.random.default_rng(0))
        assert np.std(net.layers[0].weights.values) == pytest.approx(INIT_STD, rel=0.02)
        assert INIT_STD == 0.05
        assert np.array_equal(net.layers[0].bias.values, np.zeros(300))

    def test_load_state_dict_checks_shapes(self):
        net = MLP([3, 4, 2], rng=np.random.default_rng(1))
        state = net.state_dict()
        state["layer_0/weights"] = np.zeros((4, 3))
        with pytest.raises(ShapeError):
            net.load_state_dict(state)

    def test_input_size_is_checked(self):
        with pytest.raises(ShapeError):
            MLP([3, 2], rng=np.random.default_rng(0))(Tensor(np.ones(4)))

    def test_sigmoid_output_lies_in_unit_interval(self):
        net = MLP([3, 8, 5], output_activation="sigmoid", rng=np.random.default_rng(0), init_std=3.0)
        assert np.all((net(Tensor(np.ones(3))).values > 0) & (net(Tensor(np.ones(3))).values < 1))


def test_density_matrix_of_layer_output_passes_validation():
    rho_real, rho_imag = density_matrix_layer(Tensor(np.random.default_rng(0).standard_normal(16)))
    assert DensityMatrix(rho_real.values + 1j * rho_imag.values).dim == 4
