import numpy as np
import pandas as pd
import pytest
from scipy.linalg import eigvalsh

from cgan_tomography import autodiff as ad
from cgan_tomography.autodiff import Tensor
from cgan_tomography.exceptions import DimensionMismatchError, NumericFailureError
from cgan_tomography.nn.layers import ExpectationLayer, density_matrix_layer
from cgan_tomography.physics.measure import DataVector, simulate_data
from cgan_tomography.physics.metrics import fidelity
from cgan_tomography.physics.states import StateSpec, make_state, maximally_mixed
from cgan_tomography.reconstruction import cgan as cgan_module
from cgan_tomography.reconstruction.cgan import build_qst_cgan, fit, reconstruct, single_shot, train_step
from cgan_tomography.reconstruction.config import OptimizerConfig


@pytest.fixture
def cat_data(husimi_set_4):
    target = make_state(StateSpec(kind="cat", dim=4, alpha_real=0.8, heads=2))
    return target, simulate_data(target, husimi_set_4)


def _parameters_equal(first, second) -> bool:
    return all(np.array_equal(a.values, b.values) for a, b in zip(first.parameters, second.parameters))


def test_build_is_deterministic_in_the_seed(husimi_set_4, small_train_config):
    first_generator, first_discriminator = build_qst_cgan(husimi_set_4, small_train_config, seed=3)
    second_generator, second_discriminator = build_qst_cgan(husimi_set_4, small_train_config, seed=3)
    other_generator, _ = build_qst_cgan(husimi_set_4, small_train_config, seed=4)
    assert _parameters_equal(first_generator, second_generator)
    assert _parameters_equal(first_discriminator, second_discriminator)
    assert not _parameters_equal(first_generator, other_generator)


def test_network_shapes_follow_the_measurement_set(husimi_set_4, small_train_config):
    generator, discriminator = build_qst_cgan(husimi_set_4, small_train_config)
    assert generator.trunk.sizes == [36, 16, 16]
    assert discriminator.trunk.sizes == [72, 16, 36]


def test_generator_output_is_a_valid_state(husimi_set_4, small_train_config, cat_data):
    _, data = cat_data
    generator, _ = build_qst_cgan(husimi_set_4, small_train_config)
    output = generator.forward(data.values)
    rho = output.rho_real.values + 1j * output.rho_imag.values
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert eigvalsh(rho)[0] > -1e-12
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(output.statistics.values, simulate_data(output.density_matrix(), husimi_set_4).values)


def test_train_step_updates_both_networks(husimi_set_4, small_train_config, cat_data):
    _, data = cat_data
    generator, discriminator = build_qst_cgan(husimi_set_4, small_train_config)
    generator_before, discriminator_before = generator.clone(), discriminator.clone()
    metrics = train_step(generator, discriminator, data, small_train_config, np.random.default_rng(0))
    assert not _parameters_equal(generator, generator_before)
    assert not _parameters_equal(discriminator, discriminator_before)
    assert generator.optimizer.step == discriminator.optimizer.step == 1
    assert metrics.d_loss > 0 and metrics.l1 > 0
    assert metrics.real_scores.shape == metrics.fake_scores.shape == (36,)
    assert metrics.gradient_penalty == 0.0


def test_train_step_with_gradient_penalty(husimi_set_4, small_train_config, cat_data):
    _, data = cat_data
    config = small_train_config.model_copy(update={"lambda_gp": 10.0})
    generator, discriminator = build_qst_cgan(husimi_set_4, config)
    metrics = train_step(generator, discriminator, data, config, np.random.default_rng(0))
    assert metrics.gradient_penalty > 0


def test_step_losses_are_the_binary_cross_entropy_of_the_logged_scores(husimi_set_4, small_train_config, cat_data):
    _, data = cat_data
    config = small_train_config.model_copy(update={"lambda_l1": 0.0, "lambda_gp": 0.0})
    generator, discriminator = build_qst_cgan(husimi_set_4, config, seed=2)
    metrics = train_step(generator, discriminator, data, config, np.random.default_rng(0))
    d_loss = -np.mean(np.log(metrics.real_scores) + np.log(1.0 - metrics.fake_scores))
    g_loss = -np.mean(np.log(metrics.generator_scores))
    assert metrics.d_loss == pytest.approx(d_loss, abs=1e-10)
    assert metrics.g_loss == pytest.approx(g_loss, abs=1e-10)


def _generator_loss(generator, discriminator, condition, config) -> float:
    statistics = generator.forward(condition).statistics
    scores = discriminator(condition, statistics).values
    return float(-np.mean(np.log(scores)) + config.lambda_l1 * np.mean(np.abs(condition.values - statistics.values)))


def test_generator_step_lowers_the_generator_loss_against_a_frozen_discriminator(
    husimi_set_4, small_train_config, cat_data
):
    _, data = cat_data
    config = small_train_config.model_copy(update={"generator": OptimizerConfig(lr=1e-4)})
    condition = Tensor(data.values)
    lowered = 0
    for seed in range(20):
        generator, discriminator = build_qst_cgan(husimi_set_4, config, seed=seed)
        frozen = discriminator.clone()
        before = _generator_loss(generator, discriminator, condition, config)
        cgan_module.generator_step(generator, discriminator, condition, config)
        assert _parameters_equal(discriminator, frozen)
        lowered += _generator_loss(generator, discriminator, condition, config) < before
    assert lowered >= 18


def test_discriminator_scores_the_expectation_layer_output(husimi_set_4, small_train_config, cat_data, monkeypatch):
    _, data = cat_data
    generator, discriminator = build_qst_cgan(husimi_set_4, small_train_config)
    untrained = generator.clone()
    candidates = []
    score = cgan_module.Discriminator.__call__

    def recording_call(self, condition, candidate):
        candidates.append(np.array(ad.as_tensor(candidate).values))
        return score(self, condition, candidate)

    monkeypatch.setattr(cgan_module.Discriminator, "__call__", recording_call)
    train_step(generator, discriminator, data, small_train_config, np.random.default_rng(0))

    rho_real, rho_imag = density_matrix_layer(untrained.trunk(Tensor(data.values)), 4)
    expected = ExpectationLayer(husimi_set_4)(rho_real, rho_imag).values
    # real pair, fake pair, generator update
    assert len(candidates) == 3
    assert np.array_equal(candidates[0], data.values)
    assert np.array_equal(candidates[1], expected)
    assert np.array_equal(candidates[2], expected)


def test_train_step_rejects_mismatched_data(husimi_set_4, small_train_config):
    generator, discriminator = build_qst_cgan(husimi_set_4, small_train_config)
    with pytest.raises(DimensionMismatchError):
        train_step(generator, discriminator, DataVector(values=np.zeros(10)), small_train_config)


def test_fit_logs_every_interval_and_the_last_iteration(husimi_set_4, small_train_config, cat_data):
    target, data = cat_data
    config = small_train_config.model_copy(update={"iterations": 12})
    generator, discriminator = build_qst_cgan(husimi_set_4, config)
    report = fit(generator, discriminator, data, config, config.iterations, target=target)
    assert [row["iteration"] for row in report.rows] == [5, 10, 12]
    assert report.iterations == 12
    assert report.final_state.dim == 4
    frame = report.to_dataframe()
    assert frame["fidelity"].between(0, 1).all()
    assert frame["log_likelihood"].isna().all()


def test_fit_stops_at_the_fidelity_target(husimi_set_4, small_train_config):
    target = maximally_mixed(4)
    data = simulate_data(target, husimi_set_4)
    config = small_train_config.model_copy(update={"fidelity_target": 1e-6, "log_every": 1})
    generator, discriminator = build_qst_cgan(husimi_set_4, config)
    report = fit(generator, discriminator, data, config, 20, target=target)
    assert report.iterations == 1
    assert len(report.rows) == 1


def test_reconstruct_is_deterministic(husimi_set_4, small_train_config, cat_data):
    target, data = cat_data
    first = reconstruct(data, husimi_set_4, small_train_config, target=target).to_dataframe()
    second = reconstruct(data, husimi_set_4, small_train_config, target=target).to_dataframe()
    pd.testing.assert_frame_equal(first.drop(columns="wall_ms"), second.drop(columns="wall_ms"))


def test_reconstruct_checks_dimensions(husimi_set_4, husimi_set_8, small_train_config, cat_data):
    target, data = cat_data
    with pytest.raises(DimensionMismatchError):
        reconstruct(data, husimi_set_8, small_train_config)
    with pytest.raises(DimensionMismatchError):
        reconstruct(data, husimi_set_4, small_train_config, target=maximally_mixed(8))


def test_l1_distance_decreases_during_training(husimi_set_4, small_train_config, cat_data):
    target, data = cat_data
    config = small_train_config.model_copy(update={"iterations": 200, "log_every": 10})
    frame = reconstruct(data, husimi_set_4, config, target=target).to_dataframe()
    assert frame["l1"].iloc[-1] < 0.8 * frame["l1"].iloc[0]


def test_numeric_failure_carries_the_partial_report(husimi_set_4, small_train_config, cat_data, monkeypatch):
    target, data = cat_data
    original_step = cgan_module.train_step
    calls = {"count": 0}

    def failing_step(*args, **kwargs):
        calls["count"] += 1
        if calls["count"] == 8:
            raise NumericFailureError("Operation 'log' produced non-finite values.")
        return original_step(*args, **kwargs)

    monkeypatch.setattr(cgan_module, "train_step", failing_step)
    generator, discriminator = build_qst_cgan(husimi_set_4, small_train_config)
    with pytest.raises(NumericFailureError) as error:
        fit(generator, discriminator, data, small_train_config, 20, target=target)
    assert error.value.report.iterations == 8
    assert [row["iteration"] for row in error.value.report.rows] == [5]


class TestSingleShot:
    def test_forward_pass_matches_generator_output(self, husimi_set_4, small_train_config, cat_data):
        _, data = cat_data
        generator, _ = build_qst_cgan(husimi_set_4, small_train_config)
        assert np.allclose(single_shot(generator, data).matrix, generator.density_matrix(data).matrix)

    def test_fine_tuning_leaves_pretrained_networks_untouched(self, husimi_set_4, small_train_config, cat_data):
        target, data = cat_data
        generator, discriminator = build_qst_cgan(husimi_set_4, small_train_config)
        generator_before, discriminator_before = generator.clone(), discriminator.clone()
        tuned = single_shot(generator, data, discriminator, fine_tune=5, config=small_train_config)
        assert _parameters_equal(generator, generator_before)
        assert _parameters_equal(discriminator, discriminator_before)
        assert not np.allclose(tuned.matrix, generator.density_matrix(data).matrix)
        assert 0 <= fidelity(target, tuned) <= 1

    def test_rejects_mismatched_data(self, husimi_set_4, small_train_config):
        generator, _ = build_qst_cgan(husimi_set_4, small_train_config)
        with pytest.raises(DimensionMismatchError):
            single_shot(generator, DataVector(values=np.zeros(5)))
