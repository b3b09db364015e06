"""Conditional-GAN state reconstruction with physics-constrained generator output.

The generator maps measured statistics d to N^2 reals, turns them into a density matrix with the
density-matrix layer and recomputes statistics with the expectation layer. The discriminator
scores (d, candidate) pairs with one sigmoid output per measurement operator.
"""

import logging
import time
from dataclasses import dataclass, replace

import numpy as np
from pydantic import validate_call

from .config import OptimizerConfig, TrainConfig
from .reports import RunReport
from .. import autodiff as ad
from ..autodiff import Tensor
from ..exceptions import DimensionMismatchError, NumericFailureError
from ..nn import (
    MLP,
    AdamState,
    ExpectationLayer,
    adam_step,
    bce_discriminator,
    bce_generator,
    density_matrix_layer,
    gradient_penalty,
    l1,
)
from ..physics.measure import DataVector, MeasurementSet
from ..physics.metrics import fidelity
from ..physics.states import DensityMatrix

logger = logging.getLogger(__name__)


def _adam(config: OptimizerConfig) -> AdamState:
    return AdamState(
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
        decay_rate=config.decay_rate,
        decay_every=config.decay_every,
    )


@dataclass
class GeneratorOutput:
    rho_real: Tensor
    rho_imag: Tensor
    statistics: Tensor

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(self.rho_real.values + 1j * self.rho_imag.values)


class Generator:
    """Dense trunk [M -> hidden... -> N^2], density-matrix layer, expectation layer."""

    def __init__(self, measurement_set: MeasurementSet, config: TrainConfig, rng: np.random.Generator):
        architecture = config.architecture
        self.dim = measurement_set.dim
        self.size = len(measurement_set)
        self.trunk = MLP(
            [self.size, *architecture.generator_hidden, self.dim**2],
            hidden_activation=architecture.activation,
            output_activation="linear",
            rng=rng,
            init_std=architecture.init_std,
            slope=architecture.slope,
        )
        self.expectation = ExpectationLayer(measurement_set)
        self.optimizer = _adam(config.generator)

    @property
    def parameters(self) -> list[Tensor]:
        return self.trunk.parameters

    def zero_grad(self) -> None:
        for parameter in self.parameters:
            parameter.zero_grad()

    def forward(self, condition) -> GeneratorOutput:
        condition = ad.as_tensor(condition)
        if condition.shape != (self.size,):
            raise DimensionMismatchError(f"Generator expects {self.size} statistics, got shape {condition.shape}.")
        rho_real, rho_imag = density_matrix_layer(self.trunk(condition), self.dim)
        return GeneratorOutput(rho_real, rho_imag, self.expectation(rho_real, rho_imag))

    def density_matrix(self, data: DataVector) -> DensityMatrix:
        return self.forward(Tensor(data.values)).density_matrix()

    def clone(self) -> "Generator":
        twin = Generator.__new__(Generator)
        twin.dim, twin.size, twin.expectation = self.dim, self.size, self.expectation
        twin.trunk = self.trunk.clone()
        twin.optimizer = replace(self.optimizer, step=0, first_moments=[], second_moments=[])
        return twin


class Discriminator:
    """Dense trunk over concat(d, candidate) with one sigmoid score per operator."""

    def __init__(self, measurement_set: MeasurementSet, config: TrainConfig, rng: np.random.Generator):
        architecture = config.architecture
        self.size = len(measurement_set)
        self.trunk = MLP(
            [2 * self.size, *architecture.discriminator_hidden, self.size],
            hidden_activation=architecture.activation,
            output_activation="sigmoid",
            rng=rng,
            init_std=architecture.init_std,
            slope=architecture.slope,
        )
        self.optimizer = _adam(config.discriminator)

    @property
    def parameters(self) -> list[Tensor]:
        return self.trunk.parameters

    def zero_grad(self) -> None:
        for parameter in self.parameters:
            parameter.zero_grad()

    def __call__(self, condition, candidate) -> Tensor:
        return self.trunk(ad.concat([ad.as_tensor(condition), ad.as_tensor(candidate)]))

    def clone(self) -> "Discriminator":
        twin = Discriminator.__new__(Discriminator)
        twin.size = self.size
        twin.trunk = self.trunk.clone()
        twin.optimizer = replace(self.optimizer, step=0, first_moments=[], second_moments=[])
        return twin


def build_qst_cgan(
    measurement_set: MeasurementSet, config: TrainConfig | None = None, seed: int | None = None
) -> tuple[Generator, Discriminator]:
    """Seeded generator/discriminator pair bound to ``measurement_set``; no noise input."""
    config = TrainConfig() if config is None else config
    rng = np.random.default_rng(config.seed if seed is None else seed)
    generator = Generator(measurement_set, config, rng)
    discriminator = Discriminator(measurement_set, config, rng)
    return generator, discriminator


@dataclass
class StepMetrics:
    g_loss: float
    d_loss: float
    l1: float
    gradient_penalty: float
    real_scores: np.ndarray
    fake_scores: np.ndarray
    generator_scores: np.ndarray
    state: DensityMatrix


def discriminator_step(
    discriminator: Discriminator,
    condition: Tensor,
    generated: Tensor,
    config: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """One update of D on (d, d) as real and (d, d_G) as fake; ``generated`` must be detached."""
    real_scores = discriminator(condition, condition)
    fake_scores = discriminator(condition, generated)
    loss = bce_discriminator(real_scores, fake_scores)
    penalty = 0.0
    if config.lambda_gp > 0:
        penalty_term = gradient_penalty(discriminator, condition, generated, rng=rng)
        penalty = float(penalty_term.values)
        loss = loss + config.lambda_gp * penalty_term
    discriminator.zero_grad()
    ad.backward(loss, wrt=discriminator.parameters)
    adam_step(discriminator.optimizer, discriminator.parameters)
    return float(loss.values), penalty, real_scores.values, fake_scores.values


def generator_step(
    generator: Generator,
    discriminator: Discriminator,
    condition: Tensor,
    config: TrainConfig,
    output: GeneratorOutput | None = None,
) -> tuple[float, float, np.ndarray]:
    """One update of G on the adversarial loss plus lambda_L1 * L1; D is left untouched."""
    output = generator.forward(condition) if output is None else output
    scores = discriminator(condition, output.statistics)
    distance = l1(condition, output.statistics)
    loss = bce_generator(scores, saturating=config.saturating_generator_loss) + config.lambda_l1 * distance
    generator.zero_grad()
    ad.backward(loss, wrt=generator.parameters)
    adam_step(generator.optimizer, generator.parameters)
    return float(loss.values), float(distance.values), scores.values


def train_step(
    generator: Generator,
    discriminator: Discriminator,
    data: DataVector,
    config: TrainConfig | None = None,
    rng: np.random.Generator | None = None,
) -> StepMetrics:
    """One discriminator update followed by one generator update from a single generator pass.

    The statistics scored by D in both updates are the same expectation-layer output; D sees a
    detached copy, G keeps the graph.
    """
    config = TrainConfig() if config is None else config
    if len(data) != generator.size:
        raise DimensionMismatchError(f"Data has {len(data)} values, the model expects {generator.size}.")
    condition = Tensor(data.values)
    output = generator.forward(condition)
    state = output.density_matrix()
    d_loss, penalty, real_scores, fake_scores = discriminator_step(
        discriminator, condition, output.statistics.detach(), config, rng
    )
    g_loss, distance, generator_scores = generator_step(generator, discriminator, condition, config, output)
    return StepMetrics(
        g_loss=g_loss,
        d_loss=d_loss,
        l1=distance,
        gradient_penalty=penalty,
        real_scores=real_scores,
        fake_scores=fake_scores,
        generator_scores=generator_scores,
        state=state,
    )


def fit(
    generator: Generator,
    discriminator: Discriminator,
    data: DataVector,
    config: TrainConfig,
    iterations: int,
    target: DensityMatrix | None = None,
    report: RunReport | None = None,
    early_stop: bool = True,
) -> RunReport:
    """Run ``iterations`` train steps, logging every ``config.log_every`` steps and the last one.

    A NumericFailureError is logged with the iteration it occurred at, attached to the exception
    as ``report`` and re-raised.
    """
    report = RunReport(method="cgan", config=config.model_dump()) if report is None else report
    rng = np.random.default_rng(config.seed)
    start = time.perf_counter()
    iteration = 0
    try:
        for iteration in range(1, iterations + 1):
            metrics = train_step(generator, discriminator, data, config, rng)
            if iteration % config.log_every and iteration != iterations:
                continue
            current = generator.density_matrix(data)
            score = None if target is None else fidelity(target, current)
            report.log(
                iteration,
                fidelity=score,
                g_loss=metrics.g_loss,
                d_loss=metrics.d_loss,
                l1=metrics.l1,
                wall_ms=(time.perf_counter() - start) * 1e3,
            )
            if early_stop and score is not None and config.fidelity_target is not None:
                if score >= config.fidelity_target:
                    logger.info("Reached fidelity %.6f at iteration %d.", score, iteration)
                    break
    except NumericFailureError as error:
        logger.error("Training diverged at iteration %d: %s", iteration, error)
        report.iterations = iteration
        error.report = report
        raise
    report.iterations = iteration
    report.final_state = generator.density_matrix(data)
    return report


@validate_call(config=dict(arbitrary_types_allowed=True))
def reconstruct(
    data: DataVector,
    measurement_set: MeasurementSet,
    config: TrainConfig | None = None,
    target: DensityMatrix | None = None,
) -> RunReport:
    """Train a fresh QST-CGAN on a single data vector and return its trajectory.

    Parameters
    ----------
    data : DataVector
        Measured statistics, one per operator of ``measurement_set``.
    measurement_set : MeasurementSet
        Operators bound into the generator's expectation layer.
    config : TrainConfig, optional
        Hyperparameters; defaults as in ``metadata/default_config.yaml``.
    target : DensityMatrix, optional
        True state for fidelity logging and early stopping at ``config.fidelity_target``.

    Returns
    -------
    RunReport
        Logged trajectory with ``final_state`` set to the generator output after training.
    """
    config = TrainConfig() if config is None else config
    if len(data) != len(measurement_set):
        raise DimensionMismatchError(f"Data has {len(data)} values but the set has {len(measurement_set)} operators.")
    if target is not None and target.dim != measurement_set.dim:
        raise DimensionMismatchError(f"Target dimension {target.dim} != measurement dimension {measurement_set.dim}.")
    generator, discriminator = build_qst_cgan(measurement_set, config)
    return fit(generator, discriminator, data, config, config.iterations, target=target)


def single_shot(
    generator: Generator,
    data: DataVector,
    discriminator: Discriminator | None = None,
    fine_tune: int = 0,
    config: TrainConfig | None = None,
) -> DensityMatrix:
    """Reconstruct with one forward pass of a pre-trained generator.

    With ``fine_tune > 0`` a copy of both networks continues adversarial training on ``data`` for
    that many steps; the pre-trained networks are never modified.
    """
    if len(data) != generator.size:
        raise DimensionMismatchError(f"Data has {len(data)} values, the generator expects {generator.size}.")
    if fine_tune <= 0:
        return generator.density_matrix(data)
    assert discriminator is not None, "Fine-tuning needs the pre-trained discriminator."
    config = TrainConfig() if config is None else config
    tuned_generator, tuned_discriminator = generator.clone(), discriminator.clone()
    rng = np.random.default_rng(config.seed)
    for _ in range(fine_tune):
        train_step(tuned_generator, tuned_discriminator, data, config, rng)
    return tuned_generator.density_matrix(data)
