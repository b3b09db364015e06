"""Pre-training a generator on a simulated state family for single-shot reconstruction."""

import logging
import time
from typing import NamedTuple

import numpy as np
from pydantic import validate_call
from tqdm import tqdm

from .cgan import Discriminator, Generator, build_qst_cgan, train_step
from .config import DatasetSpec, PretrainConfig
from .reports import RunReport
from ..exceptions import DatasetError, DegenerateStateError
from ..physics.measure import DataVector, MeasurementSet, add_shot_noise, simulate_data
from ..physics.metrics import fidelity
from ..physics.states import DensityMatrix, StateSpec, make_state

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 100


class PretrainResult(NamedTuple):
    generator: Generator
    discriminator: Discriminator
    report: RunReport


def sample_cat_spec(spec: DatasetSpec, rng: np.random.Generator) -> StateSpec:
    radius = rng.uniform(spec.alpha_min, spec.alpha_max)
    phase = rng.uniform(0.0, 2 * np.pi) if spec.random_alpha_phase else 0.0
    heads = int(rng.integers(spec.heads_min, spec.heads_max + 1))
    head_phases = list(rng.uniform(0.0, 2 * np.pi, size=heads)) if spec.random_head_phases else None
    alpha = radius * np.exp(1j * phase)
    return StateSpec(
        kind="cat",
        dim=spec.dim,
        alpha_real=alpha.real,
        alpha_imag=alpha.imag,
        heads=heads,
        head_phases=head_phases,
    )


@validate_call(config=dict(arbitrary_types_allowed=True))
def generate_dataset(
    spec: DatasetSpec, measurement_set: MeasurementSet, verbose: bool = False
) -> list[tuple[DataVector, DensityMatrix]]:
    """Simulated (data, state) pairs for ``spec.count`` random cat states.

    Superpositions that interfere to zero norm are redrawn.
    """
    if spec.dim != measurement_set.dim:
        raise DatasetError(f"Dataset dimension {spec.dim} != measurement dimension {measurement_set.dim}.")
    rng = np.random.default_rng(spec.seed)
    pairs = []
    for index in tqdm(range(spec.count), desc="Simulating states", disable=not verbose):
        for _ in range(MAX_RESAMPLES):
            try:
                state = make_state(sample_cat_spec(spec, rng))
                break
            except DegenerateStateError:
                continue
        else:
            raise DatasetError(f"Could not draw a non-degenerate state for record {index}.")
        data = simulate_data(state, measurement_set)
        if spec.noise != "none":
            data = add_shot_noise(data, shots=spec.shots, noise=spec.noise, seed=spec.seed + index + 1)
        pairs.append((data, state))
    return pairs


def check_dataset(dataset: list[tuple[DataVector, DensityMatrix]], measurement_set: MeasurementSet) -> None:
    if not dataset:
        raise DatasetError("The dataset is empty.")
    for index, (data, state) in enumerate(dataset):
        if len(data) != len(measurement_set):
            raise DatasetError(f"Record {index} has {len(data)} values, expected {len(measurement_set)}.")
        if state.dim != measurement_set.dim:
            raise DatasetError(f"Record {index} has dimension {state.dim}, expected {measurement_set.dim}.")


def mean_single_shot_fidelity(generator: Generator, dataset: list[tuple[DataVector, DensityMatrix]]) -> float:
    return float(np.mean([fidelity(state, generator.density_matrix(data)) for data, state in dataset]))


def pretrain(
    dataset: list[tuple[DataVector, DensityMatrix]],
    measurement_set: MeasurementSet,
    config: PretrainConfig | None = None,
    verbose: bool = False,
) -> PretrainResult:
    """Train one generator/discriminator pair over shuffled epochs of ``dataset``.

    A ``validation_fraction`` of the records is held out; after every epoch the mean single-shot
    fidelity on it is logged and the best-scoring parameters are restored at the end. When the
    split would leave no validation records the training records are used instead.

    Parameters
    ----------
    dataset : list of (DataVector, DensityMatrix)
        Records sharing ``measurement_set``.
    measurement_set : MeasurementSet
        Operators bound into the generator.
    config : PretrainConfig, optional
        Epochs, split and the per-step ``TrainConfig`` (gradient penalty on by default).
    verbose : bool
        Show progress bars and print a summary per epoch.

    Returns
    -------
    PretrainResult
        Generator, discriminator and a report with one row per epoch.
    """
    config = PretrainConfig() if config is None else config
    check_dataset(dataset, measurement_set)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(dataset))
    n_validation = int(round(config.validation_fraction * len(dataset)))
    if n_validation == 0 or n_validation == len(dataset):
        training, validation = [dataset[i] for i in order], [dataset[i] for i in order]
    else:
        validation = [dataset[i] for i in order[:n_validation]]
        training = [dataset[i] for i in order[n_validation:]]

    generator, discriminator = build_qst_cgan(measurement_set, config.train)
    report = RunReport(method="pretrain", config=config.model_dump())
    best_score, best_state = -np.inf, None
    start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        losses = []
        for index in tqdm(rng.permutation(len(training)), desc=f"Epoch {epoch}", disable=not verbose):
            data, _ = training[index]
            metrics = train_step(generator, discriminator, data, config.train, rng)
            losses.append((metrics.g_loss, metrics.d_loss, metrics.l1))
        g_loss, d_loss, distance = np.mean(losses, axis=0)
        score = mean_single_shot_fidelity(generator, validation)
        report.log(
            epoch,
            fidelity=score,
            g_loss=g_loss,
            d_loss=d_loss,
            l1=distance,
            wall_ms=(time.perf_counter() - start) * 1e3,
        )
        if verbose:
            print(f"Epoch {epoch}: validation single-shot fidelity {score:.4f}")
        if score > best_score:
            best_score = score
            best_state = (generator.trunk.state_dict(), discriminator.trunk.state_dict())
    generator.trunk.load_state_dict(best_state[0])
    discriminator.trunk.load_state_dict(best_state[1])
    report.iterations = config.epochs
    logger.info("Best validation single-shot fidelity %.4f.", best_score)
    return PretrainResult(generator, discriminator, report)
