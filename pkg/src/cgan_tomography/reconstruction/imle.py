"""Iterative maximum-likelihood reconstruction, rho <- N[R rho R]."""

import logging
import time
import warnings

import numpy as np
from pydantic import validate_call
from scipy.linalg import pinvh

from .config import ImleConfig
from .reports import RunReport
from ..exceptions import DimensionMismatchError, NumericFailureError
from ..physics.measure import DataVector, MeasurementSet, expectation_values
from ..physics.metrics import fidelity, log_likelihood
from ..physics.states import DensityMatrix, maximally_mixed, random_density

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12
PSEUDO_INVERSE_CUTOFF = 1e-10


def r_operator(rho, data: DataVector, measurement_set: MeasurementSet) -> np.ndarray:
    """R = sum_i (d_i / tr{O_i rho}) O_i with predictions floored at 1e-12."""
    matrix = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    predictions = expectation_values(matrix, measurement_set).real
    starved = (predictions < PROBABILITY_FLOOR) & (data.values != 0)
    if np.any(starved):
        warnings.warn(f"{int(np.sum(starved))} predicted probabilities were floored at {PROBABILITY_FLOOR}.")
    weights = data.values / np.maximum(predictions, PROBABILITY_FLOOR)
    r = np.einsum("m,mij->ij", weights, measurement_set.operators)
    return (r + r.conj().T) / 2


def completeness_inverse(measurement_set: MeasurementSet) -> np.ndarray:
    """Pseudo-inverse of G = sum_i O_i, eigenvalues below 1e-10 discarded."""
    completeness = measurement_set.operators.sum(axis=0)
    return pinvh((completeness + completeness.conj().T) / 2, atol=PSEUDO_INVERSE_CUTOFF)


def imle_step(
    rho: DensityMatrix,
    data: DataVector,
    measurement_set: MeasurementSet,
    g_correction: bool = False,
    g_inverse: np.ndarray | None = None,
) -> DensityMatrix:
    """One update N[R rho R], or N[G^-1 R rho R G^-1] with the completeness correction.

    Parameters
    ----------
    rho : DensityMatrix
        Current estimate.
    data : DataVector
        Observed statistics.
    measurement_set : MeasurementSet
        Observables the data belong to.
    g_correction : bool
        Apply the pseudo-inverse of sum_i O_i on both sides.
    g_inverse : np.ndarray, optional
        Precomputed ``completeness_inverse(measurement_set)``.
    """
    r = r_operator(rho, data, measurement_set)
    updated = r @ rho.matrix @ r
    if g_correction:
        g_inverse = completeness_inverse(measurement_set) if g_inverse is None else g_inverse
        updated = g_inverse @ updated @ g_inverse
    updated = (updated + updated.conj().T) / 2
    trace = np.trace(updated).real
    if not np.all(np.isfinite(updated)) or trace <= 0:
        raise NumericFailureError(f"iMLE update produced an invalid matrix (trace {trace}).")
    return DensityMatrix(updated / trace)


def initial_state(config: ImleConfig, dim: int) -> DensityMatrix:
    if config.initial == "maximally-mixed":
        return maximally_mixed(dim)
    return random_density(dim, dim, config.seed)


@validate_call(config=dict(arbitrary_types_allowed=True))
def reconstruct_imle(
    data: DataVector,
    measurement_set: MeasurementSet,
    config: ImleConfig | None = None,
    target: DensityMatrix | None = None,
    initial: DensityMatrix | None = None,
) -> RunReport:
    """Iterate ``imle_step`` until the log-likelihood changes by less than ``config.tol``, the
    fidelity target is met, or ``config.max_iterations`` steps were taken.

    ``initial`` overrides the starting state chosen by ``config.initial``.
    """
    config = ImleConfig() if config is None else config
    if len(data) != len(measurement_set):
        raise DimensionMismatchError(f"Data has {len(data)} values but the set has {len(measurement_set)} operators.")
    rho = initial_state(config, measurement_set.dim) if initial is None else initial
    if rho.dim != measurement_set.dim:
        raise DimensionMismatchError(f"Initial dimension {rho.dim} != measurement dimension {measurement_set.dim}.")
    g_inverse = completeness_inverse(measurement_set) if config.g_correction else None
    method = "imle-g" if config.g_correction else "imle"
    report = RunReport(method=method, config=config.model_dump())

    start = time.perf_counter()
    previous = log_likelihood(rho, data, measurement_set)
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        rho = imle_step(rho, data, measurement_set, config.g_correction, g_inverse)
        current = log_likelihood(rho, data, measurement_set)
        score = None if target is None else fidelity(target, rho)
        converged = abs(current - previous) < config.tol
        reached = score is not None and config.fidelity_target is not None and score >= config.fidelity_target
        last = converged or reached or iteration == config.max_iterations
        if iteration % config.log_every == 0 or last:
            report.log(
                iteration,
                fidelity=score,
                log_likelihood=current,
                wall_ms=(time.perf_counter() - start) * 1e3,
            )
        if converged or reached:
            logger.info("iMLE stopped at iteration %d (log-likelihood change %.3e).", iteration, current - previous)
            break
        previous = current
    report.iterations = iteration
    report.final_state = rho
    return report
