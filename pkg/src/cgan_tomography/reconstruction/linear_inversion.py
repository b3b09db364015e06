"""Least-squares inversion of d = A rho_f followed by projection onto the physical states."""

import time

import numpy as np
from scipy.linalg import eigh, lstsq

from .reports import RunReport
from ..exceptions import DegenerateStateError, DimensionMismatchError
from ..physics.measure import DataVector, MeasurementSet
from ..physics.metrics import fidelity, log_likelihood
from ..physics.states import DensityMatrix


def project_to_density_matrix(matrix: np.ndarray) -> DensityMatrix:
    """Closest unit-trace PSD matrix in the 2-norm to the Hermitian part of ``matrix``.

    Eigenvalues are shifted to sum to one and, from the smallest upwards, any negative value is
    zeroed with its deficit spread evenly over the remaining ones.
    """
    hermitian = (matrix + matrix.conj().T) / 2
    eigenvalues, eigenvectors = eigh(hermitian)
    dim = eigenvalues.size
    eigenvalues = eigenvalues + (1.0 - eigenvalues.sum()) / dim
    projected = eigenvalues.copy()
    deficit = 0.0
    for index in range(dim):
        remaining = dim - index
        if projected[index] + deficit / remaining >= 0:
            projected[index:] += deficit / remaining
            break
        deficit += projected[index]
        projected[index] = 0.0
    else:
        raise DegenerateStateError("Projection onto the density matrices removed every eigenvalue.")
    projected = np.clip(projected, 0.0, None)
    rho = (eigenvectors * projected) @ eigenvectors.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real)


def linear_inversion(
    data: DataVector, measurement_set: MeasurementSet, target: DensityMatrix | None = None
) -> RunReport:
    if len(data) != len(measurement_set):
        raise DimensionMismatchError(f"Data has {len(data)} values but the set has {len(measurement_set)} operators.")
    start = time.perf_counter()
    dim = measurement_set.dim
    flat, *_ = lstsq(measurement_set.sensing_matrix, data.values.astype(np.complex128))
    rho = project_to_density_matrix(flat.reshape(dim, dim))
    report = RunReport(method="lstsq")
    report.log(
        1,
        fidelity=None if target is None else fidelity(target, rho),
        log_likelihood=log_likelihood(rho, data, measurement_set),
        wall_ms=(time.perf_counter() - start) * 1e3,
    )
    report.iterations = 1
    report.final_state = rho
    return report
