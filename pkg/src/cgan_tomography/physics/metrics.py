"""State-comparison and likelihood metrics."""

import numpy as np
from scipy.linalg import eigh, eigvalsh

from .measure import DataVector, MeasurementSet, expectation_values
from .states import DensityMatrix

LIKELIHOOD_FLOOR = 1e-300


def _as_matrix(state) -> np.ndarray:
    matrix = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state, dtype=np.complex128)
    assert np.max(np.abs(matrix - matrix.conj().T)) < 1e-8, "Fidelity and distances need Hermitian inputs."
    return matrix


def hermitian_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix, clipping negative eigenvalues at zero."""
    eigenvalues, eigenvectors = eigh(matrix)
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (eigenvectors * roots) @ eigenvectors.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Parameters
    ----------
    rho, sigma : DensityMatrix or np.ndarray
        Hermitian density matrices of equal dimension.

    Returns
    -------
    float
        Fidelity in [0, 1] up to rounding.
    """
    rho, sigma = _as_matrix(rho), _as_matrix(sigma)
    root = hermitian_sqrt(rho)
    product = root @ sigma @ root
    eigenvalues = eigvalsh((product + product.conj().T) / 2)
    return float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))) ** 2)


def trace_distance(rho, sigma) -> float:
    difference = _as_matrix(rho) - _as_matrix(sigma)
    return float(0.5 * np.sum(np.abs(eigvalsh(difference))))


def purity(rho) -> float:
    matrix = _as_matrix(rho)
    return float(np.real(np.trace(matrix @ matrix)))


def log_likelihood(rho, data: DataVector, measurement_set: MeasurementSet) -> float:
    """sum_i d_i log tr{rho O_i}, predictions floored at 1e-300 before the logarithm."""
    matrix = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    predictions = np.maximum(expectation_values(matrix, measurement_set).real, LIKELIHOOD_FLOOR)
    return float(np.sum(data.values * np.log(predictions)))
