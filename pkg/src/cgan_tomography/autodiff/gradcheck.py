"""Central finite-difference checks for the tape engine."""

from typing import Callable

import numpy as np

DEFAULT_EPSILON = 1e-5


def numerical_gradient(function: Callable[[np.ndarray], float], point: np.ndarray, epsilon: float = DEFAULT_EPSILON):
    """Central differences (f(x + e) - f(x - e)) / 2e for every entry of ``point``."""
    point = np.array(point, dtype=np.float64)
    gradient = np.zeros_like(point)
    for index in np.ndindex(point.shape):
        original = point[index]
        point[index] = original + epsilon
        upper = function(point)
        point[index] = original - epsilon
        lower = function(point)
        point[index] = original
        gradient[index] = (upper - lower) / (2 * epsilon)
    return gradient


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(|a|, |n|, floor), taken over the whole array."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric)) / scale)
