"""Dense layers and the two parameter-free physics layers of the generator."""

import logging
import math
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import cholesky

from .. import autodiff as ad
from ..autodiff import Tensor
from ..exceptions import DimensionMismatchError, ShapeError

logger = logging.getLogger(__name__)

Activation = Literal["linear", "relu", "leaky_relu", "tanh", "sigmoid"]

TRACE_GUARD = 1e-12
INIT_STD = 0.05


def activate(x: Tensor, activation: Activation, slope: float = 0.2) -> Tensor:
    if activation == "linear":
        return x
    if activation == "relu":
        return ad.relu(x)
    if activation == "leaky_relu":
        return ad.leaky_relu(x, slope)
    if activation == "tanh":
        return ad.tanh(x)
    if activation == "sigmoid":
        return ad.sigmoid(x)
    raise ValueError(f"Unknown activation '{activation}'.")


class DenseLayer:
    """Affine map ``x @ W + b`` followed by an activation; W has shape (in_dim, out_dim)."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        activation: Activation = "linear",
        rng: np.random.Generator | None = None,
        init_std: float = INIT_STD,
        slope: float = 0.2,
    ):
        rng = np.random.default_rng() if rng is None else rng
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.slope = slope
        self.weights = Tensor(rng.normal(0.0, init_std, size=(in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    @property
    def parameters(self) -> list[Tensor]:
        return [self.weights, self.bias]

    def __call__(self, x) -> Tensor:
        return dense_forward(self, x)


def dense_forward(layer: DenseLayer, x) -> Tensor:
    x = ad.as_tensor(x)
    if x.shape[-1] != layer.in_dim:
        raise ShapeError(f"Dense layer expects {layer.in_dim} inputs, got shape {x.shape}.")
    return activate(ad.matmul(x, layer.weights) + layer.bias, layer.activation, layer.slope)


class MLP:
    """Stack of dense layers with one hidden activation and a separate output activation."""

    def __init__(
        self,
        sizes: Sequence[int],
        hidden_activation: Activation = "leaky_relu",
        output_activation: Activation = "linear",
        rng: np.random.Generator | None = None,
        init_std: float = INIT_STD,
        slope: float = 0.2,
    ):
        assert len(sizes) >= 2, "An MLP needs at least input and output sizes."
        self.sizes = list(sizes)
        last = len(sizes) - 2
        self.layers = [
            DenseLayer(
                sizes[index],
                sizes[index + 1],
                activation=output_activation if index == last else hidden_activation,
                rng=rng,
                init_std=init_std,
                slope=slope,
            )
            for index in range(len(sizes) - 1)
        ]

    @property
    def parameters(self) -> list[Tensor]:
        return [parameter for layer in self.layers for parameter in layer.parameters]

    def __call__(self, x) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {}
        for index, layer in enumerate(self.layers):
            state[f"layer_{index}/weights"] = layer.weights.values.copy()
            state[f"layer_{index}/bias"] = layer.bias.values.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for index, layer in enumerate(self.layers):
            for name in ("weights", "bias"):
                values = np.asarray(state[f"layer_{index}/{name}"], dtype=np.float64)
                target = getattr(layer, name)
                if values.shape != target.shape:
                    raise ShapeError(f"layer_{index}/{name} has shape {values.shape}, expected {target.shape}.")
                target.values[...] = values

    def clone(self) -> "MLP":
        twin = MLP.__new__(MLP)
        twin.sizes = list(self.sizes)
        twin.layers = []
        for layer in self.layers:
            copy = DenseLayer.__new__(DenseLayer)
            copy.in_dim, copy.out_dim = layer.in_dim, layer.out_dim
            copy.activation, copy.slope = layer.activation, layer.slope
            copy.weights = Tensor(layer.weights.values, requires_grad=True)
            copy.bias = Tensor(layer.bias.values, requires_grad=True)
            twin.layers.append(copy)
        return twin


def _cholesky_gather_indices(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices into ``concat(v, [0])`` that assemble Re T and Im T.

    ``v[:dim]`` fills the real diagonal; the rest holds (re, im) pairs of the strictly lower
    triangle in row-major order. Index ``dim**2`` points at the appended zero.
    """
    zero = dim * dim
    real_index = np.full((dim, dim), zero, dtype=np.intp)
    imag_index = np.full((dim, dim), zero, dtype=np.intp)
    real_index[np.diag_indices(dim)] = np.arange(dim)
    rows, cols = np.tril_indices(dim, k=-1)
    offsets = dim + 2 * np.arange(rows.size)
    real_index[rows, cols] = offsets
    imag_index[rows, cols] = offsets + 1
    return real_index, imag_index


def density_matrix_layer(v, dim: int | None = None) -> tuple[Tensor, Tensor]:
    """Map N^2 unconstrained reals to (Re rho, Im rho) with rho = T^dag T / tr(T^dag T).

    Parameters
    ----------
    v : Tensor
        Flat vector of length N^2.
    dim : int, optional
        N; inferred from the input length when omitted.

    Returns
    -------
    tuple of Tensor
        Real and imaginary parts of a Hermitian, positive-semidefinite, unit-trace matrix.
    """
    v = ad.reshape(ad.as_tensor(v), (-1,))
    size = v.shape[0]
    dim = math.isqrt(size) if dim is None else dim
    if dim * dim != size:
        raise ShapeError(f"The density-matrix layer needs N^2 inputs, got {size}.")
    real_index, imag_index = _cholesky_gather_indices(dim)
    extended = ad.concat([v, Tensor(np.zeros(1))])
    t_real, t_imag = ad.take(extended, real_index), ad.take(extended, imag_index)

    # T^dag T = (Tr^T - i Ti^T)(Tr + i Ti)
    gram_real, gram_imag = ad.complex_matmul(ad.transpose(t_real), -ad.transpose(t_imag), t_real, t_imag)
    trace = ad.sum(ad.square(t_real)) + ad.sum(ad.square(t_imag))
    if trace.values < TRACE_GUARD:
        logger.error("Degenerate density-matrix parametrization: tr(T^dag T) = %.3e.", float(trace.values))
        trace = trace + TRACE_GUARD
    return gram_real / trace, gram_imag / trace


def pack_density_parameters(rho: np.ndarray) -> np.ndarray:
    """Input vector that ``density_matrix_layer`` maps back onto the full-rank state ``rho``.

    With J the reversal permutation, J rho J = L L^dag and T = J L^dag J is lower triangular with
    a positive real diagonal and T^dag T = rho.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    dim = rho.shape[0]
    reversed_rho = rho[::-1, ::-1]
    lower = cholesky((reversed_rho + reversed_rho.conj().T) / 2, lower=True)
    factor = lower.conj().T[::-1, ::-1]
    rows, cols = np.tril_indices(dim, k=-1)
    pairs = np.stack([factor[rows, cols].real, factor[rows, cols].imag], axis=1).ravel()
    return np.concatenate([factor.diagonal().real, pairs])


class ExpectationLayer:
    """Re tr{O_i rho} for the fixed operators of a measurement set, via the sensing matrix."""

    def __init__(self, measurement_set):
        matrix = measurement_set.sensing_matrix
        self.dim = measurement_set.dim
        self.size = matrix.shape[0]
        self.sensing_real = Tensor(matrix.real)
        self.sensing_imag = Tensor(matrix.imag)

    def __call__(self, rho_real: Tensor, rho_imag: Tensor) -> Tensor:
        if rho_real.shape != (self.dim, self.dim) or rho_imag.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"Expectation layer is bound to dimension {self.dim}, got {rho_real.shape} and {rho_imag.shape}."
            )
        flat_real = ad.reshape(rho_real, (-1,))
        flat_imag = ad.reshape(rho_imag, (-1,))
        return ad.matmul(self.sensing_real, flat_real) - ad.matmul(self.sensing_imag, flat_imag)


def expectation_layer(rho_real: Tensor, rho_imag: Tensor, measurement_set) -> Tensor:
    return ExpectationLayer(measurement_set)(rho_real, rho_imag)
