"""Displace-and-measure observables, simulated data and the sensing matrix."""

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator, validate_call

from .fock import DEFAULT_DIM, check_dim, default_pad, padded_displacement_op, parity_op
from .states import DensityMatrix
from ..exceptions import (
    DimensionMismatchError,
    HermiticityViolationError,
    InvalidProbabilityError,
    OutOfRangeError,
    ShapeError,
)

MeasurementKind = Literal["husimi", "wigner", "generalized-q", "custom"]
NoiseKind = Literal["none", "binomial", "gaussian"]

IMAGINARY_TOLERANCE = 1e-9
RANGE_TOLERANCE = 1e-9
PROBABILITY_MARGIN = 1e-6


class DisplacementRecipe(BaseModel):
    """How a set of displacements was generated, enough to rebuild it exactly."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    origin: Literal["square-grid", "disk", "explicit"] = "square-grid"
    extent: float = Field(default=5.0, ge=0)
    nx: int = Field(default=32, ge=1)
    ny: int = Field(default=32, ge=1)
    radius: float = Field(default=5.0, ge=0)
    count: int = Field(default=100, ge=1)
    seed: int = 0
    points: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def _check_explicit_points(self):
        if self.origin == "explicit" and not self.points:
            raise ValueError("An explicit displacement set needs a non-empty list of points.")
        return self

    def build(self) -> "DisplacementSet":
        if self.origin == "square-grid":
            xs = np.linspace(-self.extent, self.extent, self.nx)
            ys = np.linspace(-self.extent, self.extent, self.ny)
            real, imag = np.meshgrid(xs, ys)
            points = (real + 1j * imag).ravel()
        elif self.origin == "disk":
            rng = np.random.default_rng(self.seed)
            radii = self.radius * np.sqrt(rng.uniform(size=self.count))
            angles = rng.uniform(0.0, 2 * np.pi, size=self.count)
            points = radii * np.exp(1j * angles)
        else:
            points = np.array([complex(re, im) for re, im in self.points])
        return DisplacementSet(points=points, recipe=self)


@dataclass(frozen=True, eq=False)
class DisplacementSet:
    points: np.ndarray
    recipe: DisplacementRecipe

    def __post_init__(self):
        points = np.array(self.points, dtype=np.complex128).ravel()
        assert points.size > 0, "A displacement set must contain at least one point."
        assert np.all(np.isfinite(points)), "Displacement points must be finite."
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.size


def square_grid(extent: float = 5.0, nx: int = 32, ny: int = 32) -> DisplacementSet:
    """``nx`` x ``ny`` grid covering |Re beta|, |Im beta| <= extent, real part varying fastest."""
    return DisplacementRecipe(origin="square-grid", extent=extent, nx=nx, ny=ny).build()


def disk(radius: float = 5.0, count: int = 100, seed: int = 0) -> DisplacementSet:
    """``count`` points drawn uniformly from the disk |beta| <= radius."""
    return DisplacementRecipe(origin="disk", radius=radius, count=count, seed=seed).build()


def explicit(points) -> DisplacementSet:
    points = np.asarray(points, dtype=np.complex128).ravel()
    return DisplacementRecipe(origin="explicit", points=[(p.real, p.imag) for p in points]).build()


class MeasurementRecipe(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["husimi", "wigner", "generalized-q"] = "husimi"
    dim: int = Field(default=DEFAULT_DIM, ge=2)
    pad: int | None = None
    n_list: list[int] | None = None
    displacements: DisplacementRecipe = Field(default_factory=DisplacementRecipe)

    def build(self) -> "MeasurementSet":
        displacements = self.displacements.build()
        if self.kind == "husimi":
            return husimi_ops(displacements, self.dim, pad=self.pad)
        if self.kind == "wigner":
            return wigner_ops(displacements, self.dim, pad=self.pad)
        return generalized_q_ops(displacements, self.n_list or [0], self.dim, pad=self.pad)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Ordered Hermitian operators O_i with the displacements they were built from.

    For ``generalized-q`` sets the operator order is displacement-major: all ``n_list`` entries of
    the first point, then the second point, and so on.
    """

    kind: MeasurementKind
    dim: int
    operators: np.ndarray
    displacements: DisplacementSet | None = None
    n_list: tuple[int, ...] | None = None
    pad: int | None = None

    def __post_init__(self):
        operators = np.array(self.operators, dtype=np.complex128)
        if operators.ndim != 3 or operators.shape[1:] != (self.dim, self.dim):
            raise ShapeError(f"Expected operators of shape (M, {self.dim}, {self.dim}), got {operators.shape}.")
        hermiticity = np.max(np.abs(operators - operators.conj().transpose(0, 2, 1)))
        assert hermiticity < 1e-10, f"Measurement operators are not Hermitian (max deviation {hermiticity:.3e})."
        if self.displacements is not None:
            per_point = 1 if self.n_list is None else len(self.n_list)
            assert operators.shape[0] == len(self.displacements) * per_point, "Operator count does not match points."
        operators.setflags(write=False)
        object.__setattr__(self, "operators", operators)

    def __len__(self) -> int:
        return self.operators.shape[0]

    @property
    def recipe(self) -> MeasurementRecipe | None:
        if self.kind == "custom" or self.displacements is None:
            return None
        return MeasurementRecipe(
            kind=self.kind,
            dim=self.dim,
            pad=self.pad,
            n_list=None if self.n_list is None else list(self.n_list),
            displacements=self.displacements.recipe,
        )

    @cached_property
    def sensing_matrix(self) -> np.ndarray:
        matrix = sensing_matrix(self)
        matrix.setflags(write=False)
        return matrix

    @classmethod
    def from_operators(cls, operators) -> "MeasurementSet":
        """Wrap arbitrary Hermitian observables as a ``custom`` set without displacement metadata."""
        operators = np.asarray(operators, dtype=np.complex128)
        if operators.ndim != 3:
            raise ShapeError(f"Expected a stack of square operators, got shape {operators.shape}.")
        return cls(kind="custom", dim=operators.shape[1], operators=operators)


def _displacement_columns(beta: complex, dim: int, pad: int | None, levels) -> np.ndarray:
    """Columns ``levels`` of the padded D(beta), truncated to the first ``dim`` rows."""
    pad = default_pad(dim) if pad is None else pad
    full = padded_displacement_op(beta, dim + pad)
    return full[:dim, list(levels)]


def husimi_ops(displacements: DisplacementSet, dim: int = DEFAULT_DIM, pad: int | None = None) -> MeasurementSet:
    """Husimi observables O_i = (1/pi) |beta_i><beta_i|, |beta_i> the truncated column 0 of D(beta_i)."""
    check_dim(dim)
    operators = np.empty((len(displacements), dim, dim), dtype=np.complex128)
    for index, beta in enumerate(displacements.points):
        ket = _displacement_columns(beta, dim, pad, [0])[:, 0]
        operators[index] = np.outer(ket, ket.conj()) / np.pi
    return MeasurementSet(kind="husimi", dim=dim, operators=operators, displacements=displacements, pad=pad)


def wigner_ops(displacements: DisplacementSet, dim: int = DEFAULT_DIM, pad: int | None = None) -> MeasurementSet:
    """Displaced-parity observables O_i = (2/pi) D(beta_i) P D^dag(beta_i), formed before truncation."""
    check_dim(dim)
    total = dim + (default_pad(dim) if pad is None else pad)
    parity = parity_op(total)
    operators = np.empty((len(displacements), dim, dim), dtype=np.complex128)
    for index, beta in enumerate(displacements.points):
        full = padded_displacement_op(beta, total)
        operator = (full @ parity @ full.conj().T)[:dim, :dim] * (2 / np.pi)
        operators[index] = (operator + operator.conj().T) / 2
    return MeasurementSet(kind="wigner", dim=dim, operators=operators, displacements=displacements, pad=pad)


def generalized_q_ops(
    displacements: DisplacementSet, n_list, dim: int = DEFAULT_DIM, pad: int | None = None
) -> MeasurementSet:
    """Photon-number projectors after displacement, D(beta)|n><n|D^dag(beta), for every (beta, n) pair."""
    check_dim(dim)
    n_list = tuple(int(n) for n in n_list)
    if not n_list:
        raise OutOfRangeError("n_list must contain at least one photon number.")
    if min(n_list) < 0 or max(n_list) >= dim:
        raise OutOfRangeError(f"Photon numbers {n_list} must lie in [0, {dim}).")
    operators = np.empty((len(displacements) * len(n_list), dim, dim), dtype=np.complex128)
    index = 0
    for beta in displacements.points:
        columns = _displacement_columns(beta, dim, pad, n_list)
        for column in columns.T:
            operators[index] = np.outer(column, column.conj())
            index += 1
    return MeasurementSet(
        kind="generalized-q", dim=dim, operators=operators, displacements=displacements, n_list=n_list, pad=pad
    )


@dataclass(frozen=True, eq=False)
class DataVector:
    """Measurement statistics d, one real value per operator of a MeasurementSet."""

    values: np.ndarray
    kind: MeasurementKind = "custom"
    shots: int | None = None
    noise: NoiseKind = "none"
    sigma: float | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        assert np.all(np.isfinite(values)), "Data vector has non-finite values."
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def check_data_range(values: np.ndarray, kind: MeasurementKind, tolerance: float = RANGE_TOLERANCE) -> None:
    if kind == "husimi":
        low, high = 0.0, 1 / np.pi
    elif kind == "wigner":
        low, high = -2 / np.pi, 2 / np.pi
    elif kind == "generalized-q":
        low, high = 0.0, 1.0
    else:
        return
    assert np.all(values >= low - tolerance) and np.all(
        values <= high + tolerance
    ), f"{kind} values fall outside [{low:.5f}, {high:.5f}]."


def expectation_values(rho: np.ndarray, measurement_set: MeasurementSet) -> np.ndarray:
    """Complex tr{O_i rho} for every operator."""
    return np.einsum("mij,ji->m", measurement_set.operators, rho)


@validate_call(config=dict(arbitrary_types_allowed=True))
def simulate_data(rho: DensityMatrix, measurement_set: MeasurementSet) -> DataVector:
    """Ideal statistics d_i = Re tr{O_i rho}.

    Raises
    ------
    DimensionMismatchError
        If the state and operator dimensions differ.
    HermiticityViolationError
        If any tr{O_i rho} has an imaginary part above 1e-9.
    """
    if rho.dim != measurement_set.dim:
        raise DimensionMismatchError(f"State dimension {rho.dim} != measurement dimension {measurement_set.dim}.")
    traces = expectation_values(rho.matrix, measurement_set)
    imaginary = np.max(np.abs(traces.imag))
    if imaginary > IMAGINARY_TOLERANCE:
        raise HermiticityViolationError(f"tr(O rho) has imaginary part {imaginary:.3e}.")
    values = traces.real
    check_data_range(values, measurement_set.kind)
    return DataVector(values=values, kind=measurement_set.kind)


def _probability_scale(kind: MeasurementKind):
    """Affine map (scale, offset) with p = scale * value + offset."""
    if kind == "husimi":
        return np.pi, 0.0
    if kind == "wigner":
        return np.pi / 4, 0.5
    if kind == "generalized-q":
        return 1.0, 0.0
    raise InvalidProbabilityError(f"Measurement kind '{kind}' has no probability interpretation.")


def add_shot_noise(
    data: DataVector,
    shots: int | None = None,
    noise: NoiseKind = "binomial",
    seed: int = 0,
    sigma: float | None = None,
) -> DataVector:
    """Finite-statistics version of ``data``.

    ``binomial`` maps each value to a probability (Husimi p = pi Q, Wigner p = (1 + pi W / 2) / 2),
    draws k ~ Binomial(shots, p) and maps k / shots back. ``gaussian`` adds i.i.d. N(0, sigma).

    Raises
    ------
    InvalidProbabilityError
        If a mapped probability falls outside [0, 1] by more than 1e-6.
    """
    rng = np.random.default_rng(seed)
    if noise == "none":
        return data
    if noise == "gaussian":
        assert sigma is not None and sigma >= 0, "Gaussian noise needs a non-negative sigma."
        values = data.values + rng.normal(0.0, sigma, size=data.values.shape)
        return DataVector(values=values, kind=data.kind, shots=shots, noise="gaussian", sigma=sigma)
    assert shots is not None and shots >= 1, "Binomial noise needs a positive shot count."
    scale, offset = _probability_scale(data.kind)
    probabilities = scale * data.values + offset
    if np.any(probabilities < -PROBABILITY_MARGIN) or np.any(probabilities > 1 + PROBABILITY_MARGIN):
        raise InvalidProbabilityError(
            f"Probabilities span [{probabilities.min():.3e}, {probabilities.max():.3e}], outside [0, 1]."
        )
    probabilities = np.clip(probabilities, 0.0, 1.0)
    frequencies = rng.binomial(shots, probabilities) / shots
    values = (frequencies - offset) / scale
    return DataVector(values=values, kind=data.kind, shots=shots, noise="binomial")


def shot_noise_sigma(data: DataVector, shots: int) -> np.ndarray:
    """Per-point standard deviation of ``add_shot_noise`` in the units of ``data``."""
    scale, offset = _probability_scale(data.kind)
    probabilities = np.clip(scale * data.values + offset, 0.0, 1.0)
    return np.sqrt(probabilities * (1 - probabilities) / shots) / scale


def sensing_matrix(measurement_set: MeasurementSet) -> np.ndarray:
    """Matrix A of shape (M, N^2) whose row i is the row-major flattening of O_i^T, so A rho.ravel() = tr{O_i rho}."""
    operators = measurement_set.operators
    return np.ascontiguousarray(operators.transpose(0, 2, 1)).reshape(len(operators), -1)


def sensing_matrix_rank(measurement_set: MeasurementSet, tolerance: float = 1e-10):
    """Numerical rank of A relative to its largest singular value, with the singular values."""
    singular_values = np.linalg.svd(measurement_set.sensing_matrix, compute_uv=False)
    rank = int(np.sum(singular_values > tolerance * singular_values[0]))
    return rank, singular_values


def subset(measurement_set: MeasurementSet, data: DataVector, indices) -> tuple[MeasurementSet, DataVector]:
    """Restrict a set and its data to the displacement points ``indices``."""
    indices = np.asarray(indices, dtype=int)
    if measurement_set.displacements is None:
        operators = measurement_set.operators[indices]
        return MeasurementSet.from_operators(operators), DataVector(values=data.values[indices], kind="custom")
    per_point = 1 if measurement_set.n_list is None else len(measurement_set.n_list)
    rows = (indices[:, None] * per_point + np.arange(per_point)[None, :]).ravel()
    points = measurement_set.displacements.points[indices]
    displacements = explicit(points)
    restricted = MeasurementSet(
        kind=measurement_set.kind,
        dim=measurement_set.dim,
        operators=measurement_set.operators[rows],
        displacements=displacements,
        n_list=measurement_set.n_list,
        pad=measurement_set.pad,
    )
    values = DataVector(
        values=data.values[rows], kind=data.kind, shots=data.shots, noise=data.noise, sigma=data.sigma
    )
    return restricted, values


def within_disk(
    measurement_set: MeasurementSet, data: DataVector, radius: float
) -> tuple[MeasurementSet, DataVector]:
    """Keep only the displacement points with |beta| <= radius."""
    assert measurement_set.displacements is not None, "Disk selection needs displacement metadata."
    indices = np.flatnonzero(np.abs(measurement_set.displacements.points) <= radius)
    return subset(measurement_set, data, indices)
