"""State vectors, density matrices and the ground-truth state factory."""

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator, validate_call
from scipy.linalg import eigvalsh

from .fock import DEFAULT_DIM, check_dim
from ..exceptions import (
    DegenerateStateError,
    HermiticityViolationError,
    InvalidDimensionError,
    NumericFailureError,
    OutOfRangeError,
    ShapeError,
)

STATE_TOLERANCE = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.complex128, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized ket |psi> in a truncated Fock space."""

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes))
        if self.amplitudes.ndim != 1:
            raise ShapeError(f"State vector must be one-dimensional, got shape {self.amplitudes.shape}.")
        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if not abs(norm - 1.0) < STATE_TOLERANCE:
            raise DegenerateStateError(f"State vector is not normalized (squared norm {norm}).")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive-semidefinite, unit-trace matrix.

    Construction checks the three invariants within ``STATE_TOLERANCE``; pass ``validate=False``
    only for intermediate quantities that are checked later.
    """

    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        if self.validate:
            check_density_matrix(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return eigvalsh(self.matrix)


def check_density_matrix(matrix: np.ndarray, tolerance: float = STATE_TOLERANCE) -> None:
    """Raise a typed error unless ``matrix`` is Hermitian with unit trace and eigenvalues >= -tolerance."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"Density matrix must be square, got {matrix.shape}.")
    if not np.all(np.isfinite(matrix)):
        raise NumericFailureError("Density matrix has non-finite entries.")
    hermiticity = np.max(np.abs(matrix - matrix.conj().T))
    if not hermiticity < tolerance:
        raise HermiticityViolationError(f"Density matrix is not Hermitian (max deviation {hermiticity:.3e}).")
    trace = np.trace(matrix)
    if not abs(trace - 1.0) < tolerance:
        raise DegenerateStateError(f"Density matrix trace is {trace}, expected 1.")
    smallest = eigvalsh((matrix + matrix.conj().T) / 2)[0]
    if smallest < -tolerance:
        raise DegenerateStateError(f"Density matrix has negative eigenvalue {smallest:.3e}.")


class StateSpec(BaseModel):
    """Recipe for a ground-truth state.

    ``kind`` selects the family; only the fields relevant to that family are read.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["fock", "coherent", "cat", "random", "snap", "maximally-mixed"]
    dim: int = Field(default=DEFAULT_DIM, ge=2)
    n: int = Field(default=0, ge=0)
    alpha_real: float = 0.0
    alpha_imag: float = 0.0
    heads: int = Field(default=2, ge=1, le=6)
    head_phases: list[float] | None = None
    parity: int | None = None
    rank: int = Field(default=1, ge=1)
    seed: int = 0
    snap_levels: list[int] = Field(default_factory=lambda: [0, 1])
    snap_phase: float = math.pi

    @model_validator(mode="after")
    def _check_family_fields(self):
        if self.rank > self.dim:
            raise ValueError(f"rank {self.rank} exceeds dimension {self.dim}.")
        if self.head_phases is not None and len(self.head_phases) != self.heads:
            raise ValueError(f"Expected {self.heads} head phases, got {len(self.head_phases)}.")
        if self.parity is not None and not 0 <= self.parity < self.heads:
            raise ValueError(f"parity sector must lie in [0, {self.heads}), got {self.parity}.")
        return self

    @property
    def alpha(self) -> complex:
        return complex(self.alpha_real, self.alpha_imag)


def fock_state(n: int, dim: int = DEFAULT_DIM) -> StateVector:
    check_dim(dim)
    if not 0 <= n < dim:
        raise OutOfRangeError(f"Fock level {n} is outside the truncated space of dimension {dim}.")
    amplitudes = np.zeros(dim, dtype=np.complex128)
    amplitudes[n] = 1.0
    return StateVector(amplitudes)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Un-renormalized amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!) for n < dim."""
    ratios = alpha / np.sqrt(np.arange(1, dim, dtype=np.float64))
    return math.exp(-abs(alpha) ** 2 / 2) * np.concatenate(([1.0 + 0j], np.cumprod(ratios)))


def coherent_state(alpha: complex, dim: int = DEFAULT_DIM) -> StateVector:
    """Coherent state |alpha> truncated to ``dim`` levels and renormalized.

    Warns when |alpha|^2 exceeds dim / 2, where the truncated tail is no longer negligible.
    """
    check_dim(dim)
    if abs(alpha) ** 2 > dim / 2:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.2f} exceeds dim / 2 = {dim / 2}; "
            "the truncated coherent state is inaccurate."
        )
    amplitudes = coherent_amplitudes(alpha, dim)
    return StateVector(amplitudes / np.linalg.norm(amplitudes))


def cat_state(spec: StateSpec) -> StateVector:
    """Normalized superposition sum_k exp(i phi_k) |alpha exp(2 pi i k / m)> of ``spec.heads`` coherent states.

    Raises
    ------
    DegenerateStateError
        If the superposition interferes destructively to zero norm.
    """
    if spec.kind != "cat":
        raise ValueError(f"cat_state expects a 'cat' StateSpec, got '{spec.kind}'.")
    heads = spec.heads
    if spec.head_phases is not None:
        phases = np.asarray(spec.head_phases, dtype=np.float64)
    elif spec.parity is not None:
        phases = -2 * np.pi * np.arange(heads) * spec.parity / heads
    else:
        phases = np.zeros(heads)
    superposition = np.zeros(spec.dim, dtype=np.complex128)
    for k in range(heads):
        head = coherent_state(spec.alpha * np.exp(2j * np.pi * k / heads), spec.dim)
        superposition += np.exp(1j * phases[k]) * head.amplitudes
    norm = np.linalg.norm(superposition)
    if norm < STATE_TOLERANCE:
        raise DegenerateStateError(f"Cat superposition with {heads} heads has vanishing norm {norm:.3e}.")
    return StateVector(superposition / norm)


def snap_state(spec: StateSpec) -> StateVector:
    """Coherent state followed by a number-selective phase ``snap_phase`` on the ``snap_levels``."""
    amplitudes = np.array(coherent_state(spec.alpha, spec.dim).amplitudes)
    for level in spec.snap_levels:
        if not 0 <= level < spec.dim:
            raise OutOfRangeError(f"SNAP level {level} is outside the truncated space of dimension {spec.dim}.")
        amplitudes[level] *= np.exp(1j * spec.snap_phase)
    return StateVector(amplitudes)


def density_from_ket(ket: StateVector) -> DensityMatrix:
    return DensityMatrix(np.outer(ket.amplitudes, ket.amplitudes.conj()))


def random_density(dim: int, rank: int, seed: int) -> DensityMatrix:
    """Random density matrix G G^dag / tr(G G^dag) from a complex Ginibre factor G of shape (dim, rank)."""
    check_dim(dim)
    if not 1 <= rank <= dim:
        raise InvalidDimensionError(f"Rank must lie in [1, {dim}], got {rank}.")
    rng = np.random.default_rng(seed)
    ginibre = (rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))) / np.sqrt(2)
    matrix = ginibre @ ginibre.conj().T
    matrix = (matrix + matrix.conj().T) / 2
    return DensityMatrix(matrix / np.trace(matrix).real)


def maximally_mixed(dim: int) -> DensityMatrix:
    check_dim(dim)
    return DensityMatrix(np.eye(dim, dtype=np.complex128) / dim)


def make_ket(spec: StateSpec) -> StateVector:
    if spec.kind == "fock":
        return fock_state(spec.n, spec.dim)
    if spec.kind == "coherent":
        return coherent_state(spec.alpha, spec.dim)
    if spec.kind == "cat":
        return cat_state(spec)
    if spec.kind == "snap":
        return snap_state(spec)
    raise ValueError(f"State kind '{spec.kind}' is not a pure state.")


@validate_call
def make_state(spec: StateSpec) -> DensityMatrix:
    """Build the density matrix described by ``spec``."""
    if spec.kind == "random":
        return random_density(spec.dim, spec.rank, spec.seed)
    if spec.kind == "maximally-mixed":
        return maximally_mixed(spec.dim)
    return density_from_ket(make_ket(spec))
