import numpy as np
import pytest

from cgan_tomography.physics.measure import MeasurementSet, husimi_ops, square_grid
from cgan_tomography.reconstruction.config import ArchitectureConfig, OptimizerConfig, TrainConfig


@pytest.fixture(scope="session")
def husimi_set_4():
    """Informationally complete Husimi set for N = 4 (6 x 6 grid, |Re beta|, |Im beta| <= 2.5)."""
    return husimi_ops(square_grid(2.5, 6, 6), dim=4)


@pytest.fixture(scope="session")
def husimi_set_8():
    return husimi_ops(square_grid(3.0, 8, 8), dim=8)


def _basis_projectors(basis: np.ndarray) -> np.ndarray:
    return np.einsum("ik,jk->kij", basis, basis.conj())


@pytest.fixture(scope="session")
def povm_set_6():
    """Three orthonormal bases in dimension 6, each weighted 1/3, so the operators sum to the identity."""
    dim = 6
    rng = np.random.default_rng(7)
    fock = np.eye(dim, dtype=np.complex128)
    indices = np.arange(dim)
    fourier = np.exp(2j * np.pi * np.outer(indices, indices) / dim) / np.sqrt(dim)
    random_basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    operators = np.concatenate([_basis_projectors(basis) for basis in (fock, fourier, random_basis)]) / 3
    return MeasurementSet.from_operators(operators)


@pytest.fixture
def small_train_config():
    return TrainConfig(
        iterations=20,
        log_every=5,
        fidelity_target=None,
        generator=OptimizerConfig(lr=1e-3),
        discriminator=OptimizerConfig(lr=1e-3),
        architecture=ArchitectureConfig(generator_hidden=[16], discriminator_hidden=[16]),
    )
