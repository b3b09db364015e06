"""Bosonic operators in a truncated Fock space."""

import numpy as np
from scipy.linalg import eigh

from ..exceptions import InvalidDimensionError

DEFAULT_DIM = 32


def check_dim(dim: int) -> None:
    if dim < 2:
        raise InvalidDimensionError(f"Hilbert-space dimension must be at least 2, got {dim}.")


def annihilation_op(dim: int) -> np.ndarray:
    """Annihilation operator a with a[n-1, n] = sqrt(n).

    Parameters
    ----------
    dim : int
        Truncated Hilbert-space dimension N (at least 2).

    Returns
    -------
    np.ndarray
        Complex (N, N) matrix.
    """
    check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=np.float64)), k=1).astype(np.complex128)


def creation_op(dim: int) -> np.ndarray:
    return annihilation_op(dim).conj().T


def number_op(dim: int) -> np.ndarray:
    check_dim(dim)
    return np.diag(np.arange(dim, dtype=np.float64)).astype(np.complex128)


def default_pad(dim: int) -> int:
    return dim // 2


def padded_displacement_op(beta: complex, total_dim: int) -> np.ndarray:
    """Full D(beta) = exp(beta a^dag - beta^* a) in dimension ``total_dim``, without truncation.

    The anti-Hermitian generator X is exponentiated through the Hermitian matrix H = iX, so that
    D = V exp(-i lambda) V^dag with H = V lambda V^dag.
    """
    check_dim(total_dim)
    a = annihilation_op(total_dim)
    generator = beta * a.conj().T - np.conj(beta) * a
    eigenvalues, eigenvectors = eigh(1j * generator)
    return (eigenvectors * np.exp(-1j * eigenvalues)) @ eigenvectors.conj().T


def displacement_op(beta: complex, dim: int = DEFAULT_DIM, pad: int | None = None) -> np.ndarray:
    """Displacement operator computed in dimension ``dim + pad`` and truncated to ``dim``.

    Parameters
    ----------
    beta : complex
        Phase-space displacement.
    dim : int
        Truncated Hilbert-space dimension N.
    pad : int, optional
        Extra Fock levels used while exponentiating, default N // 2.

    Returns
    -------
    np.ndarray
        Complex (N, N) matrix; numerically unitary on the low-photon block when |beta|^2 << N.
    """
    check_dim(dim)
    pad = default_pad(dim) if pad is None else pad
    if pad < 0:
        raise InvalidDimensionError(f"Padding must be non-negative, got {pad}.")
    return padded_displacement_op(beta, dim + pad)[:dim, :dim]


def parity_op(dim: int) -> np.ndarray:
    check_dim(dim)
    return np.diag((-1.0) ** np.arange(dim)).astype(np.complex128)
