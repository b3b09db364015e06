"""Adversarial, L1 and gradient-penalty losses."""

from typing import Callable

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

PENALTY_STEP = 1e-4


def bce_discriminator(real_scores: Tensor, fake_scores: Tensor) -> Tensor:
    """-mean[log D(d, d) + log(1 - D(d, d_G))]; 2 log 2 at equilibrium."""
    return -ad.mean(ad.log(real_scores) + ad.log(1.0 - fake_scores))


def bce_generator(fake_scores: Tensor, saturating: bool = False) -> Tensor:
    """Non-saturating -mean[log D(d, d_G)], or the minimax form mean[log(1 - D(d, d_G))]."""
    if saturating:
        return ad.mean(ad.log(1.0 - fake_scores))
    return -ad.mean(ad.log(fake_scores))


def l1(data: Tensor, generated: Tensor) -> Tensor:
    return ad.mean(ad.abs(ad.as_tensor(data) - generated))


def gradient_penalty(
    discriminator: Callable[[Tensor, Tensor], Tensor],
    data: Tensor,
    generated: Tensor,
    rng: np.random.Generator | None = None,
    epsilon: float = PENALTY_STEP,
) -> Tensor:
    """(||grad_x mean D(d, x)|| - 1)^2 at a random interpolate x between ``data`` and ``generated``.

    The norm is the directional derivative along the normalized input gradient, estimated by a
    central difference of step ``epsilon``, so the result stays differentiable with respect to the
    discriminator parameters using first-order gradients only.

    Parameters
    ----------
    discriminator : callable
        ``discriminator(condition, candidate)`` returning per-operator scores.
    data, generated : Tensor
        Measured and generated statistics; ``generated`` should be detached.
    rng : np.random.Generator, optional
        Source of the interpolation weight.
    epsilon : float
        Finite-difference step along the gradient direction.
    """
    rng = np.random.default_rng() if rng is None else rng
    data, generated = ad.as_tensor(data), ad.as_tensor(generated)
    weight = rng.uniform()
    interpolate = weight * data.values + (1 - weight) * generated.values

    interpolated = Tensor(interpolate, requires_grad=True)
    ad.backward(ad.mean(discriminator(data, interpolated)), wrt=[interpolated])
    gradient = interpolated.grad
    norm = np.linalg.norm(gradient)
    if norm == 0.0:
        return Tensor(1.0)
    direction = gradient / norm

    upper = ad.mean(discriminator(data, Tensor(interpolate + epsilon * direction)))
    lower = ad.mean(discriminator(data, Tensor(interpolate - epsilon * direction)))
    slope = (upper - lower) / (2 * epsilon)
    return ad.square(slope - 1.0)
