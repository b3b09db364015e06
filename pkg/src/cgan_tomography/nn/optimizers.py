"""Adam with optional exponential learning-rate decay."""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autodiff import Tensor
from ..exceptions import ShapeError


@dataclass
class AdamState:
    """Moment estimates and hyperparameters for one set of parameters.

    ``decay_rate=None`` keeps the learning rate constant; otherwise it is multiplied by
    ``decay_rate`` once every ``decay_every`` steps.
    """

    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    decay_rate: float | None = 0.98
    decay_every: int = 500
    step: int = 0
    first_moments: list[np.ndarray] = field(default_factory=list)
    second_moments: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        assert self.step >= 0, "Adam step count must be non-negative."
        assert self.decay_every >= 1, "decay_every must be at least 1."


def schedule_lr(state: AdamState) -> float:
    if state.decay_rate is None:
        return state.lr
    return state.lr * state.decay_rate ** (state.step // state.decay_every)


def adam_step(state: AdamState, params: Sequence[Tensor], grads: Sequence[np.ndarray] | None = None) -> None:
    """Update ``params`` in place with bias-corrected Adam; gradients default to ``param.grad``."""
    grads = [param.grad for param in params] if grads is None else list(grads)
    if not state.first_moments:
        state.first_moments = [np.zeros_like(param.values) for param in params]
        state.second_moments = [np.zeros_like(param.values) for param in params]
    if len(grads) != len(params) or len(state.first_moments) != len(params):
        raise ShapeError(
            f"Adam got {len(params)} parameters, {len(grads)} gradients, {len(state.first_moments)} moments."
        )

    lr = schedule_lr(state)
    state.step += 1
    correction1 = 1 - state.beta1**state.step
    correction2 = 1 - state.beta2**state.step
    for param, grad, first, second in zip(params, grads, state.first_moments, state.second_moments):
        if grad.shape != param.shape or first.shape != param.shape:
            raise ShapeError(f"Gradient shape {grad.shape} does not match parameter shape {param.shape}.")
        first *= state.beta1
        first += (1 - state.beta1) * grad
        second *= state.beta2
        second += (1 - state.beta2) * grad**2
        param.values -= lr * (first / correction1) / (np.sqrt(second / correction2) + state.epsilon)
