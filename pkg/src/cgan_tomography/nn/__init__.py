from .layers import (
    MLP,
    DenseLayer,
    ExpectationLayer,
    activate,
    dense_forward,
    density_matrix_layer,
    expectation_layer,
    pack_density_parameters,
)
from .losses import bce_discriminator, bce_generator, gradient_penalty, l1
from .optimizers import AdamState, adam_step, schedule_lr

__all__ = [
    "MLP",
    "DenseLayer",
    "ExpectationLayer",
    "activate",
    "dense_forward",
    "density_matrix_layer",
    "expectation_layer",
    "pack_density_parameters",
    "bce_discriminator",
    "bce_generator",
    "gradient_penalty",
    "l1",
    "AdamState",
    "adam_step",
    "schedule_lr",
]
