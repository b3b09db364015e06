from .cgan import (
    Discriminator,
    Generator,
    build_qst_cgan,
    discriminator_step,
    fit,
    generator_step,
    reconstruct,
    single_shot,
    train_step,
)
from .config import (
    ArchitectureConfig,
    DatasetSpec,
    ImleConfig,
    OptimizerConfig,
    PretrainConfig,
    TrainConfig,
    load_config,
)
from .imle import completeness_inverse, imle_step, r_operator, reconstruct_imle
from .linear_inversion import linear_inversion, project_to_density_matrix
from .pretrain import PretrainResult, generate_dataset, pretrain
from .reports import RunReport

__all__ = [
    "Discriminator",
    "Generator",
    "build_qst_cgan",
    "discriminator_step",
    "fit",
    "generator_step",
    "reconstruct",
    "single_shot",
    "train_step",
    "ArchitectureConfig",
    "DatasetSpec",
    "ImleConfig",
    "OptimizerConfig",
    "PretrainConfig",
    "TrainConfig",
    "load_config",
    "completeness_inverse",
    "imle_step",
    "r_operator",
    "reconstruct_imle",
    "linear_inversion",
    "project_to_density_matrix",
    "PretrainResult",
    "generate_dataset",
    "pretrain",
    "RunReport",
]
