"""Validated configuration models and the layered config loader.

Defaults ship in ``metadata/default_config.yaml``. A user file (YAML or JSON, same section layout)
is merged on top, then explicit overrides such as command-line flags.
"""

from copy import deepcopy
from pathlib import Path
from typing import Literal, Union

from neuroconv.utils import dict_deep_update, load_dict_from_file
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..nn.layers import Activation
from ..physics.measure import NoiseKind

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "metadata" / "default_config.yaml"


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OptimizerConfig(_Config):
    lr: float = Field(default=2e-4, gt=0)
    beta1: float = Field(default=0.5, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    decay_rate: float | None = Field(default=0.98, gt=0)
    decay_every: int = Field(default=500, ge=1)


class ArchitectureConfig(_Config):
    generator_hidden: list[int] = Field(default_factory=lambda: [256, 256])
    discriminator_hidden: list[int] = Field(default_factory=lambda: [256, 128])
    activation: Activation = "leaky_relu"
    slope: float = 0.2
    init_std: float = Field(default=0.05, gt=0)


class TrainConfig(_Config):
    """Hyperparameters of one adversarial reconstruction run."""

    iterations: int = Field(default=5000, ge=1)
    lambda_l1: float = Field(default=100.0, ge=0)
    lambda_gp: float = Field(default=0.0, ge=0)
    seed: int = 0
    log_every: int = Field(default=10, ge=1)
    fidelity_target: float | None = Field(default=0.999, gt=0, le=1)
    saturating_generator_loss: bool = False
    generator: OptimizerConfig = Field(default_factory=OptimizerConfig)
    discriminator: OptimizerConfig = Field(default_factory=OptimizerConfig)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)


class PretrainConfig(_Config):
    epochs: int = Field(default=10, ge=1)
    validation_fraction: float = Field(default=0.1, ge=0, lt=1)
    seed: int = 0
    train: TrainConfig = Field(default_factory=lambda: TrainConfig(lambda_gp=10.0, fidelity_target=None))


class ImleConfig(_Config):
    max_iterations: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-10, gt=0)
    fidelity_target: float | None = Field(default=0.999, gt=0, le=1)
    g_correction: bool = False
    initial: Literal["random", "maximally-mixed"] = "random"
    seed: int = 0
    log_every: int = Field(default=1, ge=1)


class DatasetSpec(_Config):
    """Family of random cat states used to pre-train a generator."""

    family: Literal["cat"] = "cat"
    dim: int = Field(default=32, ge=2)
    alpha_min: float = Field(default=1.0, ge=0)
    alpha_max: float = Field(default=3.0, ge=0)
    heads_min: int = Field(default=1, ge=1, le=6)
    heads_max: int = Field(default=6, ge=1, le=6)
    count: int = Field(default=500, ge=1)
    seed: int = 0
    random_alpha_phase: bool = True
    random_head_phases: bool = False
    noise: NoiseKind = "none"
    shots: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.alpha_min > self.alpha_max:
            raise ValueError(f"alpha_min {self.alpha_min} exceeds alpha_max {self.alpha_max}.")
        if self.heads_min > self.heads_max:
            raise ValueError(f"heads_min {self.heads_min} exceeds heads_max {self.heads_max}.")
        if self.noise == "binomial" and self.shots is None:
            raise ValueError("Binomial noise needs a shot count.")
        return self


class ConvergenceBenchmarkConfig(_Config):
    dim: int = Field(default=32, ge=2)
    alpha: float = 2.0
    heads: int = Field(default=2, ge=1, le=6)
    grid: int = Field(default=32, ge=1)
    extent: float = Field(default=5.0, gt=0)
    seeds: int = Field(default=10, ge=1)
    cgan_iterations: int = Field(default=5000, ge=1)
    imle_iterations: int = Field(default=5000, ge=1)
    fidelity_threshold: float = Field(default=0.99, gt=0, le=1)


class DataEfficiencyBenchmarkConfig(_Config):
    dim: int = Field(default=32, ge=2)
    alpha: float = 2.0
    heads: int = Field(default=2, ge=1, le=6)
    radius: float = Field(default=5.0, gt=0)
    counts: list[int] = Field(default_factory=lambda: [16, 32, 64, 100, 128, 256, 512, 1024])
    seeds: int = Field(default=5, ge=1)
    cgan_iterations: int = Field(default=3000, ge=1)
    imle_iterations: int = Field(default=3000, ge=1)


class PretrainingBenchmarkConfig(_Config):
    dim: int = Field(default=16, ge=2)
    grid: int = Field(default=16, ge=1)
    extent: float = Field(default=4.0, gt=0)
    train_count: int = Field(default=500, ge=1)
    test_count: int = Field(default=50, ge=1)
    alpha_min: float = 1.0
    alpha_max: float = 2.5
    heads_min: int = Field(default=1, ge=1, le=6)
    heads_max: int = Field(default=2, ge=1, le=6)
    epochs: int = Field(default=10, ge=1)
    fine_tune_steps: int = Field(default=50, ge=0)
    seed: int = 0


def load_config(config_file_path: Union[str, Path, None] = None, overrides: dict | None = None) -> dict:
    """Merge packaged defaults, an optional user file and explicit overrides (highest precedence).

    Parameters
    ----------
    config_file_path : Union[str, Path, None]
        YAML or JSON file using the section layout of the packaged defaults.
    overrides : dict, optional
        Nested dictionary of values that win over both files, typically command-line flags.

    Returns
    -------
    dict
        The effective configuration, suitable for echoing into a run manifest.
    """
    config = load_dict_from_file(DEFAULT_CONFIG_PATH)
    if config_file_path is not None:
        config_file_path = Path(config_file_path)
        if not config_file_path.exists():
            raise FileNotFoundError(f"Config file {config_file_path} does not exist.")
        config = dict_deep_update(config, load_dict_from_file(config_file_path), append_list=False)
    if overrides:
        config = dict_deep_update(config, overrides, append_list=False)
    return config


def train_config(config: dict) -> TrainConfig:
    return TrainConfig(**config["train"])


def imle_config(config: dict) -> ImleConfig:
    return ImleConfig(**config["imle"])


def pretrain_config(config: dict) -> PretrainConfig:
    """Pre-training inherits the ``train`` section and applies its own ``pretrain.train`` overrides."""
    section = deepcopy(config["pretrain"])
    section["train"] = dict_deep_update(deepcopy(config["train"]), section.get("train") or {}, append_list=False)
    return PretrainConfig(**section)


def dataset_spec(config: dict) -> DatasetSpec:
    return DatasetSpec(**config["dataset"])
