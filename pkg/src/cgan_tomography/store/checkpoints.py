"""Generator/discriminator checkpoints in HDF5."""

import hashlib
import json
import os
import tempfile
from pathlib import Path

import h5py
import numpy as np
from pydantic import ValidationError

from .artifacts import (
    FORMAT_VERSION,
    MAGIC,
    PathType,
    canonical_json,
    measurement_set_from_payload,
    measurement_set_payload,
)
from ..exceptions import ChecksumError, MalformedPayloadError, ShapeError, VersionMismatchError
from ..physics.measure import MeasurementSet
from ..reconstruction.cgan import Discriminator, Generator, build_qst_cgan
from ..reconstruction.config import TrainConfig

NETWORKS = ("generator", "discriminator")


def _digest(config_text: str, measurement_text: str, states: dict[str, dict[str, np.ndarray]]) -> str:
    digest = hashlib.sha256()
    digest.update(config_text.encode("utf-8"))
    digest.update(measurement_text.encode("utf-8"))
    for network in NETWORKS:
        for name in sorted(states[network]):
            digest.update(f"{network}/{name}".encode("utf-8"))
            digest.update(np.ascontiguousarray(states[network][name], dtype="<f8").tobytes())
    return digest.hexdigest()


def save_checkpoint(
    file_path: PathType,
    generator: Generator,
    discriminator: Discriminator,
    measurement_set: MeasurementSet,
    config: TrainConfig,
) -> Path:
    """Parameters of both networks plus the config and measurement set needed to rebuild them.

    The file is written to a temporary sibling and renamed into place.
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    states = {"generator": generator.trunk.state_dict(), "discriminator": discriminator.trunk.state_dict()}
    config_text = canonical_json(config.model_dump())
    measurement_text = canonical_json(measurement_set_payload(measurement_set))

    descriptor, temporary_path = tempfile.mkstemp(dir=file_path.parent, prefix=f".{file_path.name}.", suffix=".tmp")
    os.close(descriptor)
    try:
        with h5py.File(temporary_path, "w") as f:
            f.attrs["magic"] = MAGIC
            f.attrs["format_version"] = FORMAT_VERSION
            f.attrs["config"] = config_text
            f.attrs["measurement"] = measurement_text
            f.attrs["checksum"] = _digest(config_text, measurement_text, states)
            for network in NETWORKS:
                group = f.create_group(network)
                for name, values in states[network].items():
                    group.create_dataset(name, data=values)
        os.replace(temporary_path, file_path)
    except BaseException:
        if os.path.exists(temporary_path):
            os.remove(temporary_path)
        raise
    return file_path


def _read_states(group: h5py.Group) -> dict[str, np.ndarray]:
    states = {}

    def collect(name, item):
        if isinstance(item, h5py.Dataset):
            states[name] = item[()]

    group.visititems(collect)
    return states


def load_checkpoint(file_path: PathType) -> tuple[Generator, Discriminator, MeasurementSet, TrainConfig]:
    """Rebuild the networks stored by ``save_checkpoint``.

    Raises
    ------
    FileNotFoundError
        If ``file_path`` does not exist.
    MalformedPayloadError, VersionMismatchError, ChecksumError
        For unreadable or truncated files, unknown versions and altered parameters respectively.
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Checkpoint {file_path} does not exist.")
    try:
        with h5py.File(file_path, "r") as f:
            attrs = {key: f.attrs[key] for key in f.attrs}
            states = {network: _read_states(f[network]) for network in NETWORKS if network in f}
    except OSError as error:
        raise MalformedPayloadError(f"{file_path} is not a readable HDF5 checkpoint: {error}")

    if attrs.get("magic") != MAGIC or set(states) != set(NETWORKS):
        raise MalformedPayloadError(f"{file_path} is not a {MAGIC} checkpoint.")
    if int(attrs.get("format_version", -1)) != FORMAT_VERSION:
        raise VersionMismatchError(f"{file_path} has format version {attrs.get('format_version')}.")
    config_text, measurement_text = str(attrs.get("config", "")), str(attrs.get("measurement", ""))
    if attrs.get("checksum") != _digest(config_text, measurement_text, states):
        raise ChecksumError(f"{file_path} parameters do not match the stored checksum.")

    try:
        config = TrainConfig(**json.loads(config_text))
        measurement_set = measurement_set_from_payload(json.loads(measurement_text), str(file_path))
    except (json.JSONDecodeError, ValidationError) as error:
        raise MalformedPayloadError(f"{file_path} has an invalid embedded config: {error}")
    generator, discriminator = build_qst_cgan(measurement_set, config)
    try:
        generator.trunk.load_state_dict(states["generator"])
        discriminator.trunk.load_state_dict(states["discriminator"])
    except (KeyError, ShapeError) as error:
        raise MalformedPayloadError(f"{file_path} parameters do not fit the stored architecture: {error}")
    return generator, discriminator, measurement_set, config
