"""Pre-training datasets as line-delimited JSON: one header line, then one record per line."""

import io
import json
from pathlib import Path

import numpy as np

from .artifacts import (
    FORMAT_VERSION,
    MAGIC,
    PathType,
    atomic_write_text,
    canonical_json,
    checksum,
    decode_complex,
    encode_complex,
    measurement_set_from_payload,
    measurement_set_payload,
)
from ..exceptions import ChecksumError, DatasetError, MalformedPayloadError, TomographyError, VersionMismatchError
from ..physics.measure import DataVector, MeasurementSet
from ..physics.states import DensityMatrix


def save_dataset(
    file_path: PathType,
    dataset: list[tuple[DataVector, DensityMatrix]],
    measurement_set: MeasurementSet,
    spec: dict | None = None,
) -> Path:
    """Header ``{magic, format_version, kind, count, measurement, spec, checksum}`` then records.

    Each record line carries its own checksum so a damaged line is reported individually.
    """
    header = {"count": len(dataset), "measurement": measurement_set_payload(measurement_set), "spec": spec}
    buffer = io.StringIO()
    buffer.write(
        canonical_json(
            {
                "magic": MAGIC,
                "format_version": FORMAT_VERSION,
                "kind": "dataset",
                "checksum": checksum(header),
                **header,
            }
        )
        + "\n"
    )
    for data, state in dataset:
        if len(data) != len(measurement_set):
            raise DatasetError(f"Record has {len(data)} values, the set has {len(measurement_set)} operators.")
        record = {"data": data.values.tolist(), "kind": data.kind, "state": encode_complex(state.matrix)}
        buffer.write(canonical_json({**record, "checksum": checksum(record)}) + "\n")
    return atomic_write_text(file_path, buffer.getvalue())


def _parse_line(line: str, source: str, number: int) -> dict:
    try:
        return json.loads(line)
    except json.JSONDecodeError as error:
        raise MalformedPayloadError(f"{source} line {number} is not valid JSON: {error}")


def load_dataset(file_path: PathType) -> tuple[list[tuple[DataVector, DensityMatrix]], MeasurementSet]:
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Dataset {file_path} does not exist.")
    source = str(file_path)
    lines = [line for line in file_path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise MalformedPayloadError(f"{source} is empty.")

    header = _parse_line(lines[0], source, 1)
    if not isinstance(header, dict) or header.get("magic") != MAGIC or header.get("kind") != "dataset":
        raise MalformedPayloadError(f"{source} does not start with a {MAGIC} dataset header.")
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionMismatchError(f"{source} has format version {header.get('format_version')}.")
    body = {key: header.get(key) for key in ("count", "measurement", "spec")}
    if header.get("checksum") != checksum(body):
        raise ChecksumError(f"{source} header checksum does not match.")
    if body["count"] != len(lines) - 1:
        raise MalformedPayloadError(f"{source} announces {body['count']} records but holds {len(lines) - 1}.")

    measurement_set = measurement_set_from_payload(body["measurement"], source)
    dataset = []
    for number, line in enumerate(lines[1:], start=2):
        record = _parse_line(line, source, number)
        if not isinstance(record, dict) or not {"data", "state", "checksum"} <= set(record):
            raise MalformedPayloadError(f"{source} line {number} is not a dataset record.")
        stored = record.pop("checksum")
        if stored != checksum(record):
            raise ChecksumError(f"{source} line {number} checksum does not match.")
        try:
            data = DataVector(values=np.asarray(record["data"], dtype=np.float64), kind=record.get("kind", "custom"))
            state = DensityMatrix(decode_complex(record["state"]))
        except (TypeError, ValueError, AssertionError, TomographyError) as error:
            raise MalformedPayloadError(f"{source} line {number} holds an invalid record: {error}")
        if len(data) != len(measurement_set) or state.dim != measurement_set.dim:
            raise DatasetError(f"{source} line {number} does not match the dataset measurement set.")
        dataset.append((data, state))
    return dataset, measurement_set
