"""JSON artifacts, line-delimited datasets, CSV exports and run manifests.

Every JSON artifact is an envelope ``{"magic", "format_version", "kind", "checksum", "payload"}``
whose checksum is the SHA-256 of the canonical (sorted, compact) payload text. Floats are written
with Python's shortest round-trip representation, so doubles survive a save/load cycle exactly.
Complex matrices are nested lists of ``[re, im]`` pairs in row-major order.
"""

import hashlib
import io
import json
import os
import platform
import tempfile
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..exceptions import ChecksumError, MalformedPayloadError, TomographyError, VersionMismatchError
from ..physics.measure import DataVector, MeasurementRecipe, MeasurementSet
from ..physics.states import DensityMatrix, StateSpec
from ..reconstruction.reports import REPORT_COLUMNS, RunReport

MAGIC = "CGAN-TOMOGRAPHY"
FORMAT_VERSION = 1
CSV_HEADER = f"# {MAGIC} format_version={FORMAT_VERSION}"

PathType = Union[str, Path]


def atomic_write_text(file_path: PathType, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``file_path`` and rename it into place."""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    descriptor, temporary_path = tempfile.mkstemp(dir=file_path.parent, prefix=f".{file_path.name}.", suffix=".tmp")
    try:
        with os.fdopen(descriptor, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(temporary_path, file_path)
    except BaseException:
        if os.path.exists(temporary_path):
            os.remove(temporary_path)
        raise
    return file_path


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def checksum(payload) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def encode_complex(array: np.ndarray) -> list:
    array = np.asarray(array, dtype=np.complex128)
    return np.stack([array.real, array.imag], axis=-1).tolist()


def decode_complex(value) -> np.ndarray:
    try:
        array = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as error:
        raise MalformedPayloadError(f"Complex array is not numeric: {error}")
    if array.ndim < 1 or array.shape[-1] != 2:
        raise MalformedPayloadError(f"Complex array must end in [re, im] pairs, got shape {array.shape}.")
    return array[..., 0] + 1j * array[..., 1]


def write_artifact(file_path: PathType, kind: str, payload: dict) -> Path:
    envelope = {
        "magic": MAGIC,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "checksum": checksum(payload),
        "payload": payload,
    }
    return atomic_write_text(file_path, json.dumps(envelope, allow_nan=False) + "\n")


def _check_envelope(envelope, kind: str | None, source: str) -> dict:
    if not isinstance(envelope, dict) or envelope.get("magic") != MAGIC:
        raise MalformedPayloadError(f"{source} is not a {MAGIC} artifact.")
    if envelope.get("format_version") != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{source} has format version {envelope.get('format_version')}, this build reads {FORMAT_VERSION}."
        )
    if kind is not None and envelope.get("kind") != kind:
        raise MalformedPayloadError(f"{source} holds a '{envelope.get('kind')}' artifact, expected '{kind}'.")
    if "payload" not in envelope:
        raise MalformedPayloadError(f"{source} has no payload.")
    try:
        expected = checksum(envelope["payload"])
    except (TypeError, ValueError) as error:
        raise MalformedPayloadError(f"{source} payload is not canonical JSON: {error}")
    if envelope.get("checksum") != expected:
        raise ChecksumError(f"{source} checksum does not match its payload.")
    return envelope["payload"]


def read_artifact(file_path: PathType, kind: str | None = None) -> dict:
    """Payload of a JSON artifact after magic, version, kind and checksum checks.

    Raises
    ------
    FileNotFoundError
        If ``file_path`` does not exist.
    MalformedPayloadError, VersionMismatchError, ChecksumError
        For unparsable or truncated files, unknown versions and corrupted payloads respectively.
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Artifact {file_path} does not exist.")
    try:
        envelope = json.loads(file_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as error:
        raise MalformedPayloadError(f"{file_path} is not valid JSON: {error}")
    return _check_envelope(envelope, kind, str(file_path))


def _field(payload: dict, key: str, source: str):
    try:
        return payload[key]
    except (KeyError, TypeError):
        raise MalformedPayloadError(f"{source} is missing '{key}'.")


def density_matrix_payload(rho: DensityMatrix, spec: StateSpec | None = None) -> dict:
    return {
        "dim": rho.dim,
        "matrix": encode_complex(rho.matrix),
        "spec": None if spec is None else spec.model_dump(),
    }


def density_matrix_from_payload(payload: dict, source: str = "state") -> DensityMatrix:
    matrix = decode_complex(_field(payload, "matrix", source))
    if matrix.ndim != 2 or matrix.shape != (payload.get("dim"), payload.get("dim")):
        raise MalformedPayloadError(f"{source} matrix has shape {matrix.shape}, expected dim {payload.get('dim')}.")
    try:
        return DensityMatrix(matrix)
    except TomographyError as error:
        raise MalformedPayloadError(f"{source} is not a valid density matrix: {error}")


def save_density_matrix(file_path: PathType, rho: DensityMatrix, spec: StateSpec | None = None) -> Path:
    return write_artifact(file_path, "state", density_matrix_payload(rho, spec))


def load_density_matrix(file_path: PathType) -> DensityMatrix:
    return density_matrix_from_payload(read_artifact(file_path, "state"), str(file_path))


def load_state_spec(file_path: PathType) -> StateSpec | None:
    spec = read_artifact(file_path, "state").get("spec")
    return None if spec is None else StateSpec(**spec)


def measurement_set_payload(measurement_set: MeasurementSet) -> dict:
    """Recipe when the set has one, raw operators for ``custom`` sets."""
    recipe = measurement_set.recipe
    if recipe is not None:
        return {"recipe": recipe.model_dump()}
    return {"dim": measurement_set.dim, "operators": encode_complex(measurement_set.operators)}


def measurement_set_from_payload(payload: dict, source: str = "measurement set") -> MeasurementSet:
    if isinstance(payload, dict) and "recipe" in payload:
        try:
            return MeasurementRecipe(**payload["recipe"]).build()
        except ValidationError as error:
            raise MalformedPayloadError(f"{source} recipe is invalid: {error}")
    operators = decode_complex(_field(payload, "operators", source))
    if operators.ndim != 3:
        raise MalformedPayloadError(f"{source} operators have shape {operators.shape}, expected (M, N, N).")
    return MeasurementSet.from_operators(operators)


def save_measurement_set(file_path: PathType, measurement_set: MeasurementSet) -> Path:
    return write_artifact(file_path, "measurement-set", measurement_set_payload(measurement_set))


def load_measurement_set(file_path: PathType) -> MeasurementSet:
    return measurement_set_from_payload(read_artifact(file_path, "measurement-set"), str(file_path))


def save_data(file_path: PathType, data: DataVector, measurement_set: MeasurementSet) -> Path:
    """Data vector together with the measurement set it was taken with."""
    payload = {
        "values": data.values.tolist(),
        "kind": data.kind,
        "shots": data.shots,
        "noise": data.noise,
        "sigma": data.sigma,
        "measurement": measurement_set_payload(measurement_set),
    }
    return write_artifact(file_path, "data", payload)


def load_data(file_path: PathType) -> tuple[DataVector, MeasurementSet]:
    payload = read_artifact(file_path, "data")
    source = str(file_path)
    measurement_set = measurement_set_from_payload(_field(payload, "measurement", source), source)
    try:
        data = DataVector(
            values=np.asarray(_field(payload, "values", source), dtype=np.float64),
            kind=payload.get("kind", "custom"),
            shots=payload.get("shots"),
            noise=payload.get("noise", "none"),
            sigma=payload.get("sigma"),
        )
    except (TypeError, ValueError, AssertionError, TomographyError) as error:
        raise MalformedPayloadError(f"{source} values are invalid: {error}")
    if len(data) != len(measurement_set):
        raise MalformedPayloadError(f"{source} has {len(data)} values for {len(measurement_set)} operators.")
    return data, measurement_set


def _nan_to_none(value):
    return None if isinstance(value, float) and np.isnan(value) else value


def save_report(file_path: PathType, report: RunReport) -> Path:
    payload = {
        "method": report.method,
        "config": report.config,
        "iterations": report.iterations,
        "rows": [{key: _nan_to_none(value) for key, value in row.items()} for row in report.rows],
        "final_state": None if report.final_state is None else density_matrix_payload(report.final_state),
    }
    return write_artifact(file_path, "report", payload)


def load_report(file_path: PathType) -> RunReport:
    payload = read_artifact(file_path, "report")
    source = str(file_path)
    rows = [
        {column: (np.nan if row.get(column) is None else row[column]) for column in REPORT_COLUMNS}
        for row in _field(payload, "rows", source)
    ]
    for row in rows:
        row["iteration"] = int(row["iteration"])
    final_state = payload.get("final_state")
    return RunReport(
        method=_field(payload, "method", source),
        config=payload.get("config") or {},
        rows=rows,
        final_state=None if final_state is None else density_matrix_from_payload(final_state, source),
        iterations=payload.get("iterations", 0),
    )


def _write_csv(file_path: PathType, frame: pd.DataFrame) -> Path:
    buffer = io.StringIO()
    buffer.write(CSV_HEADER + "\n")
    frame.to_csv(buffer, index=False, float_format="%.17g")
    return atomic_write_text(file_path, buffer.getvalue())


def _read_csv(file_path: PathType, columns: list[str]) -> pd.DataFrame:
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"CSV file {file_path} does not exist.")
    with open(file_path, encoding="utf-8") as f:
        first_line = f.readline().strip()
    if not first_line.startswith(f"# {MAGIC}"):
        raise MalformedPayloadError(f"{file_path} does not start with the '{CSV_HEADER}' line.")
    if first_line != CSV_HEADER:
        raise VersionMismatchError(f"{file_path} header '{first_line}' does not match '{CSV_HEADER}'.")
    try:
        frame = pd.read_csv(file_path, skiprows=1)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise MalformedPayloadError(f"{file_path} is not a valid CSV table: {error}")
    missing = set(columns) - set(frame.columns)
    if missing:
        raise MalformedPayloadError(f"{file_path} is missing columns {sorted(missing)}.")
    return frame


def save_report_csv(file_path: PathType, report: RunReport) -> Path:
    return _write_csv(file_path, report.to_dataframe())


def load_report_csv(file_path: PathType) -> pd.DataFrame:
    return _read_csv(file_path, REPORT_COLUMNS)


def save_table_csv(file_path: PathType, frame: pd.DataFrame) -> Path:
    return _write_csv(file_path, frame)


def save_grid_csv(file_path: PathType, points: np.ndarray, values: np.ndarray) -> Path:
    """Phase-space samples as columns ``re_beta, im_beta, value``."""
    points = np.asarray(points, dtype=np.complex128).ravel()
    frame = pd.DataFrame({"re_beta": points.real, "im_beta": points.imag, "value": np.asarray(values).ravel()})
    return _write_csv(file_path, frame)


def load_grid_csv(file_path: PathType) -> tuple[np.ndarray, np.ndarray]:
    frame = _read_csv(file_path, ["re_beta", "im_beta", "value"])
    if frame[["re_beta", "im_beta", "value"]].isna().any().any():
        raise MalformedPayloadError(f"{file_path} has empty cells.")
    points = frame["re_beta"].to_numpy(float) + 1j * frame["im_beta"].to_numpy(float)
    return points, frame["value"].to_numpy(float)


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in ("cgan-tomography", "numpy", "scipy", "pandas", "h5py", "pydantic", "neuroconv"):
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def write_manifest(file_path: PathType, command: str, config: dict, seeds: dict | None = None, **extra) -> Path:
    """Effective configuration, seeds and package versions of one run."""
    payload = {
        "command": command,
        "config": config,
        "seeds": seeds or {},
        "versions": package_versions(),
        **extra,
    }
    return write_artifact(file_path, "manifest", json.loads(json.dumps(payload, default=str)))
