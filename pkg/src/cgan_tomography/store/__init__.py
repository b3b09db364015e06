from .artifacts import (
    FORMAT_VERSION,
    MAGIC,
    load_data,
    load_density_matrix,
    load_grid_csv,
    load_measurement_set,
    load_report,
    load_report_csv,
    load_state_spec,
    read_artifact,
    save_data,
    save_density_matrix,
    save_grid_csv,
    save_measurement_set,
    save_report,
    save_report_csv,
    save_table_csv,
    write_artifact,
    write_manifest,
)
from .checkpoints import load_checkpoint, save_checkpoint
from .datasets import load_dataset, save_dataset

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "load_data",
    "load_density_matrix",
    "load_grid_csv",
    "load_measurement_set",
    "load_report",
    "load_report_csv",
    "load_state_spec",
    "read_artifact",
    "save_data",
    "save_density_matrix",
    "save_grid_csv",
    "save_measurement_set",
    "save_report",
    "save_report_csv",
    "save_table_csv",
    "write_artifact",
    "write_manifest",
    "load_checkpoint",
    "save_checkpoint",
    "load_dataset",
    "save_dataset",
]
