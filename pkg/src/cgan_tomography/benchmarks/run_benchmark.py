"""Benchmark drivers comparing QST-CGAN with iMLE: fidelity vs iterations, fidelity vs number of
data points, and pre-training followed by single-shot reconstruction."""

import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from pprint import pformat
from typing import Callable, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..physics.measure import DisplacementRecipe, MeasurementRecipe, simulate_data
from ..physics.metrics import fidelity
from ..physics.states import StateSpec, make_state
from ..reconstruction.cgan import reconstruct, single_shot, train_step
from ..reconstruction.config import (
    ConvergenceBenchmarkConfig,
    DataEfficiencyBenchmarkConfig,
    DatasetSpec,
    ImleConfig,
    PretrainConfig,
    PretrainingBenchmarkConfig,
    TrainConfig,
)
from ..reconstruction.imle import reconstruct_imle
from ..reconstruction.pretrain import generate_dataset, pretrain
from ..store.artifacts import save_report_csv, save_table_csv, write_manifest

METHODS = ("cgan", "imle", "imle-g")


def resolve_workers(max_workers: int | None = None) -> int:
    """Worker count: explicit value, else ``TOMO_THREADS``, else the CPU count."""
    if max_workers is None:
        max_workers = int(os.environ.get("TOMO_THREADS", os.cpu_count() or 1))
    return max(1, max_workers)


def run_method(
    method: str,
    seed: int,
    state: dict,
    measurement: dict,
    train: dict,
    imle: dict,
    iterations: int,
) -> pd.DataFrame:
    """One seeded reconstruction; arguments are plain dictionaries so the call can cross processes."""
    target = make_state(StateSpec(**state))
    measurement_set = MeasurementRecipe(**measurement).build()
    data = simulate_data(target, measurement_set)
    if method == "cgan":
        config = TrainConfig(**train).model_copy(update={"iterations": iterations, "seed": seed})
        report = reconstruct(data, measurement_set, config, target=target)
    else:
        config = ImleConfig(**imle).model_copy(
            update={"max_iterations": iterations, "seed": seed, "g_correction": method == "imle-g"}
        )
        report = reconstruct_imle(data, measurement_set, config, target=target)
    frame = report.to_dataframe()[["iteration", "fidelity", "wall_ms"]]
    frame.insert(0, "points", len(measurement_set.displacements))
    frame.insert(0, "seed", seed)
    frame.insert(0, "method", method)
    return frame


def _point_count(measurement: dict) -> int:
    displacements = measurement["displacements"]
    if displacements["origin"] == "square-grid":
        return displacements["nx"] * displacements["ny"]
    if displacements["origin"] == "disk":
        return displacements["count"]
    return len(displacements["points"])


def _error_file_name(run_kwargs: dict) -> str:
    count = f"_n-{_point_count(run_kwargs['measurement'])}" if "measurement" in run_kwargs else ""
    return f"ERROR_{run_kwargs['method']}{count}_seed-{run_kwargs['seed']}.txt"


def _write_error(output_dir_path: Path, run_kwargs: dict) -> None:
    exception_file_path = output_dir_path / _error_file_name(run_kwargs)
    with open(exception_file_path, mode="w") as f:
        f.write(f"run_kwargs: \n {pformat(run_kwargs)}\n\n")
        f.write(traceback.format_exc())


def run_all(
    run_kwargs_per_run: list[dict],
    output_dir_path: Path,
    max_workers: int | None = None,
    desc: str = "Running benchmark",
    runner: Callable[..., pd.DataFrame] = run_method,
) -> tuple[list[pd.DataFrame], list[dict]]:
    """Execute independent runs, in a process pool when more than one worker is allowed.

    A failing run leaves ``ERROR_<method>_n-<points>_seed-<seed>.txt`` with its arguments and
    traceback in ``output_dir_path``; the remaining runs continue. Returns the frames of the
    successful runs and the arguments of the failed ones.
    """
    workers = resolve_workers(max_workers)
    frames, failed = [], []
    if workers == 1:
        for run_kwargs in tqdm(run_kwargs_per_run, desc=desc):
            try:
                frames.append(runner(**run_kwargs))
            except Exception:
                _write_error(output_dir_path, run_kwargs)
                failed.append(run_kwargs)
        return frames, failed
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [(executor.submit(runner, **run_kwargs), run_kwargs) for run_kwargs in run_kwargs_per_run]
        for future, run_kwargs in tqdm(futures, desc=desc):
            try:
                frames.append(future.result())
            except Exception:
                _write_error(output_dir_path, run_kwargs)
                failed.append(run_kwargs)
    return frames, failed


def _with_failures(summary: pd.DataFrame, failed: list[dict], keys: list[str], columns: list[str]) -> pd.DataFrame:
    """Add a ``failed`` run count per ``keys`` group; groups where every run failed get ``runs == 0``."""
    if not failed:
        return summary.assign(failed=0)
    rows = [dict(method=run_kwargs["method"], count=_point_count(run_kwargs["measurement"])) for run_kwargs in failed]
    counts = pd.DataFrame(rows).groupby(keys).size().rename("failed").reset_index()
    if summary.empty:
        summary = counts.reindex(columns=columns + ["failed"])
    else:
        summary = summary.merge(counts, on=keys, how="outer")
    summary["runs"] = summary["runs"].fillna(0).astype(int)
    summary["failed"] = summary["failed"].fillna(0).astype(int)
    return summary


def convergence_benchmark(
    *,
    output_dir_path: Union[str, Path],
    config: ConvergenceBenchmarkConfig,
    train: TrainConfig,
    imle: ImleConfig,
    max_workers: int | None = None,
    verbose: bool = True,
    command: str = "bench convergence",
) -> pd.DataFrame:
    """Fidelity against iterations on a fixed square grid, for every method and seed.

    Writes ``curves.csv``, ``summary.csv``, ``iterations_to_fidelity.csv`` and ``manifest.json``.
    """
    output_dir_path = Path(output_dir_path)
    output_dir_path.mkdir(parents=True, exist_ok=True)
    state = dict(kind="cat", dim=config.dim, alpha_real=config.alpha, heads=config.heads)
    measurement = MeasurementRecipe(
        kind="husimi",
        dim=config.dim,
        displacements=DisplacementRecipe(origin="square-grid", extent=config.extent, nx=config.grid, ny=config.grid),
    ).model_dump()
    run_kwargs_per_run = [
        dict(
            method=method,
            seed=seed,
            state=state,
            measurement=measurement,
            train=train.model_dump(),
            imle=imle.model_dump(),
            iterations=config.cgan_iterations if method == "cgan" else config.imle_iterations,
        )
        for seed in range(config.seeds)
        for method in METHODS
    ]
    if verbose:
        print(f"Found {len(run_kwargs_per_run)} runs to execute")
    frames, failed = run_all(run_kwargs_per_run, output_dir_path, max_workers, desc="convergence")

    curves = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["method", "seed", "points", "iteration", "fidelity", "wall_ms"]
    )
    summary = curves.groupby(["method", "iteration"])["fidelity"].agg(mean="mean", std="std", runs="size")
    summary = summary.reset_index()
    summary = _with_failures(summary, failed, ["method"], ["method", "iteration", "mean", "std", "runs"])
    thresholds = []
    for (method, seed), group in curves.groupby(["method", "seed"]):
        reached = group.loc[group["fidelity"] >= config.fidelity_threshold, "iteration"]
        thresholds.append(dict(method=method, seed=seed, iteration=reached.min() if len(reached) else np.nan))
    iterations_to_fidelity = pd.DataFrame(thresholds, columns=["method", "seed", "iteration"])

    save_table_csv(output_dir_path / "curves.csv", curves)
    save_table_csv(output_dir_path / "summary.csv", summary)
    save_table_csv(output_dir_path / "iterations_to_fidelity.csv", iterations_to_fidelity)
    write_manifest(
        output_dir_path / "manifest.json",
        command=command,
        config=dict(benchmark=config.model_dump(), train=train.model_dump(), imle=imle.model_dump()),
        seeds=dict(runs=list(range(config.seeds))),
        workers=resolve_workers(max_workers),
    )
    return iterations_to_fidelity


def data_efficiency_benchmark(
    *,
    output_dir_path: Union[str, Path],
    config: DataEfficiencyBenchmarkConfig,
    train: TrainConfig,
    imle: ImleConfig,
    max_workers: int | None = None,
    verbose: bool = True,
    command: str = "bench data-efficiency",
) -> pd.DataFrame:
    """Final fidelity against the number of disk-sampled displacement points.

    Writes ``points.csv``, ``summary.csv`` and ``manifest.json``. The summary counts the runs that
    succeeded (``runs``) and failed (``failed``) for every method and point count.
    """
    output_dir_path = Path(output_dir_path)
    output_dir_path.mkdir(parents=True, exist_ok=True)
    state = dict(kind="cat", dim=config.dim, alpha_real=config.alpha, heads=config.heads)
    run_kwargs_per_run = []
    for count in config.counts:
        for seed in range(config.seeds):
            measurement = MeasurementRecipe(
                kind="husimi",
                dim=config.dim,
                displacements=DisplacementRecipe(origin="disk", radius=config.radius, count=count, seed=seed),
            ).model_dump()
            for method in METHODS:
                run_kwargs_per_run.append(
                    dict(
                        method=method,
                        seed=seed,
                        state=state,
                        measurement=measurement,
                        train=train.model_dump(),
                        imle=imle.model_dump(),
                        iterations=config.cgan_iterations if method == "cgan" else config.imle_iterations,
                    )
                )
    if verbose:
        print(f"Found {len(run_kwargs_per_run)} runs to execute")
    frames, failed = run_all(run_kwargs_per_run, output_dir_path, max_workers, desc="data-efficiency")

    columns = ["method", "seed", "count", "fidelity"]
    points = (
        pd.concat([frame.iloc[[-1]] for frame in frames], ignore_index=True).rename(columns={"points": "count"})[
            columns
        ]
        if frames
        else pd.DataFrame(columns=columns)
    )
    summary = points.groupby(["method", "count"])["fidelity"].agg(mean="mean", std="std", runs="size")
    summary = summary.reset_index()
    summary = _with_failures(summary, failed, ["method", "count"], ["method", "count", "mean", "std", "runs"])

    save_table_csv(output_dir_path / "points.csv", points)
    save_table_csv(output_dir_path / "summary.csv", summary)
    write_manifest(
        output_dir_path / "manifest.json",
        command=command,
        config=dict(benchmark=config.model_dump(), train=train.model_dump(), imle=imle.model_dump()),
        seeds=dict(runs=list(range(config.seeds))),
        workers=resolve_workers(max_workers),
    )
    return summary


def pretraining_benchmark(
    *,
    output_dir_path: Union[str, Path],
    config: PretrainingBenchmarkConfig,
    pretrain_config: PretrainConfig,
    verbose: bool = True,
    command: str = "bench pretraining",
) -> pd.DataFrame:
    """Pre-train on random cats, then score single-shot and fine-tuned reconstructions of held-out cats.

    Writes ``pretrain.csv``, ``single_shot.csv``, ``fine_tune.csv`` and ``manifest.json``.
    """
    output_dir_path = Path(output_dir_path)
    output_dir_path.mkdir(parents=True, exist_ok=True)
    measurement_set = MeasurementRecipe(
        kind="husimi",
        dim=config.dim,
        displacements=DisplacementRecipe(origin="square-grid", extent=config.extent, nx=config.grid, ny=config.grid),
    ).build()
    family = dict(
        dim=config.dim,
        alpha_min=config.alpha_min,
        alpha_max=config.alpha_max,
        heads_min=config.heads_min,
        heads_max=config.heads_max,
    )
    training = generate_dataset(DatasetSpec(count=config.train_count, seed=config.seed, **family), measurement_set)
    held_out = generate_dataset(DatasetSpec(count=config.test_count, seed=config.seed + 1, **family), measurement_set)
    pretrain_config = pretrain_config.model_copy(update={"epochs": config.epochs, "seed": config.seed})
    generator, discriminator, report = pretrain(training, measurement_set, pretrain_config, verbose=verbose)

    single_shot_rows, fine_tune_curves = [], []
    train = pretrain_config.train
    for index, (data, state) in enumerate(tqdm(held_out, desc="Held-out states")):
        single_shot_rows.append(dict(index=index, fidelity=fidelity(state, single_shot(generator, data))))
        tuned_generator, tuned_discriminator = generator.clone(), discriminator.clone()
        rng = np.random.default_rng(train.seed)
        curve = []
        for _ in range(config.fine_tune_steps):
            train_step(tuned_generator, tuned_discriminator, data, train, rng)
            curve.append(fidelity(state, tuned_generator.density_matrix(data)))
        fine_tune_curves.append(curve)

    single_shots = pd.DataFrame(single_shot_rows, columns=["index", "fidelity"])
    fine_tune = pd.DataFrame(
        dict(
            step=np.arange(1, config.fine_tune_steps + 1),
            mean_fidelity=np.mean(fine_tune_curves, axis=0) if config.fine_tune_steps else [],
        )
    )
    save_report_csv(output_dir_path / "pretrain.csv", report)
    save_table_csv(output_dir_path / "single_shot.csv", single_shots)
    save_table_csv(output_dir_path / "fine_tune.csv", fine_tune)
    write_manifest(
        output_dir_path / "manifest.json",
        command=command,
        config=dict(benchmark=config.model_dump(), pretrain=pretrain_config.model_dump()),
        seeds=dict(train=config.seed, held_out=config.seed + 1),
    )
    if verbose:
        print(f"Mean single-shot fidelity: {single_shots['fidelity'].mean():.4f}")
    return single_shots


if __name__ == "__main__":
    from ..reconstruction.config import imle_config, load_config, train_config

    effective = load_config()
    convergence_benchmark(
        output_dir_path=Path("benchmarks/convergence"),
        config=ConvergenceBenchmarkConfig(**effective["benchmark"]["convergence"]),
        train=train_config(effective),
        imle=imle_config(effective),
    )
