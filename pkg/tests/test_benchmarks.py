import pandas as pd
import pytest

import cgan_tomography.benchmarks.run_benchmark as run_benchmark_module
from cgan_tomography.benchmarks import (
    convergence_benchmark,
    data_efficiency_benchmark,
    pretraining_benchmark,
    resolve_workers,
)
from cgan_tomography.benchmarks.run_benchmark import run_all
from cgan_tomography.exceptions import NumericFailureError
from cgan_tomography.reconstruction.config import (
    ArchitectureConfig,
    ConvergenceBenchmarkConfig,
    DataEfficiencyBenchmarkConfig,
    ImleConfig,
    PretrainConfig,
    PretrainingBenchmarkConfig,
    TrainConfig,
)
from cgan_tomography.store import load_report_csv, read_artifact


@pytest.fixture
def tiny_train():
    return TrainConfig(
        log_every=2,
        fidelity_target=None,
        architecture=ArchitectureConfig(generator_hidden=[8], discriminator_hidden=[8]),
    )


def test_worker_count_resolution(monkeypatch):
    monkeypatch.setenv("TOMO_THREADS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    assert resolve_workers(0) == 1


def _flaky_runner(method, seed):
    if seed == 1:
        raise RuntimeError("diverged")
    return pd.DataFrame(dict(method=[method], seed=[seed]))


def test_failed_runs_leave_an_error_file_and_the_rest_continue(tmp_path):
    run_kwargs_per_run = [dict(method="imle", seed=seed) for seed in range(3)]
    frames, failed = run_all(run_kwargs_per_run, tmp_path, max_workers=1, runner=_flaky_runner)
    assert [int(frame["seed"].iloc[0]) for frame in frames] == [0, 2]
    assert failed == [dict(method="imle", seed=1)]
    error_text = (tmp_path / "ERROR_imle_seed-1.txt").read_text()
    assert "diverged" in error_text and "run_kwargs" in error_text


def test_convergence_writes_curves_summary_and_manifest(tmp_path, tiny_train):
    config = ConvergenceBenchmarkConfig(
        dim=4, alpha=1.0, grid=4, extent=2.5, seeds=1, cgan_iterations=4, imle_iterations=4
    )
    iterations_to_fidelity = convergence_benchmark(
        output_dir_path=tmp_path,
        config=config,
        train=tiny_train,
        imle=ImleConfig(fidelity_target=None),
        max_workers=1,
        verbose=False,
    )
    curves = pd.read_csv(tmp_path / "curves.csv", skiprows=1)
    assert set(curves["method"]) == {"cgan", "imle", "imle-g"}
    assert curves["fidelity"].between(0, 1).all()
    assert set(iterations_to_fidelity["method"]) == {"cgan", "imle", "imle-g"}
    assert (tmp_path / "summary.csv").exists()
    manifest = read_artifact(tmp_path / "manifest.json", "manifest")
    assert manifest["command"] == "bench convergence"
    assert manifest["config"]["benchmark"]["grid"] == 4
    assert not list(tmp_path.glob("ERROR_*"))


def test_data_efficiency_records_final_fidelity_per_count(tmp_path, tiny_train):
    config = DataEfficiencyBenchmarkConfig(
        dim=3, alpha=1.0, radius=2.5, counts=[9, 16], seeds=1, cgan_iterations=2, imle_iterations=2
    )
    summary = data_efficiency_benchmark(
        output_dir_path=tmp_path,
        config=config,
        train=tiny_train,
        imle=ImleConfig(fidelity_target=None),
        max_workers=1,
        verbose=False,
    )
    points = pd.read_csv(tmp_path / "points.csv", skiprows=1)
    assert len(points) == 6
    assert sorted(summary["count"].unique()) == [9, 16]


def test_pretraining_scores_held_out_states(tmp_path, tiny_train):
    config = PretrainingBenchmarkConfig(
        dim=3, grid=3, extent=2.0, train_count=4, test_count=2, alpha_max=1.0, heads_max=2, epochs=1, fine_tune_steps=2
    )
    pretrain_config = PretrainConfig(train=tiny_train.model_copy(update={"lambda_gp": 10.0}))
    single_shots = pretraining_benchmark(
        output_dir_path=tmp_path, config=config, pretrain_config=pretrain_config, verbose=False
    )
    assert len(single_shots) == 2
    assert single_shots["fidelity"].between(0, 1).all()
    fine_tune = pd.read_csv(tmp_path / "fine_tune.csv", skiprows=1)
    assert fine_tune["step"].tolist() == [1, 2]
    assert len(load_report_csv(tmp_path / "pretrain.csv")) == 1


def test_failures_at_different_counts_are_kept_apart_and_counted(tmp_path, tiny_train, monkeypatch):
    def diverging(data, measurement_set, config, target=None):
        raise NumericFailureError(f"diverged on {len(data)} points")

    monkeypatch.setattr(run_benchmark_module, "reconstruct_imle", diverging)
    config = DataEfficiencyBenchmarkConfig(
        dim=3, alpha=1.0, radius=2.5, counts=[9, 16], seeds=1, cgan_iterations=2, imle_iterations=2
    )
    summary = data_efficiency_benchmark(
        output_dir_path=tmp_path,
        config=config,
        train=tiny_train,
        imle=ImleConfig(fidelity_target=None),
        max_workers=1,
        verbose=False,
    )
    error_files = sorted(path.name for path in tmp_path.glob("ERROR_*"))
    assert error_files == [
        "ERROR_imle-g_n-16_seed-0.txt",
        "ERROR_imle-g_n-9_seed-0.txt",
        "ERROR_imle_n-16_seed-0.txt",
        "ERROR_imle_n-9_seed-0.txt",
    ]
    assert "diverged on 9 points" in (tmp_path / "ERROR_imle_n-9_seed-0.txt").read_text()

    by_group = summary.set_index(["method", "count"])
    assert by_group.loc[("cgan", 9), "runs"] == 1 and by_group.loc[("cgan", 9), "failed"] == 0
    for method in ("imle", "imle-g"):
        for count in (9, 16):
            assert by_group.loc[(method, count), "runs"] == 0
            assert by_group.loc[(method, count), "failed"] == 1
    written = pd.read_csv(tmp_path / "summary.csv", skiprows=1)
    assert written["failed"].sum() == 4
