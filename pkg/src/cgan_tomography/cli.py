"""Command-line harness: ``tomo <command> [flags]``.

Every command writes its outputs plus a manifest (effective configuration, seeds and package
versions) next to them. Failures print a single line ``error: <category>: <message>`` to stderr
and exit with a code that depends on the category.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from neuroconv.utils import load_dict_from_file
from pydantic import ValidationError

from .benchmarks import convergence_benchmark, data_efficiency_benchmark, pretraining_benchmark
from .exceptions import BadFlagError, DimensionMismatchError, NumericFailureError, TomographyError
from .physics.measure import (
    DataVector,
    DisplacementRecipe,
    MeasurementRecipe,
    add_shot_noise,
    husimi_ops,
    simulate_data,
    square_grid,
    wigner_ops,
    within_disk,
)
from .physics.metrics import fidelity
from .physics.states import DensityMatrix, StateSpec, make_state
from .reconstruction.cgan import reconstruct, single_shot
from .reconstruction.config import (
    ConvergenceBenchmarkConfig,
    DataEfficiencyBenchmarkConfig,
    DatasetSpec,
    PretrainingBenchmarkConfig,
    imle_config,
    load_config,
    pretrain_config,
    train_config,
)
from .reconstruction.imle import reconstruct_imle
from .reconstruction.linear_inversion import linear_inversion
from .reconstruction.pretrain import generate_dataset, pretrain
from .store import (
    load_checkpoint,
    load_data,
    load_dataset,
    load_density_matrix,
    load_grid_csv,
    save_checkpoint,
    save_data,
    save_dataset,
    save_density_matrix,
    save_grid_csv,
    save_report,
    save_report_csv,
    write_manifest,
)

logger = logging.getLogger(__name__)

EXIT_CODES = {"bad-flag": 2, "missing-file": 3, "dimension-mismatch": 4, "numeric-failure": 5}

# bench subcommands and the sweeps they run; the descriptive names are aliases
BENCHMARKS = {
    "fig3a": "convergence",
    "fig3b": "data-efficiency",
    "fig5": "pretraining",
    "convergence": "convergence",
    "data-efficiency": "data-efficiency",
    "pretraining": "pretraining",
}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise BadFlagError(message)


def _grid(text: str) -> tuple[int, int]:
    """Parse ``NxM`` into (nx, ny)."""
    try:
        nx, ny = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 32x32, got '{text}'")
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError(f"grid sizes must be positive, got '{text}'")
    return nx, ny


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _section(**values) -> dict:
    """Flags that were actually given; unset flags leave lower-precedence values in place."""
    return {key: value for key, value in values.items() if value is not None}


def _manifest_path(out: Path) -> Path:
    return out.parent / f"{out.stem}.manifest.json"


def _require(path: Path | None, what: str) -> Path | None:
    if path is not None and not Path(path).exists():
        raise FileNotFoundError(f"{what} {path} does not exist.")
    return path


def _check_target(target: DensityMatrix | None, dim: int) -> None:
    if target is not None and target.dim != dim:
        raise DimensionMismatchError(f"Target dimension {target.dim} != measurement dimension {dim}.")


def gen_state(args: argparse.Namespace) -> None:
    fields = _section(
        n=args.n,
        alpha_real=args.alpha,
        alpha_imag=args.alpha_imag,
        heads=args.heads,
        parity=args.parity,
        rank=args.rank,
        seed=args.seed,
        snap_levels=args.snap_levels,
        snap_phase=args.snap_phase,
    )
    spec = StateSpec(kind=args.kind, dim=args.dim, **fields)
    rho = make_state(spec)
    save_density_matrix(args.out, rho, spec)
    write_manifest(
        _manifest_path(args.out),
        command=args.command_line,
        config=dict(state=spec.model_dump()),
        seeds=dict(state=spec.seed),
    )
    logger.info("Wrote %s state of dimension %d to %s.", spec.kind, spec.dim, args.out)


def gen_data(args: argparse.Namespace) -> None:
    rho = load_density_matrix(_require(args.state, "State file"))
    if args.disk is not None:
        displacements = DisplacementRecipe(origin="disk", radius=args.radius, count=args.disk, seed=args.seed)
    else:
        nx, ny = args.grid
        displacements = DisplacementRecipe(origin="square-grid", extent=args.extent, nx=nx, ny=ny)
    recipe = MeasurementRecipe(
        kind=args.measure, dim=rho.dim, pad=args.pad, n_list=args.n_list, displacements=displacements
    )
    measurement_set = recipe.build()
    data = simulate_data(rho, measurement_set)

    noise = args.noise or ("binomial" if args.shots is not None else "none")
    if noise == "binomial" and args.shots is None:
        raise BadFlagError("--noise binomial needs --shots.")
    if noise == "gaussian" and args.sigma is None:
        raise BadFlagError("--noise gaussian needs --sigma.")
    data = add_shot_noise(data, shots=args.shots, noise=noise, seed=args.seed, sigma=args.sigma)

    save_data(args.out, data, measurement_set)
    write_manifest(
        _manifest_path(args.out),
        command=args.command_line,
        config=dict(measurement=recipe.model_dump(), noise=noise, shots=args.shots, sigma=args.sigma),
        seeds=dict(noise=args.seed, displacements=displacements.seed),
        inputs=dict(state=str(args.state)),
    )
    logger.info("Wrote %d %s values to %s.", len(data), args.measure, args.out)


def import_data(args: argparse.Namespace) -> None:
    points, values = load_grid_csv(_require(args.grid_csv, "Grid file"))
    if args.radius is not None and not np.any(np.abs(points) <= args.radius):
        raise BadFlagError(f"No grid point lies within --radius {args.radius}.")
    recipe = MeasurementRecipe(
        kind=args.kind,
        dim=args.dim,
        pad=args.pad,
        displacements=DisplacementRecipe(origin="explicit", points=[(p.real, p.imag) for p in points]),
    )
    measurement_set = recipe.build()
    data = DataVector(values=values, kind=args.kind)
    if args.radius is not None:
        measurement_set, data = within_disk(measurement_set, data, args.radius)
    save_data(args.out, data, measurement_set)
    write_manifest(
        _manifest_path(args.out),
        command=args.command_line,
        config=dict(kind=args.kind, dim=args.dim, pad=args.pad, radius=args.radius),
        inputs=dict(grid_csv=str(args.grid_csv)),
        points=len(data),
    )


def reconstruct_command(args: argparse.Namespace) -> None:
    data, measurement_set = load_data(_require(args.data, "Data file"))
    target = None if args.target is None else load_density_matrix(_require(args.target, "Target file"))
    _check_target(target, measurement_set.dim)

    overrides = {
        "train": _section(iterations=args.iterations, seed=args.seed),
        "imle": _section(max_iterations=args.iterations, seed=args.seed, g_correction=args.g_correction),
    }
    config = load_config(_require(args.config, "Config file"), overrides)
    if args.method == "cgan":
        effective = train_config(config)
        try:
            report = reconstruct(data, measurement_set, effective, target=target)
        except NumericFailureError as error:
            if args.report is not None and getattr(error, "report", None) is not None:
                save_report_csv(args.report, error.report)
            raise
    elif args.method == "imle":
        effective = imle_config(config)
        report = reconstruct_imle(data, measurement_set, effective, target=target)
    else:
        effective = None
        report = linear_inversion(data, measurement_set, target=target)

    save_density_matrix(args.out, report.final_state)
    if args.report is not None:
        save_report_csv(args.report, report)
    if args.report_json is not None:
        save_report(args.report_json, report)
    write_manifest(
        _manifest_path(args.out),
        command=args.command_line,
        config={report.method: None if effective is None else effective.model_dump()},
        seeds=dict(run=None if effective is None else effective.seed),
        inputs=dict(data=str(args.data), target=None if args.target is None else str(args.target)),
        iterations=report.iterations,
        final_fidelity=None if target is None else report.final_fidelity,
    )
    if target is not None:
        logger.info("Final fidelity %.6f after %d iterations.", report.final_fidelity, report.iterations)


def pretrain_command(args: argparse.Namespace) -> None:
    overrides = {"pretrain": _section(epochs=args.epochs, seed=args.seed)}
    if args.dataset_spec is not None:
        overrides["dataset"] = load_dict_from_file(_require(args.dataset_spec, "Dataset spec"))
    config = load_config(_require(args.config, "Config file"), overrides)
    effective = pretrain_config(config)

    if args.dataset is not None:
        dataset, measurement_set = load_dataset(_require(args.dataset, "Dataset file"))
        spec = None
    else:
        spec = DatasetSpec(**config["dataset"])
        nx, ny = args.grid
        measurement_set = MeasurementRecipe(
            kind=args.measure,
            dim=spec.dim,
            pad=args.pad,
            displacements=DisplacementRecipe(origin="square-grid", extent=args.extent, nx=nx, ny=ny),
        ).build()
        dataset = generate_dataset(spec, measurement_set, verbose=args.verbose)
        if args.save_dataset is not None:
            save_dataset(args.save_dataset, dataset, measurement_set, spec.model_dump())

    generator, discriminator, report = pretrain(dataset, measurement_set, effective, verbose=args.verbose)
    save_checkpoint(args.out, generator, discriminator, measurement_set, effective.train)
    if args.report is not None:
        save_report_csv(args.report, report)
    write_manifest(
        _manifest_path(args.out),
        command=args.command_line,
        config=dict(pretrain=effective.model_dump(), dataset=None if spec is None else spec.model_dump()),
        seeds=dict(pretrain=effective.seed, dataset=None if spec is None else spec.seed),
        records=len(dataset),
        best_validation_fidelity=float(np.nanmax(report.to_dataframe()["fidelity"])),
    )


def single_shot_command(args: argparse.Namespace) -> None:
    generator, discriminator, checkpoint_set, train = load_checkpoint(_require(args.ckpt, "Checkpoint"))
    data, measurement_set = load_data(_require(args.data, "Data file"))
    if len(data) != len(checkpoint_set) or measurement_set.dim != checkpoint_set.dim:
        raise DimensionMismatchError(
            f"Data has {len(data)} values of dimension {measurement_set.dim}; the checkpoint expects "
            f"{len(checkpoint_set)} values of dimension {checkpoint_set.dim}."
        )
    if not np.allclose(measurement_set.operators, checkpoint_set.operators):
        logger.warning("The data were taken with different operators than the checkpoint was trained on.")
    target = None if args.target is None else load_density_matrix(_require(args.target, "Target file"))
    _check_target(target, measurement_set.dim)
    if args.seed is not None:
        train = train.model_copy(update={"seed": args.seed})

    rho = single_shot(generator, data, discriminator, fine_tune=args.fine_tune, config=train)
    save_density_matrix(args.out, rho)
    score = None if target is None else fidelity(target, rho)
    write_manifest(
        _manifest_path(args.out),
        command=args.command_line,
        config=dict(train=train.model_dump(), fine_tune=args.fine_tune),
        seeds=dict(fine_tune=train.seed),
        inputs=dict(ckpt=str(args.ckpt), data=str(args.data)),
        fidelity=score,
    )
    if score is not None:
        logger.info("Single-shot fidelity %.6f.", score)


def emit_grid(args: argparse.Namespace) -> None:
    rho = load_density_matrix(_require(args.state, "State file"))
    nx, ny = args.grid
    build = wigner_ops if args.function == "wigner" else husimi_ops
    measurement_set = build(square_grid(args.extent, nx, ny), rho.dim, pad=args.pad)
    data = simulate_data(rho, measurement_set)
    save_grid_csv(args.out, measurement_set.displacements.points, data.values)
    write_manifest(
        _manifest_path(args.out),
        command=args.command_line,
        config=dict(measurement=measurement_set.recipe.model_dump()),
        inputs=dict(state=str(args.state)),
    )


def bench(args: argparse.Namespace) -> None:
    sweep = BENCHMARKS[args.benchmark]
    if sweep == "pretraining":
        if args.seeds is not None or args.iterations is not None:
            raise BadFlagError(f"bench {args.benchmark} takes --seed and --epochs, not --seeds or --iterations.")
        section = _section(seed=args.seed, epochs=args.epochs)
    else:
        if args.seed is not None or args.epochs is not None:
            raise BadFlagError(f"bench {args.benchmark} takes --seeds and --iterations, not --seed or --epochs.")
        section = _section(seeds=args.seeds)
        if args.iterations is not None:
            section.update(cgan_iterations=args.iterations, imle_iterations=args.iterations)
    key = sweep.replace("-", "_")
    config = load_config(_require(args.config, "Config file"), {"benchmark": {key: section}})
    benchmark = config["benchmark"][key]
    if sweep == "convergence":
        convergence_benchmark(
            output_dir_path=args.out,
            config=ConvergenceBenchmarkConfig(**benchmark),
            train=train_config(config),
            imle=imle_config(config),
            max_workers=args.workers,
            verbose=args.verbose,
            command=args.command_line,
        )
    elif sweep == "data-efficiency":
        data_efficiency_benchmark(
            output_dir_path=args.out,
            config=DataEfficiencyBenchmarkConfig(**benchmark),
            train=train_config(config),
            imle=imle_config(config),
            max_workers=args.workers,
            verbose=args.verbose,
            command=args.command_line,
        )
    else:
        pretraining_benchmark(
            output_dir_path=args.out,
            config=PretrainingBenchmarkConfig(**benchmark),
            pretrain_config=pretrain_config(config),
            verbose=args.verbose,
            command=args.command_line,
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="tomo", description="Quantum state tomography with QST-CGAN and iMLE.")
    parser.add_argument("--verbose", action="store_true", help="Log progress at INFO level.")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("gen-state", help="Write a ground-truth density matrix.")
    p.add_argument("--kind", required=True, choices=["fock", "coherent", "cat", "random", "snap", "maximally-mixed"])
    p.add_argument("--dim", type=int, default=32, help="Fock-space truncation N.")
    p.add_argument("--n", type=int, help="Photon number of a Fock state.")
    p.add_argument("--alpha", type=float, help="Real part of the coherent amplitude.")
    p.add_argument("--alpha-imag", type=float, help="Imaginary part of the coherent amplitude.")
    p.add_argument("--heads", type=int, help="Number of coherent components of a cat state.")
    p.add_argument("--parity", type=int, help="Parity sector of a cat state.")
    p.add_argument("--rank", type=int, help="Rank of a random state.")
    p.add_argument("--seed", type=int, help="Seed of a random state.")
    p.add_argument("--snap-levels", type=_int_list, help="Comma-separated Fock levels of the SNAP phase.")
    p.add_argument("--snap-phase", type=float, help="Phase applied by the SNAP gate.")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=gen_state)

    p = commands.add_parser("gen-data", help="Simulate measurement data for a state.")
    p.add_argument("--state", type=Path, required=True)
    p.add_argument("--measure", choices=["husimi", "wigner", "generalized-q"], default="husimi")
    p.add_argument("--grid", type=_grid, default=(32, 32), help="Square-grid size NxM.")
    p.add_argument("--extent", type=float, default=5.0, help="Half-width of the square grid.")
    p.add_argument("--disk", type=int, help="Sample this many points uniformly from a disk instead of a grid.")
    p.add_argument("--radius", type=float, default=5.0, help="Disk radius used with --disk.")
    p.add_argument("--n-list", type=_int_list, help="Photon numbers of generalized-Q observables.")
    p.add_argument("--pad", type=int, help="Extra Fock levels used to build displacement operators.")
    p.add_argument("--shots", type=int, help="Repetitions per point for binomial noise.")
    p.add_argument("--noise", choices=["none", "binomial", "gaussian"])
    p.add_argument("--sigma", type=float, help="Standard deviation of Gaussian noise.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=gen_data)

    p = commands.add_parser("import-data", help="Convert an external phase-space grid CSV into a data file.")
    p.add_argument("--grid-csv", type=Path, required=True, help="CSV with columns re_beta, im_beta, value.")
    p.add_argument("--kind", choices=["husimi", "wigner"], default="husimi")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--pad", type=int)
    p.add_argument("--radius", type=float, help="Keep only points with |beta| <= radius.")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=import_data)

    p = commands.add_parser("reconstruct", help="Reconstruct a density matrix from data.")
    p.add_argument("method", choices=["cgan", "imle", "lstsq"])
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--target", type=Path, help="True state, enables fidelity logging and early stopping.")
    p.add_argument("--config", type=Path, help="YAML or JSON file overriding the packaged defaults.")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--g-correction", action="store_true", default=None, help="iMLE with the G^-1 correction.")
    p.add_argument("--report", type=Path, help="Trajectory CSV.")
    p.add_argument("--report-json", type=Path, help="Trajectory with final state as JSON.")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=reconstruct_command)

    p = commands.add_parser("pretrain", help="Pre-train a generator on a simulated state family.")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--dataset-spec", type=Path, help="YAML or JSON file with DatasetSpec fields.")
    source.add_argument("--dataset", type=Path, help="Previously saved dataset file.")
    p.add_argument("--measure", choices=["husimi", "wigner"], default="husimi")
    p.add_argument("--grid", type=_grid, default=(32, 32))
    p.add_argument("--extent", type=float, default=5.0)
    p.add_argument("--pad", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", type=Path)
    p.add_argument("--save-dataset", type=Path, help="Also write the generated dataset.")
    p.add_argument("--report", type=Path, help="Per-epoch CSV.")
    p.add_argument("--out", type=Path, required=True, help="Checkpoint file.")
    p.set_defaults(handler=pretrain_command)

    p = commands.add_parser("single-shot", help="Reconstruct with a pre-trained generator.")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--fine-tune", type=int, default=0, help="Adversarial steps on a copy of the networks.")
    p.add_argument("--target", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=single_shot_command)

    p = commands.add_parser("bench", help="Run a benchmark sweep.")
    p.add_argument("benchmark", choices=list(BENCHMARKS))
    p.add_argument("--seeds", type=int, help="Seeds per configuration (fig3a, fig3b).")
    p.add_argument("--iterations", type=int, help="Iterations of every run (fig3a, fig3b).")
    p.add_argument("--seed", type=int, help="Dataset and training seed (fig5).")
    p.add_argument("--epochs", type=int, help="Pre-training epochs (fig5).")
    p.add_argument("--workers", type=int, help="Process count; defaults to TOMO_THREADS or the CPU count.")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True, help="Output directory.")
    p.set_defaults(handler=bench)

    for function in ("wigner", "husimi"):
        p = commands.add_parser(f"emit-{function}", help=f"Sample the {function} function of a state on a grid.")
        p.add_argument("--state", type=Path, required=True)
        p.add_argument("--grid", type=_grid, default=(64, 64))
        p.add_argument("--extent", type=float, default=5.0)
        p.add_argument("--pad", type=int)
        p.add_argument("--out", type=Path, required=True)
        p.set_defaults(handler=emit_grid, function=function)

    return parser


def _category(error: BaseException) -> str:
    if isinstance(error, ValidationError):
        return "bad-flag"
    if isinstance(error, FileNotFoundError):
        return "missing-file"
    if isinstance(error, TomographyError):
        return error.category
    if isinstance(error, AssertionError):
        return "invalid-input"
    return "internal-error"


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    logging.captureWarnings(True)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose)
        args.command_line = " ".join(["tomo", *argv])
        args.handler(args)
    except Exception as error:
        category = _category(error)
        message = " ".join(str(error).split()) or type(error).__name__
        print(f"error: {category}: {message}", file=sys.stderr)
        return EXIT_CODES.get(category, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
