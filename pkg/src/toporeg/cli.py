"""Command-line front end.

Commands: synth, train, cv, dump-boundary, dump-persistence. A JSON config
file (--config) supplies any experiment field; explicit flags win over the
file. All randomness derives from the single --seed. Exit codes: 0 success,
2 usage, 3 divergence, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from scipy.special import expit

from .boundary import boundary_components
from .datasets import save_csv
from .dumps import write_components_csv, write_field_csv, write_persistence_csv
from .errors import CsvFormatError, DivergenceError
from .experiments import ExperimentConfig, RunReport, dataset_from_generator, run_cv, run_train
from .graphs import GridSpec, ScalarField, build_grid_graph, build_knn_graph
from .klr import gaussian_gram, load_model, save_model
from .persistence import merge_pairs

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override it")
    p.add_argument("--data", help="dataset CSV path")
    p.add_argument("--method", choices=["toporeg", "klr"])
    p.add_argument("--lambda", dest="lambdas", type=_float_list, metavar="F[,F...]")
    p.add_argument("--sigma", dest="sigmas", type=_float_list, metavar="F[,F...]")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--grid", type=int, help="grid discretization resolution")
    group.add_argument("--knn", type=int, help="KNN discretization neighbor count")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--l2", type=float)


def _build_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> ExperimentConfig:
    fields: dict = {}
    if args.config:
        with open(args.config) as fh:
            fields.update(json.load(fh))
    overrides = {
        "data": args.data,
        "method": args.method,
        "lambdas": args.lambdas,
        "sigmas": args.sigmas,
        "seed": args.seed,
        "out_dir": args.out,
        "learning_rate": args.learning_rate,
        "max_iters": args.max_iters,
        "grad_tol": args.grad_tol,
        "l2": args.l2,
    }
    for key, value in overrides.items():
        if value is not None:
            fields[key] = value
    if args.grid is not None:
        fields["disc_kind"] = "grid"
        fields["resolution"] = args.grid
    elif args.knn is not None:
        fields["disc_kind"] = "knn"
        fields["knn_k"] = args.knn
    try:
        return ExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))


def _write_timing(out_dir: Path, wall_clock: dict) -> None:
    # Timings live outside report.json so reruns stay byte-identical.
    with open(out_dir / "timing.log", "w") as fh:
        for phase in sorted(wall_clock):
            fh.write(f"{phase}\t{wall_clock[phase]:.6f}\n")


def _cmd_synth(args, parser) -> int:
    spec = {
        "kind": args.generator,
        "n": args.n,
        "noise_sd": args.noise_sd,
        "flip_fraction": args.flip_fraction,
        "spread": args.spread,
        "dim": args.dim,
    }
    ds = dataset_from_generator(spec, args.seed)
    provenance = (
        f"generator={args.generator} n={args.n} noise_sd={args.noise_sd} "
        f"flip_fraction={args.flip_fraction} spread={args.spread} "
        f"dim={args.dim} seed={args.seed}"
    )
    save_csv(ds, args.out, provenance=provenance)
    print(f"wrote {len(ds)} rows to {args.out}")
    return EXIT_OK


def _cmd_train(args, parser) -> int:
    cfg = _build_config(args, parser)
    if len(cfg.lambdas) != 1 or len(cfg.sigmas) != 1:
        parser.error("train takes a single lambda and sigma; use cv for grids")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        model, trace, report = run_train(cfg)
    except DivergenceError as exc:
        report = RunReport(
            method=cfg.method,
            seed=cfg.seed,
            stop_reason=f"diverged at iteration {exc.iteration} "
            f"(learning rate {exc.learning_rate:g})",
        )
        report.write(out_dir / "report.json")
        print(str(exc), file=sys.stderr)
        return EXIT_DIVERGENCE
    save_model(model, out_dir / "model.json")
    report.write(out_dir / "report.json")
    _write_timing(out_dir, report.wall_clock)
    print(
        f"trained {cfg.method}: train error {report.train_error:.4f}, "
        f"components {report.final_components}"
    )
    return EXIT_OK


def _cmd_cv(args, parser) -> int:
    cfg = _build_config(args, parser)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = run_cv(cfg)
    except DivergenceError as exc:
        report = RunReport(method=cfg.method, seed=cfg.seed, stop_reason=str(exc))
        report.write(out_dir / "report.json")
        print(str(exc), file=sys.stderr)
        return EXIT_DIVERGENCE
    report.write(out_dir / "report.json")
    _write_timing(out_dir, report.wall_clock)
    print(
        f"cv {cfg.method}: mean error {report.mean_error:.4f} "
        f"(sd {report.sd_error:.4f}) over {len(report.fold_errors)} folds"
    )
    return EXIT_OK


def _load_binary_model(path, parser):
    model = load_model(path)
    if not model.is_binary:
        parser.error("dump commands support binary models only")
    return model


def _cmd_dump_boundary(args, parser) -> int:
    model = _load_binary_model(args.model, parser)
    dim = model.train_points.shape[1]
    graph = build_grid_graph(GridSpec(args.grid, dim))
    shifted = expit(gaussian_gram(graph.positions, model.train_points, model.sigma) @ model.weights) - 0.5
    write_field_csv(graph, shifted, args.out)
    print(f"wrote {graph.vertex_count} rows to {args.out}")
    return EXIT_OK


def _cmd_dump_persistence(args, parser) -> int:
    model = _load_binary_model(args.model, parser)
    if (args.grid is None) == (args.knn is None):
        parser.error("choose exactly one of --grid or --knn")
    if args.grid is not None:
        graph = build_grid_graph(GridSpec(args.grid, model.train_points.shape[1]))
    else:
        graph = build_knn_graph(model.train_points, args.knn)
    shifted = expit(gaussian_gram(graph.positions, model.train_points, model.sigma) @ model.weights) - 0.5
    fld = ScalarField(graph=graph, values=shifted)
    if args.raw:
        write_persistence_csv(graph, fld, merge_pairs(graph, fld), args.out)
    else:
        write_components_csv(boundary_components(graph, fld), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toporeg",
        description="Train kernel classifiers with a boundary-topology penalty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--generator", required=True, choices=["moons", "blobs"])
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--flip-fraction", type=float, default=0.0)
    p.add_argument("--spread", type=float, default=0.2, help="blob spread")
    p.add_argument("--dim", type=int, default=2, help="blob dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train one model on the full dataset")
    _add_experiment_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("cv", help="nested 6x5 cross validation over a hyper-grid")
    _add_experiment_flags(p)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("dump-boundary", help="decision field on a grid, for contouring")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dump_boundary)

    p = sub.add_parser("dump-persistence", help="boundary components (or raw pairs) CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int)
    p.add_argument("--knn", type=int)
    p.add_argument("--raw", action="store_true", help="dump raw sublevel pairs instead")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dump_persistence)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (CsvFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
