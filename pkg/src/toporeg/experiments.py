"""Experiment engine: single training runs and the nested cross-validation
protocol (each of 6 outer folds held out once; hyperparameters chosen by
5-fold cross validation on the remaining data; the winner is retrained on all
of it and scored on the held-out fold).

Hyperparameter ties are broken toward the smaller lambda, then the smaller
sigma, biasing toward the unregularized baseline when indistinguishable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .boundary import boundary_components
from .datasets import Dataset, FoldPlan, flip_labels, inner_assignments, load_csv, make_blobs, make_moons, split_folds
from .graphs import normalize_unit_box
from .klr import (
    Discretization,
    KernelModel,
    TrainConfig,
    TrainTrace,
    binary_boundary,
    evaluate,
    psi_fields,
    train_binary,
    train_multilabel,
)

METHODS = ("toporeg", "klr")


@dataclass
class ExperimentConfig:
    """One experiment manifest: data source, method, hyper-grid, protocol knobs."""

    data: str | None = None
    generator: dict | None = None
    method: str = "toporeg"
    lambdas: tuple = (0.1,)
    sigmas: tuple = (0.3,)
    learning_rate: float = 0.5
    max_iters: int = 200
    grad_tol: float = 0.0
    l2: float = 0.0
    disc_kind: str = "grid"
    resolution: int = 300
    knn_k: int = 3
    n_outer: int = 6
    n_inner: int = 5
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not self.lambdas or not self.sigmas:
            raise ValueError("hyper-grids must be non-empty")
        self.lambdas = tuple(float(v) for v in self.lambdas)
        self.sigmas = tuple(float(v) for v in self.sigmas)

    def discretization(self) -> Discretization:
        if self.disc_kind == "grid":
            return Discretization(kind="grid", resolution=self.resolution)
        return Discretization(kind="knn", k=self.knn_k)


@dataclass
class RunReport:
    """Deterministic results of a train or cv command; timings kept apart."""

    method: str
    seed: int
    fold_errors: list | None = None
    mean_error: float | None = None
    sd_error: float | None = None
    selected: list | None = None
    train_error: float | None = None
    objective_trace: list | None = None
    switch_flags: list | None = None
    objective_traces: list | None = None
    final_components: list | None = None
    stop_reason: str | None = None
    wall_clock: dict = dc_field(default_factory=dict)

    def to_json_dict(self) -> dict:
        # wall_clock is excluded: reports must be byte-identical across reruns.
        out = {
            "method": self.method,
            "seed": self.seed,
        }
        for key in (
            "fold_errors",
            "mean_error",
            "sd_error",
            "selected",
            "train_error",
            "objective_trace",
            "switch_flags",
            "objective_traces",
            "final_components",
            "stop_reason",
        ):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    """Dataset from the configured CSV path or synthetic generator spec."""
    if (cfg.data is None) == (cfg.generator is None):
        raise ValueError("exactly one of data path or generator spec is required")
    if cfg.data is not None:
        return load_csv(cfg.data)
    return dataset_from_generator(cfg.generator, cfg.seed)


def dataset_from_generator(spec: dict, seed: int) -> Dataset:
    kind = spec.get("kind")
    n = int(spec.get("n", 500))
    if kind == "moons":
        ds = make_moons(n, float(spec.get("noise_sd", 0.0)), seed)
    elif kind == "blobs":
        centers = spec.get("centers")
        if centers is None:
            dim = int(spec.get("dim", 2))
            centers = [np.zeros(dim), np.ones(dim)]
        ds = make_blobs(n, np.asarray(centers, float), float(spec.get("spread", 0.2)), seed)
    else:
        raise ValueError(f"unknown generator {kind!r}")
    flip = float(spec.get("flip_fraction", 0.0))
    if flip > 0:
        ds = flip_labels(ds, flip, seed)
    return ds


def _fit(
    ds_train: Dataset, lam: float, sigma: float, cfg: ExperimentConfig
) -> tuple[KernelModel, TrainTrace]:
    """Normalize the training split to the unit box and fit one model."""
    points, transform = normalize_unit_box(ds_train.points)
    normalized = Dataset(points, ds_train.labels, name=ds_train.name)
    train_cfg = TrainConfig(
        sigma=sigma,
        lambda_=lam if cfg.method == "toporeg" else 0.0,
        learning_rate=cfg.learning_rate,
        max_iters=cfg.max_iters,
        grad_tol=cfg.grad_tol,
        discretization=cfg.discretization(),
        seed=cfg.seed,
        l2=cfg.l2 if cfg.method == "klr" else 0.0,
    )
    if normalized.num_classes == 2:
        return train_binary(normalized, train_cfg, transform=transform)
    return train_multilabel(normalized, train_cfg, transform=transform)


def component_counts(model: KernelModel, disc: Discretization) -> list[int]:
    """Boundary component count of a trained model (per class for multilabel),
    measured on the given discretization in the model's normalized space."""
    graph = disc.build(model.train_points)
    if model.is_binary:
        return [len(binary_boundary(model, graph).components)]
    fields, _ = psi_fields(model, graph)
    return [len(boundary_components(graph, f).components) for f in fields]


def run_train(cfg: ExperimentConfig, dataset: Dataset | None = None):
    """Train once on the full dataset; returns (model, trace, report)."""
    if len(cfg.lambdas) != 1 or len(cfg.sigmas) != 1:
        raise ValueError("train needs a single (lambda, sigma); use cv for grids")
    t0 = time.perf_counter()
    ds = dataset if dataset is not None else load_dataset(cfg)
    t_data = time.perf_counter() - t0

    t0 = time.perf_counter()
    model, trace = _fit(ds, cfg.lambdas[0], cfg.sigmas[0], cfg)
    t_train = time.perf_counter() - t0

    t0 = time.perf_counter()
    counts = component_counts(model, cfg.discretization())
    train_error = evaluate(model, ds)
    t_diag = time.perf_counter() - t0

    report = RunReport(
        method=cfg.method,
        seed=cfg.seed,
        train_error=train_error,
        objective_trace=trace.objectives,
        switch_flags=trace.switch_flags,
        final_components=counts,
        stop_reason=trace.stop_reason,
        wall_clock={
            "data": t_data,
            "train": t_train,
            "topology_in_train": trace.topology_seconds,
            "diagnostics": t_diag,
        },
    )
    return model, trace, report


def _select_hypers(
    ds: Dataset, train_idx: np.ndarray, inner: np.ndarray, cfg: ExperimentConfig
) -> tuple[float, float, float]:
    """Mean inner-validation error over the hyper-grid; first strict winner
    in (sorted lambda, sorted sigma) order, so ties prefer the smaller pair."""
    lambdas = sorted(cfg.lambdas) if cfg.method == "toporeg" else [0.0]
    best = None
    for lam in lambdas:
        for sigma in sorted(cfg.sigmas):
            errors = []
            for j in range(cfg.n_inner):
                fit_idx = train_idx[inner != j]
                val_idx = train_idx[inner == j]
                if not len(fit_idx) or not len(val_idx):
                    raise ValueError("empty inner fold; dataset too small for protocol")
                model, _ = _fit(ds.subset(fit_idx), lam, sigma, cfg)
                errors.append(evaluate(model, ds.subset(val_idx)))
            mean_err = float(np.mean(errors))
            if best is None or mean_err < best[0]:
                best = (mean_err, lam, sigma)
    return best


def run_cv(
    cfg: ExperimentConfig, dataset: Dataset | None = None, plan: FoldPlan | None = None
) -> RunReport:
    """Nested cross validation; ``plan`` can be pinned for leakage tests."""
    t0 = time.perf_counter()
    ds = dataset if dataset is not None else load_dataset(cfg)
    t_data = time.perf_counter() - t0
    if plan is None:
        plan = split_folds(ds, cfg.seed, cfg.n_outer, cfg.n_inner)

    t0 = time.perf_counter()
    fold_errors, selected, traces, counts = [], [], [], []
    for fold in range(plan.n_outer):
        train_idx, test_idx = plan.outer_split(fold)
        inner = inner_assignments(plan, ds.labels, fold)
        inner_err, lam, sigma = _select_hypers(ds, train_idx, inner, cfg)
        model, trace = _fit(ds.subset(train_idx), lam, sigma, cfg)
        fold_errors.append(evaluate(model, ds.subset(test_idx)))
        selected.append({"lambda": lam, "sigma": sigma, "inner_error": inner_err})
        traces.append(trace.objectives)
        counts.append(component_counts(model, cfg.discretization()))
    t_cv = time.perf_counter() - t0

    errors = np.asarray(fold_errors)
    return RunReport(
        method=cfg.method,
        seed=cfg.seed,
        fold_errors=fold_errors,
        mean_error=float(errors.mean()),
        sd_error=float(errors.std(ddof=1)) if len(errors) > 1 else 0.0,
        selected=selected,
        objective_traces=traces,
        final_components=counts,
        wall_clock={"data": t_data, "cv": t_cv},
    )
