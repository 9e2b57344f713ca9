"""Kernel logistic regression trained with a boundary-topology penalty.

The objective is cross-entropy data loss plus ``lambda * L_T``, where ``L_T``
is the sum of squared robustness of the classifier's boundary components on a
fixed discretization. The penalty gradient flows through the weak critical
vertex of each component: for the binary sigmoid classifier each component
contributes ``2*(f-0.5) * f*(1-f) * phi(p*)``, i.e. ``(-2f^3+3f^2-f) phi(p*)``.

Optimization is plain gradient descent with a halving safeguard: a step that
raises the objective without changing the persistence pairing is rejected and
the learning rate halved; a step that changes the pairing is accepted and
flagged as a switch event.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from .boundary import ComponentSet, boundary_components, pairing_signature, penalty_seeds, topo_penalty
from .datasets import Dataset
from .errors import DivergenceError
from .graphs import Graph, GridSpec, ScalarField, UnitBoxTransform, build_grid_graph, build_knn_graph

PROB_CLAMP = 1e-12
_MAX_HALVINGS = 60
_KINK_PATIENCE = 12  # halvings before an increase at a pairing switch is accepted
_GRAM_BLOCK = 1 << 22  # entries per cdist block, bounds peak memory


@dataclass(frozen=True)
class Discretization:
    """Domain discretization choice: unit-box grid or KNN over training points."""

    kind: str = "grid"
    resolution: int = 300
    k: int = 3

    def __post_init__(self):
        if self.kind not in ("grid", "knn"):
            raise ValueError(f"unknown discretization kind {self.kind!r}")
        if self.kind == "grid" and self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        if self.kind == "knn" and self.k < 1:
            raise ValueError("knn k must be >= 1")

    def build(self, train_points: np.ndarray) -> Graph:
        if self.kind == "grid":
            return build_grid_graph(GridSpec(self.resolution, train_points.shape[1]))
        return build_knn_graph(train_points, self.k)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run (data assumed normalized)."""

    sigma: float
    lambda_: float = 0.0
    learning_rate: float = 0.5
    max_iters: int = 200
    grad_tol: float = 0.0
    discretization: Discretization = Discretization()
    seed: int = 0
    l2: float = 0.0  # optional ridge term for the unregularized baseline

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.lambda_ < 0 or self.l2 < 0 or self.grad_tol < 0:
            raise ValueError("lambda, l2 and grad_tol must be non-negative")
        if self.learning_rate <= 0 or self.max_iters < 1:
            raise ValueError("learning_rate and max_iters must be positive")


@dataclass
class KernelModel:
    """Gaussian-kernel model: one weight per training point (per class)."""

    train_points: np.ndarray
    sigma: float
    weights: np.ndarray  # (N,) for binary, (K, N) for multilabel
    num_classes: int = 2
    transform: UnitBoxTransform | None = None

    def __post_init__(self):
        self.train_points = np.asarray(self.train_points, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        n = len(self.train_points)
        if self.weights.ndim == 1:
            if len(self.weights) != n or self.num_classes != 2:
                raise ValueError("binary weights must be an N-vector with K=2")
        elif self.weights.ndim == 2:
            if self.weights.shape != (self.num_classes, n):
                raise ValueError("multilabel weights must be (K, N)")
        else:
            raise ValueError("weights must be 1- or 2-dimensional")

    @property
    def is_binary(self) -> bool:
        return self.weights.ndim == 1


@dataclass
class TrainTrace:
    """Per-run diagnostics.

    ``objectives`` holds the objective at the start plus after each accepted
    iteration. ``switch_flags[i]`` marks accepted iterations whose objective
    did not decrease — possible only when the persistence pairing switched
    (a kink of the piecewise-smooth penalty blocked descent).
    """

    objectives: list = dc_field(default_factory=list)
    switch_flags: list = dc_field(default_factory=list)
    iterations: int = 0
    stop_reason: str = ""
    final_learning_rate: float = 0.0
    final_grad_norm: float = 0.0
    topology_seconds: float = 0.0


def gaussian_gram(points: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """exp(-||x - c||^2 / (2 sigma^2)) for every (point, center) pair, blocked."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    out = np.empty((len(points), len(centers)))
    rows = max(1, _GRAM_BLOCK // max(1, len(centers)))
    scale = -1.0 / (2.0 * sigma * sigma)
    for start in range(0, len(points), rows):
        block = cdist(points[start : start + rows], centers, "sqeuclidean")
        block *= scale
        np.exp(block, out=out[start : start + rows])
    return out


def kernel_vector(x: np.ndarray, model: KernelModel) -> np.ndarray:
    """Gaussian kernel values of x (in model space) against the training points."""
    return gaussian_gram(np.asarray(x, float)[None, :], model.train_points, model.sigma)[0]


def _to_model_space(model: KernelModel, points: np.ndarray) -> np.ndarray:
    return model.transform.apply(points) if model.transform is not None else np.asarray(points, float)


def predict_binary(model: KernelModel, x: np.ndarray):
    """Sigmoid prediction f(x) in (0, 1); accepts a point or an (M, D) batch.

    The boundary machinery consumes the shifted field f - 0.5, whose sign is
    the predicted label (0 counts as positive).
    """
    if not model.is_binary:
        raise ValueError("predict_binary needs a binary model")
    pts = np.asarray(x, dtype=np.float64)
    squeeze = pts.ndim == 1
    pts = _to_model_space(model, np.atleast_2d(pts))
    f = expit(gaussian_gram(pts, model.train_points, model.sigma) @ model.weights)
    return float(f[0]) if squeeze else f


def class_scores(model: KernelModel, points: np.ndarray) -> np.ndarray:
    """Per-class linear scores phi(x)^T w^k for points in model space."""
    phi = gaussian_gram(points, model.train_points, model.sigma)
    w = model.weights if not model.is_binary else model.weights[None, :]
    return phi @ w.T


def data_loss_grad(
    model: KernelModel, dataset: Dataset, *, phi: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Binary cross-entropy loss and its weight gradient on a dataset.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the logs; the
    gradient uses the raw probabilities, sum_n (f_n - t_n) phi(x_n).
    """
    if not model.is_binary:
        raise ValueError("data_loss_grad needs a binary model")
    if phi is None:
        phi = gaussian_gram(dataset.points, model.train_points, model.sigma)
    t = dataset.labels.astype(np.float64)
    f = expit(phi @ model.weights)
    fc = np.clip(f, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -float(np.sum(t * np.log(fc) + (1.0 - t) * np.log(1.0 - fc)))
    grad = phi.T @ (f - t)
    return loss, grad


def _binary_topo(
    w: np.ndarray, phi_grid: np.ndarray, graph: Graph
) -> tuple[float, np.ndarray, ComponentSet]:
    f = expit(phi_grid @ w)
    cs = boundary_components(graph, ScalarField(graph=graph, values=f - 0.5))
    grad = np.zeros_like(w)
    for vertex, coeff in penalty_seeds(cs):
        grad += (coeff * f[vertex] * (1.0 - f[vertex])) * phi_grid[vertex]
    return topo_penalty(cs), grad, cs


def topo_loss_grad(
    model: KernelModel, graph: Graph, *, phi_grid: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Topology penalty L_T of the shifted field f - 0.5 and its weight gradient."""
    if not model.is_binary:
        raise ValueError("topo_loss_grad needs a binary model")
    if phi_grid is None:
        phi_grid = gaussian_gram(graph.positions, model.train_points, model.sigma)
    lt, grad, _ = _binary_topo(model.weights, phi_grid, graph)
    return lt, grad


def binary_boundary(
    model: KernelModel, graph: Graph, *, phi_grid: np.ndarray | None = None
) -> ComponentSet:
    """Boundary components of a binary model's shifted field on a graph."""
    if phi_grid is None:
        phi_grid = gaussian_gram(graph.positions, model.train_points, model.sigma)
    f = expit(phi_grid @ model.weights)
    return boundary_components(graph, ScalarField(graph=graph, values=f - 0.5))


def _descend(w0, objective, config: TrainConfig) -> tuple[np.ndarray, TrainTrace]:
    """Gradient descent with a backtracking safeguard.

    A step that raises the objective is rejected and the step size halved; a
    raise is only accepted once the step has shrunk by 2**_KINK_PATIENCE and
    the persistence pairing changed, meaning descent is blocked by a kink of
    the piecewise-smooth penalty rather than by curvature. Accepted steps are
    therefore non-increasing except at flagged switch events. The step size
    recovers by doubling (capped at the configured rate) after acceptance.
    """
    w = np.array(w0, dtype=np.float64)
    lr0 = float(config.learning_rate)
    step = lr0
    trace = TrainTrace()
    loss, grad, sig = objective(w)
    if not np.isfinite(loss):
        raise DivergenceError(0, step)
    trace.objectives.append(float(loss))
    for it in range(1, config.max_iters + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < config.grad_tol:
            trace.stop_reason = "gradient_tolerance"
            break
        accepted = False
        cand_loss = np.nan
        for halvings in range(_MAX_HALVINGS):
            cand = w - step * grad
            cand_loss, cand_grad, cand_sig = objective(cand)
            if np.isfinite(cand_loss) and (
                cand_loss < loss
                or (cand_sig != sig and halvings >= _KINK_PATIENCE)
            ):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if not np.isfinite(cand_loss):
                raise DivergenceError(it, step)
            trace.stop_reason = "stalled"
            break
        trace.switch_flags.append(bool(cand_loss >= loss))
        w, loss, grad, sig = cand, cand_loss, cand_grad, cand_sig
        trace.objectives.append(float(loss))
        step = min(step * 2.0, lr0)
    else:
        trace.stop_reason = "max_iters"
    trace.iterations = len(trace.objectives) - 1
    trace.final_learning_rate = step
    trace.final_grad_norm = float(np.linalg.norm(grad))
    return w, trace


def train_binary(
    dataset: Dataset, config: TrainConfig, transform: UnitBoxTransform | None = None
) -> tuple[KernelModel, TrainTrace]:
    """Fit a binary model by gradient descent from w = 0.

    With lambda = 0 the discretization is never built and no persistence code
    runs, reducing exactly to unregularized KLR. ``transform`` is recorded on
    the model for mapping raw points into the (normalized) training space.
    """
    if dataset.num_classes != 2:
        raise ValueError("train_binary needs binary labels")
    pts = dataset.points
    phi_train = gaussian_gram(pts, pts, config.sigma)
    t = dataset.labels.astype(np.float64)
    lam = config.lambda_

    if lam > 0.0:
        graph = config.discretization.build(pts)
        phi_grid = gaussian_gram(graph.positions, pts, config.sigma)
    topo_time = [0.0]

    def objective(w):
        f = expit(phi_train @ w)
        fc = np.clip(f, PROB_CLAMP, 1.0 - PROB_CLAMP)
        loss = -float(np.sum(t * np.log(fc) + (1.0 - t) * np.log(1.0 - fc)))
        grad = phi_train.T @ (f - t)
        if config.l2 > 0.0:
            loss += 0.5 * config.l2 * float(w @ w)
            grad = grad + config.l2 * w
        sig = ()
        if lam > 0.0:
            t0 = time.perf_counter()
            lt, gt, cs = _binary_topo(w, phi_grid, graph)
            topo_time[0] += time.perf_counter() - t0
            loss += lam * lt
            grad = grad + lam * gt
            sig = pairing_signature(cs)
        return loss, grad, sig

    w, trace = _descend(np.zeros(len(pts)), objective, config)
    trace.topology_seconds = topo_time[0]
    model = KernelModel(
        train_points=pts.copy(),
        sigma=config.sigma,
        weights=w,
        num_classes=2,
        transform=transform,
    )
    return model, trace


def psi_fields(
    model: KernelModel, graph: Graph, *, scores: np.ndarray | None = None
) -> tuple[list[ScalarField], np.ndarray]:
    """One-vs-rest margin fields psi^k = max_{t != k} f^t - f^k on the graph.

    Returns the K fields plus a (K, V) array with the argmax class t* per
    vertex (ties to the smallest index), which routes the penalty gradient.
    """
    if model.is_binary:
        raise ValueError("psi_fields needs a multilabel model")
    if scores is None:
        scores = class_scores(model, graph.positions)
    n, k_classes = scores.shape
    fields = []
    arg = np.empty((k_classes, n), dtype=np.int64)
    rows = np.arange(n)
    for k in range(k_classes):
        others = scores.copy()
        others[:, k] = -np.inf
        tstar = np.argmax(others, axis=1)
        psi = others[rows, tstar] - scores[:, k]
        arg[k] = tstar
        fields.append(ScalarField(graph=graph, values=psi))
    return fields, arg


def _multilabel_topo(
    weights: np.ndarray, phi_grid: np.ndarray, graph: Graph, model_stub: KernelModel
) -> tuple[float, np.ndarray, tuple]:
    scores = phi_grid @ weights.T
    fields, arg = psi_fields(model_stub, graph, scores=scores)
    total = 0.0
    grad = np.zeros_like(weights)
    sigs = []
    for k, fld in enumerate(fields):
        cs = boundary_components(graph, fld)
        total += topo_penalty(cs)
        tstars = []
        for vertex, coeff in penalty_seeds(cs):
            tstar = int(arg[k, vertex])
            row = coeff * phi_grid[vertex]
            grad[tstar] += row
            grad[k] -= row
            tstars.append(tstar)
        sigs.append((k, pairing_signature(cs), tuple(tstars)))
    return total, grad, tuple(sigs)


def train_multilabel(
    dataset: Dataset, config: TrainConfig, transform: UnitBoxTransform | None = None
) -> tuple[KernelModel, TrainTrace]:
    """Fit a K-class model: multinomial cross-entropy + lambda * sum_k L_T(psi^k).

    The per-class penalty keeps its own most-robust exclusion; each seed's
    gradient flows +phi(p*) into the argmax class and -phi(p*) into class k.
    """
    k_classes = dataset.num_classes
    if k_classes < 2:
        raise ValueError("need at least two classes")
    pts = dataset.points
    n = len(pts)
    phi_train = gaussian_gram(pts, pts, config.sigma)
    onehot = np.zeros((n, k_classes))
    onehot[np.arange(n), dataset.labels] = 1.0
    lam = config.lambda_

    if lam > 0.0:
        graph = config.discretization.build(pts)
        phi_grid = gaussian_gram(graph.positions, pts, config.sigma)
        stub = KernelModel(
            train_points=pts,
            sigma=config.sigma,
            weights=np.zeros((k_classes, n)),
            num_classes=k_classes,
        )
    topo_time = [0.0]

    def objective(weights):
        scores = phi_train @ weights.T
        scores -= scores.max(axis=1, keepdims=True)
        np.exp(scores, out=scores)
        probs = scores / scores.sum(axis=1, keepdims=True)
        picked = np.clip(probs[np.arange(n), dataset.labels], PROB_CLAMP, None)
        loss = -float(np.sum(np.log(picked)))
        grad = (probs - onehot).T @ phi_train
        if config.l2 > 0.0:
            loss += 0.5 * config.l2 * float(np.sum(weights * weights))
            grad = grad + config.l2 * weights
        sig = ()
        if lam > 0.0:
            t0 = time.perf_counter()
            lt, gt, sig = _multilabel_topo(weights, phi_grid, graph, stub)
            topo_time[0] += time.perf_counter() - t0
            loss += lam * lt
            grad = grad + lam * gt
        return loss, grad, sig

    weights, trace = _descend(np.zeros((k_classes, n)), objective, config)
    trace.topology_seconds = topo_time[0]
    model = KernelModel(
        train_points=pts.copy(),
        sigma=config.sigma,
        weights=weights,
        num_classes=k_classes,
        transform=transform,
    )
    return model, trace


def evaluate(model: KernelModel, dataset: Dataset) -> float:
    """Error rate in [0, 1]. Binary: sign of f - 0.5 with 0 positive;
    multilabel: argmax class score with ties to the smallest index."""
    if len(dataset.points) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    pts = _to_model_space(model, dataset.points)
    if model.is_binary:
        f = expit(gaussian_gram(pts, model.train_points, model.sigma) @ model.weights)
        predicted = (f - 0.5 >= 0.0).astype(np.int64)
    else:
        predicted = np.argmax(class_scores(model, pts), axis=1)
    return float(np.mean(predicted != dataset.labels))


def model_to_dict(model: KernelModel) -> dict:
    weights = model.weights[None, :] if model.is_binary else model.weights
    return {
        "sigma": model.sigma,
        "num_classes": model.num_classes,
        "train_points": model.train_points.tolist(),
        "weights": [w.tolist() for w in weights],
        "transform": model.transform.to_dict() if model.transform else None,
    }


def model_from_dict(d: dict) -> KernelModel:
    weights = np.asarray(d["weights"], dtype=np.float64)
    if d["num_classes"] == 2 and len(weights) == 1:
        weights = weights[0]
    transform = UnitBoxTransform.from_dict(d["transform"]) if d["transform"] else None
    return KernelModel(
        train_points=np.asarray(d["train_points"], dtype=np.float64),
        sigma=float(d["sigma"]),
        weights=weights,
        num_classes=int(d["num_classes"]),
        transform=transform,
    )


def save_model(model: KernelModel, path) -> None:
    """JSON round-trip preserves evaluate() outputs exactly (repr floats)."""
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> KernelModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
