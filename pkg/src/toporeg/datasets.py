"""Synthetic data, label noise, CSV round-trip, and cross-validation folds.

Every generator and splitter is a pure function of its seed; there is no
global random state.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CsvFormatError

# Sub-seed tags so each source of randomness is independently reproducible.
_ROLE_GENERATOR = 1
_ROLE_FLIP = 2
_ROLE_OUTER_FOLDS = 3
_ROLE_INNER_FOLDS = 4


@dataclass
class Dataset:
    """Points with integer labels in {0, ..., K-1}."""

    points: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels must have equal length")
        if len(self.labels) and self.labels.min() < 0:
            raise ValueError("labels must be non-negative")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points must be finite")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def subset(self, idx: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(self.points[idx], self.labels[idx], name or self.name)


def make_moons(n: int, noise_sd: float, seed: int) -> Dataset:
    """Two interleaved half-circles: class 0 on the upper arc of the unit
    circle at (0, 0), class 1 on the lower arc reflected about (1, 0.5).
    Arc angles are evenly spaced; Gaussian jitter of scale ``noise_sd`` is
    added to both coordinates."""
    if n < 2:
        raise ValueError("need n >= 2")
    n_upper = n - n // 2
    n_lower = n // 2
    theta_u = np.linspace(0.0, np.pi, n_upper)
    theta_l = np.linspace(0.0, np.pi, n_lower)
    upper = np.stack([np.cos(theta_u), np.sin(theta_u)], axis=1)
    lower = np.stack([1.0 - np.cos(theta_l), 0.5 - np.sin(theta_l)], axis=1)
    points = np.concatenate([upper, lower], axis=0)
    labels = np.concatenate([np.zeros(n_upper, np.int64), np.ones(n_lower, np.int64)])
    if noise_sd > 0:
        rng = np.random.default_rng([seed, _ROLE_GENERATOR])
        points = points + rng.normal(0.0, noise_sd, size=points.shape)
    return Dataset(points, labels, name=f"moons-n{n}")


def make_blobs(n: int, centers: np.ndarray, spread: float, seed: int) -> Dataset:
    """Isotropic Gaussian blobs; point i goes to center i mod C (its label)."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if len(centers) < 2:
        raise ValueError("need at least two centers")
    if spread < 0:
        raise ValueError("spread must be non-negative")
    labels = np.arange(n, dtype=np.int64) % len(centers)
    rng = np.random.default_rng([seed, _ROLE_GENERATOR])
    noise = rng.normal(0.0, spread, size=(n, centers.shape[1])) if spread > 0 else 0.0
    return Dataset(centers[labels] + noise, labels, name=f"blobs-n{n}")


def flip_labels(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Flip floor(fraction * N) labels, each to a uniformly random *different*
    label, choosing the indices without replacement."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    k = ds.num_classes
    if k < 2:
        raise ValueError("need at least two classes to flip labels")
    n_flip = int(fraction * len(ds))
    labels = ds.labels.copy()
    if n_flip:
        rng = np.random.default_rng([seed, _ROLE_FLIP])
        idx = rng.choice(len(ds), size=n_flip, replace=False)
        offsets = rng.integers(1, k, size=n_flip)
        labels[idx] = (labels[idx] + offsets) % k
    return Dataset(ds.points.copy(), labels, name=ds.name)


def save_csv(ds: Dataset, path, provenance: str | None = None) -> None:
    """Write features plus a final integer ``label`` column. Floats use repr,
    so a round-trip through :func:`load_csv` is bit-exact. ``provenance`` is
    written as a leading comment line."""
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        dim = ds.points.shape[1]
        writer.writerow([f"x{j}" for j in range(dim)] + ["label"])
        for row, label in zip(ds.points, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_csv(path) -> Dataset:
    """Parse a dataset CSV: header row, numeric features, final ``label``
    column of non-negative integers. Comment lines starting with ``#`` are
    skipped. Errors report the offending 1-based line number."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    numbered = [
        (ln, line) for ln, line in enumerate(raw, start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not numbered:
        raise CsvFormatError("line 1: empty file")
    header_ln, header_line = numbered[0]
    header = next(csv.reader([header_line]))
    if not header or header[-1].strip() != "label":
        raise CsvFormatError(f"line {header_ln}: last column must be 'label'")
    ncol = len(header)
    if ncol < 2:
        raise CsvFormatError(f"line {header_ln}: need at least one feature column")

    points, labels = [], []
    for ln, line in numbered[1:]:
        cells = next(csv.reader([line]))
        if len(cells) != ncol:
            raise CsvFormatError(f"line {ln}: expected {ncol} columns, got {len(cells)}")
        try:
            feats = [float(c) for c in cells[:-1]]
        except ValueError:
            raise CsvFormatError(f"line {ln}: non-numeric feature cell") from None
        if not all(np.isfinite(feats)):
            raise CsvFormatError(f"line {ln}: non-finite feature value")
        try:
            label = int(cells[-1])
        except ValueError:
            raise CsvFormatError(f"line {ln}: label {cells[-1]!r} is not an integer") from None
        if label < 0:
            raise CsvFormatError(f"line {ln}: label {label} is negative")
        points.append(feats)
        labels.append(label)
    if not points:
        raise CsvFormatError(f"line {header_ln}: no data rows")
    return Dataset(np.asarray(points), np.asarray(labels), name=Path(path).stem)


@dataclass
class FoldPlan:
    """Outer-fold assignment per datum for the 6-fold test protocol."""

    n_outer: int
    n_inner: int
    assignments: np.ndarray
    seed: int

    def outer_split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train indices, test indices) for one outer fold."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test


def _round_robin(labels: np.ndarray, n_folds: int, rng, warn_small: bool) -> np.ndarray:
    """Stratified assignment: shuffle each class, deal onto a global cursor.

    The shared cursor keeps overall fold sizes within one of each other even
    when class sizes are not multiples of the fold count.
    """
    assign = np.empty(len(labels), dtype=np.int64)
    cursor = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if warn_small and len(idx) < n_folds:
            warnings.warn(
                f"class {cls} has only {len(idx)} members for {n_folds} folds; "
                "assignment is unstratified for this class",
                stacklevel=3,
            )
        idx = rng.permutation(idx)
        for j in idx:
            assign[j] = cursor % n_folds
            cursor += 1
    return assign


def split_folds(ds: Dataset, seed: int, n_outer: int = 6, n_inner: int = 5) -> FoldPlan:
    """Stratified outer folds (sizes differ by at most one)."""
    if len(ds) < n_outer:
        raise ValueError(f"need at least {n_outer} data points")
    rng = np.random.default_rng([seed, _ROLE_OUTER_FOLDS])
    assign = _round_robin(ds.labels, n_outer, rng, warn_small=True)
    return FoldPlan(n_outer=n_outer, n_inner=n_inner, assignments=assign, seed=seed)


def inner_assignments(plan: FoldPlan, labels: np.ndarray, outer_fold: int) -> np.ndarray:
    """Inner-fold index for each training datum of one outer fold.

    Returns an array aligned with ``plan.outer_split(outer_fold)[0]``,
    derived deterministically from (plan.seed, outer_fold).
    """
    train_idx = np.flatnonzero(plan.assignments != outer_fold)
    rng = np.random.default_rng([plan.seed, _ROLE_INNER_FOLDS, outer_fold])
    return _round_robin(labels[train_idx], plan.n_inner, rng, warn_small=False)
