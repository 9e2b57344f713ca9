"""Domain discretizations: grid and KNN graphs, scalar fields, feature scaling.

A classifier is analyzed through a piecewise-linear surrogate: the domain is
discretized into a graph (uniform lattice in low dimension, KNN graph over the
training points in high dimension) and the classifier is sampled at the
vertices, giving a :class:`ScalarField`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .errors import CapacityError, FieldEvaluationError

# Hard cap on lattice size; a 300x300 grid (the usual 2D setting) is 9e4.
MAX_GRID_VERTICES = 20_000_000


@dataclass
class Graph:
    """Undirected graph with one D-dimensional position per vertex.

    ``edges`` is an (m, 2) integer array of vertex-index pairs, free of
    self-loops and duplicates. Instances are treated as immutable once built.
    """

    vertex_count: int
    edges: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or len(self.positions) != self.vertex_count:
            raise ValueError("positions must be (vertex_count, D)")
        if len(self.edges):
            if self.edges.min() < 0 or self.edges.max() >= self.vertex_count:
                raise ValueError("edge endpoint out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-loop in edge list")
            canon = np.sort(self.edges, axis=1)
            if len(np.unique(canon, axis=0)) != len(canon):
                raise ValueError("duplicate edge in edge list")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) neighbor lists in CSR layout."""
        n = self.vertex_count
        if not len(self.edges):
            return np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.argsort(src, kind="stable")
        indices = dst[order]
        counts = np.bincount(src, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return indptr, indices

    @cached_property
    def component_labels(self) -> np.ndarray:
        """Connected-component label per vertex (labels are 0..C-1)."""
        n = self.vertex_count
        mat = coo_matrix(
            (np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])),
            shape=(n, n),
        )
        _, labels = connected_components(mat, directed=False)
        return labels


@dataclass
class ScalarField:
    """One finite real value per graph vertex (e.g. a sampled classifier)."""

    graph: Graph
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if len(self.values) != self.graph.vertex_count:
            raise ValueError("field length does not match vertex count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice specification: resolution per axis, dimension, bounds."""

    resolution_per_axis: int
    dim: int
    bounds: tuple = ()  # per-axis (lo, hi); defaults to the unit box

    def __post_init__(self):
        if self.resolution_per_axis < 2:
            raise ValueError("resolution_per_axis must be >= 2")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        bounds = self.bounds or tuple((0.0, 1.0) for _ in range(self.dim))
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != self.dim:
            raise ValueError("bounds must have one (lo, hi) per axis")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError("each axis needs lo < hi")
        object.__setattr__(self, "bounds", bounds)


def build_grid_graph(spec: GridSpec) -> Graph:
    """Uniform lattice over ``spec.bounds`` with axis-aligned edges.

    Vertex order is row-major over axes (axis 0 slowest). Every non-boundary
    vertex has 2*dim neighbors; the edge count is
    dim * resolution**(dim-1) * (resolution-1).
    """
    res, dim = spec.resolution_per_axis, spec.dim
    n = res**dim
    if n > MAX_GRID_VERTICES:
        raise CapacityError(
            f"grid of {res}^{dim} = {n} vertices exceeds cap {MAX_GRID_VERTICES}"
        )
    axes = [np.linspace(lo, hi, res) for lo, hi in spec.bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    positions = np.stack([m.ravel() for m in mesh], axis=1)

    idx = np.arange(n, dtype=np.int64).reshape((res,) * dim)
    blocks = []
    for axis in range(dim):
        head = tuple(slice(None) if a != axis else slice(0, res - 1) for a in range(dim))
        tail = tuple(slice(None) if a != axis else slice(1, res) for a in range(dim))
        blocks.append(np.stack([idx[head].ravel(), idx[tail].ravel()], axis=1))
    edges = np.concatenate(blocks, axis=0)
    return Graph(vertex_count=n, edges=edges, positions=positions)


def build_knn_graph(points: np.ndarray, k: int) -> Graph:
    """Exact symmetric KNN graph: edge {u, v} iff either selects the other.

    Distance ties are broken toward the smaller vertex index, so the result
    is deterministic even with duplicate points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if n == 0:
        raise ValueError("points must be non-empty")
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")

    dist = cdist(pts, pts)
    edges = set()
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")  # stable: ties by index
        picked = 0
        for j in order:
            if j == i:
                continue
            edges.add((min(i, int(j)), max(i, int(j))))
            picked += 1
            if picked == k:
                break
    edge_arr = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return Graph(vertex_count=n, edges=edge_arr, positions=pts.copy())


def evaluate_field(predict: Callable[[np.ndarray], float], graph: Graph) -> ScalarField:
    """Sample ``predict`` at every vertex position.

    Raises :class:`FieldEvaluationError` naming the first vertex whose
    prediction is non-finite.
    """
    values = np.empty(graph.vertex_count, dtype=np.float64)
    for i in range(graph.vertex_count):
        v = float(predict(graph.positions[i]))
        if not np.isfinite(v):
            raise FieldEvaluationError(f"non-finite prediction at vertex {i}: {v!r}")
        values[i] = v
    return ScalarField(graph=graph, values=values)


@dataclass(frozen=True)
class UnitBoxTransform:
    """Per-axis min-max record from :func:`normalize_unit_box`."""

    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        squeeze = pts.ndim == 1
        pts = np.atleast_2d(pts)
        span = self.maxs - self.mins
        out = np.empty_like(pts)
        for a in range(pts.shape[1]):
            if span[a] == 0.0:
                out[:, a] = 0.5  # constant feature collapses to the box center
            else:
                out[:, a] = (pts[:, a] - self.mins[a]) / span[a]
        return out[0] if squeeze else out

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "UnitBoxTransform":
        return cls(mins=np.asarray(d["mins"], float), maxs=np.asarray(d["maxs"], float))


def normalize_unit_box(points: np.ndarray) -> tuple[np.ndarray, UnitBoxTransform]:
    """Min-max scale each axis into [0, 1]; returns the scaled points and the
    transform to apply to held-out points. A degenerate axis (min == max)
    maps to 0.5."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(pts) < 1:
        raise ValueError("need at least one point")
    transform = UnitBoxTransform(mins=pts.min(axis=0), maxs=pts.max(axis=0))
    return transform.apply(pts), transform
