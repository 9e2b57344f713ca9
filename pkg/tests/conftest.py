"""Shared test helpers: random graphs and independent brute-force oracles.

The oracles here deliberately avoid the package's union-find path: component
counting goes through scipy's connected_components on explicit sparse
matrices, so persistence results are checked against an independent route.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from toporeg import Graph, ScalarField, merge_pairs


def path_graph(values) -> tuple[Graph, ScalarField]:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    graph = Graph(vertex_count=n, edges=edges, positions=np.arange(n, dtype=float)[:, None])
    return graph, ScalarField(graph=graph, values=values)


def random_connected_graph(rng: np.random.Generator, n: int, extra: float = 0.4) -> Graph:
    """Random tree plus ~extra*n additional edges; always connected."""
    edges = set()
    for v in range(1, n):
        edges.add((int(rng.integers(0, v)), v))
    for _ in range(int(extra * n)):
        u, v = (int(x) for x in rng.integers(0, n, 2))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    positions = rng.random((n, 2))
    return Graph(vertex_count=n, edges=np.array(sorted(edges)), positions=positions)


def random_graph(rng: np.random.Generator, n: int, edge_prob: float) -> Graph:
    """Erdos-Renyi graph; may be disconnected."""
    edges = [
        (i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < edge_prob
    ]
    arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return Graph(vertex_count=n, edges=arr, positions=rng.random((n, 2)))


def induced_component_count(graph: Graph, mask: np.ndarray) -> int:
    """Connected components of the induced subgraph on mask, via scipy."""
    if not mask.any():
        return 0
    edges = graph.edges
    if len(edges):
        keep = edges[mask[edges[:, 0]] & mask[edges[:, 1]]]
    else:
        keep = np.empty((0, 2), dtype=np.int64)
    n = graph.vertex_count
    mat = sp.coo_matrix((np.ones(len(keep)), (keep[:, 0], keep[:, 1])), shape=(n, n))
    _, labels = connected_components(mat, directed=False)
    return len(np.unique(labels[mask]))


def betti_curve_mismatches(graph: Graph, fld: ScalarField) -> list[int]:
    """Thresholds where the sublevel component count disagrees with the
    interval count implied by merge_pairs. Empty list means exact agreement."""
    result = merge_pairs(graph, fld)
    n = graph.vertex_count
    rank = np.empty(n, dtype=np.int64)
    rank[result.total_order] = np.arange(n)
    rb = rank[result.birth_vertices]
    rd = rank[result.death_vertices]
    rr = rank[result.essential_roots]
    bad = []
    mask = np.zeros(n, dtype=bool)
    for t in range(n):
        mask[result.total_order[t]] = True
        expected = induced_component_count(graph, mask)
        got = int(np.sum((rb <= t) & (t < rd)) + np.sum(rr <= t))
        if expected != got:
            bad.append(t)
    return bad


def zero_set_component_count_oracle(graph: Graph, fld: ScalarField) -> int:
    """Brute-force count of zero-set components for fields with no exact zeros:
    components of {f < 0} plus components of {f > 0} minus graph components."""
    neg = induced_component_count(graph, fld.values < 0.0)
    pos = induced_component_count(graph, fld.values > 0.0)
    whole = induced_component_count(graph, np.ones(graph.vertex_count, dtype=bool))
    return neg + pos - whole


def filtration_local_minima(graph: Graph, fld: ScalarField) -> np.ndarray:
    """Vertices all of whose neighbors come later in the tie-broken order."""
    n = graph.vertex_count
    order = np.argsort(fld.values, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    is_min = np.ones(n, dtype=bool)
    for u, v in graph.edges:
        if rank[u] < rank[v]:
            is_min[v] = False
        else:
            is_min[u] = False
    return np.flatnonzero(is_min)


def central_difference_grad(fun, w: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(w, dtype=np.float64)
    flat = grad.ravel()
    for j in range(w.size):
        delta = np.zeros_like(w, dtype=np.float64)
        delta.ravel()[j] = step
        flat[j] = (fun(w + delta) - fun(w - delta)) / (2.0 * step)
    return grad


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return np.abs(analytic - numeric) / denom
