"""CSV dump formats for persistence pairs, boundary components, and fields.

All floats are written with repr so reruns are byte-identical and values
round-trip exactly.
"""

from __future__ import annotations

import csv

import numpy as np

from .boundary import ComponentSet
from .graphs import Graph, ScalarField
from .persistence import PersistenceResult

PERSISTENCE_COLUMNS = ["birth_vertex", "death_vertex", "birth_value", "death_value", "essential"]
COMPONENT_COLUMNS = [
    "origin",
    "birth_vertex",
    "death_vertex",
    "birth_value",
    "death_value",
    "robustness",
    "weak_vertex",
    "excluded",
]


def write_persistence_csv(graph: Graph, fld: ScalarField, result: PersistenceResult, path) -> None:
    """Raw sublevel pairs plus essential rows.

    An essential row carries the component's root as birth and the
    component's maximum vertex (last in the sweep order) as death.
    """
    labels = graph.component_labels
    rank = np.empty(graph.vertex_count, dtype=np.int64)
    rank[result.total_order] = np.arange(graph.vertex_count)
    # Per-component maximum = vertex with the highest sweep rank.
    comp_max: dict[int, int] = {}
    for v in range(graph.vertex_count):
        lab = int(labels[v])
        if lab not in comp_max or rank[v] > rank[comp_max[lab]]:
            comp_max[lab] = v
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PERSISTENCE_COLUMNS)
        for pair in result.pairs:
            writer.writerow(
                [pair.birth_vertex, pair.death_vertex,
                 repr(pair.birth_value), repr(pair.death_value), 0]
            )
        for root in result.essential_roots:
            v_max = comp_max[int(labels[root])]
            writer.writerow(
                [int(root), v_max,
                 repr(float(fld.values[root])), repr(float(fld.values[v_max])), 1]
            )


def write_components_csv(cs: ComponentSet, path) -> None:
    """Boundary-component dump: one row per component of the zero set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPONENT_COLUMNS)
        for i, c in enumerate(cs.components):
            writer.writerow(
                [
                    c.origin.value,
                    c.pair.birth_vertex,
                    c.pair.death_vertex,
                    repr(c.pair.birth_value),
                    repr(c.pair.death_value),
                    repr(c.robustness),
                    c.weak_vertex,
                    1 if i == cs.excluded_index else 0,
                ]
            )


def write_field_csv(graph: Graph, values: np.ndarray, path) -> None:
    """Vertex coordinates plus one value per vertex, in graph (row-major) order."""
    dim = graph.positions.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(dim)] + ["value"])
        for pos, val in zip(graph.positions, values):
            writer.writerow([repr(float(p)) for p in pos] + [repr(float(val))])
