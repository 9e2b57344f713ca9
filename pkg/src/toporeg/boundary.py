"""Connected components of the zero level set and the topology penalty.

The components of {f = 0} on a graph are enumerated by combining three
sources: zero-crossing sublevel pairs of f, zero-crossing sublevel pairs of
-f, and one essential (min, max) pair per graph component whose field takes
both signs. Each component carries a robustness score — the smaller absolute
endpoint value — and the penalty is the sum of squared robustness over all
components except the most robust one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, ScalarField
from .persistence import PersistencePair, merge_pairs, zero_crossing_filter


class Origin(enum.Enum):
    """Which sweep produced a boundary component."""

    SUBLEVEL_F = "sublevel_f"
    SUBLEVEL_NEG_F = "sublevel_neg_f"
    ESSENTIAL = "essential"


@dataclass(frozen=True)
class BoundaryComponent:
    """One component of the zero set.

    ``pair`` carries f's values at the sweep's (birth, death) vertices; for
    components found in the -f sweep the values therefore appear in
    descending order. ``weak_vertex`` is the endpoint with the smaller
    absolute value and ``weak_value`` is f's (signed) value there.
    """

    pair: PersistencePair
    robustness: float
    weak_vertex: int
    weak_value: float
    origin: Origin


@dataclass
class ComponentSet:
    """All boundary components plus the index of the excluded (most robust) one."""

    components: list[BoundaryComponent]
    excluded_index: int | None


def select_weak_critical(pair: PersistencePair) -> tuple[int, float]:
    """Endpoint of the pair with the smaller |value|; ties go to the birth."""
    if abs(pair.birth_value) <= abs(pair.death_value):
        return pair.birth_vertex, pair.birth_value
    return pair.death_vertex, pair.death_value


def _component(pair: PersistencePair, origin: Origin) -> BoundaryComponent:
    weak_vertex, weak_value = select_weak_critical(pair)
    return BoundaryComponent(
        pair=pair,
        robustness=min(abs(pair.birth_value), abs(pair.death_value)),
        weak_vertex=weak_vertex,
        weak_value=weak_value,
        origin=origin,
    )


def boundary_components(graph: Graph, fld: ScalarField) -> ComponentSet:
    """Enumerate zero-set components of ``fld`` with robustness and weak vertices.

    Runs the sublevel sweep on f and on -f, keeps the zero-crossing pairs of
    each (re-expressed in f's sign convention), and adds one essential entry
    per graph component whose minimum is negative and maximum non-negative.
    Returns an empty set when the field has uniform sign.
    """
    values = fld.values
    res_f = merge_pairs(graph, fld)
    neg = ScalarField(graph=graph, values=-values)
    res_neg = merge_pairs(graph, neg)

    comps: list[BoundaryComponent] = []

    cross_f = zero_crossing_filter(res_f, fld)
    cross_f.sort(key=lambda p: p.birth_vertex)
    comps.extend(_component(p, Origin.SUBLEVEL_F) for p in cross_f)

    # -f pairs are filtered in -f's values, then re-expressed in f's.
    cross_neg = zero_crossing_filter(res_neg, neg)
    cross_neg.sort(key=lambda p: p.birth_vertex)
    for p in cross_neg:
        in_f = PersistencePair(
            birth_vertex=p.birth_vertex,
            death_vertex=p.death_vertex,
            birth_value=float(values[p.birth_vertex]),
            death_value=float(values[p.death_vertex]),
        )
        comps.append(_component(in_f, Origin.SUBLEVEL_NEG_F))

    # Essential (component min, component max) pairs. The f sweep's roots are
    # the per-component minima, the -f sweep's roots the per-component maxima.
    labels = graph.component_labels
    max_of = {int(labels[r]): int(r) for r in res_neg.essential_roots}
    essentials = []
    for r in res_f.essential_roots:
        v_min = int(r)
        v_max = max_of[int(labels[v_min])]
        if values[v_min] < 0.0 and values[v_max] >= 0.0:
            essentials.append(
                PersistencePair(
                    birth_vertex=v_min,
                    death_vertex=v_max,
                    birth_value=float(values[v_min]),
                    death_value=float(values[v_max]),
                )
            )
    essentials.sort(key=lambda p: p.birth_vertex)
    comps.extend(_component(p, Origin.ESSENTIAL) for p in essentials)

    if not comps:
        return ComponentSet(components=[], excluded_index=None)
    excluded = min(
        range(len(comps)),
        key=lambda i: (-comps[i].robustness, comps[i].weak_vertex, i),
    )
    return ComponentSet(components=comps, excluded_index=excluded)


def topo_penalty(cs: ComponentSet) -> float:
    """Sum of squared robustness over all components except the excluded one."""
    return float(
        sum(
            c.robustness**2
            for i, c in enumerate(cs.components)
            if i != cs.excluded_index
        )
    )


def penalty_seeds(cs: ComponentSet) -> list[tuple[int, float]]:
    """Per-component gradient seeds (weak vertex, 2 * weak value).

    One seed per non-excluded component; components sharing a weak vertex
    emit separate seeds and are summed by the caller.
    """
    return [
        (c.weak_vertex, 2.0 * c.weak_value)
        for i, c in enumerate(cs.components)
        if i != cs.excluded_index
    ]


def pairing_signature(cs: ComponentSet) -> tuple:
    """Discrete structure of a component set, for detecting pairing switches.

    Two component sets with equal signatures have the same vertices in the
    same roles, so the penalty is smooth between them.
    """
    body = tuple(
        (c.origin.value, c.pair.birth_vertex, c.pair.death_vertex, c.weak_vertex)
        for c in cs.components
    )
    return body + (cs.excluded_index,)
