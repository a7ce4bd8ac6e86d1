"""Simple paths in the basic-activity tree: enumeration, signs and weights.

Every class-station pair that is not a basic activity induces exactly one
simple path: the unique tree path between the two vertices, oriented so the
class is the starting leaf. Walking the path from the station leaf back to
the class leaf assigns +1 to edges traversed station-to-class and -1 to edges
traversed class-to-station; a closed path (leaf pair is itself an activity)
additionally carries the leaf pair with sign -1. The per-class signed rate
sums and their total are the path's weight data, and the weight's sign is
what throughput analysis consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import DEFAULT_TOL, ActivitySet, NetworkModel
from .static_fluid import FluidSolution

OPEN = "open"
CLOSED = "closed"

NEGATIVE = "negative"
ZERO = "zero"
POSITIVE = "positive"

CLASS_DEPENDENT = "class"
POOL_DEPENDENT = "pool"
NEITHER = "neither"

SignedEdge = tuple[tuple[int, int], int]


class NotATree(RuntimeError):
    """Path enumeration requires the basic graph to be a spanning tree."""


@dataclass(frozen=True)
class SimplePath:
    kind: str                           # OPEN or CLOSED
    class_leaf: int
    station_leaf: int
    vertices: tuple[int, ...]           # alternating class, station, ...
    signed_edges: tuple[SignedEdge, ...]
    class_weights: np.ndarray           # per-class signed rate sums, length num_classes
    weight: float                       # total signed rate sum
    sign_class: str                     # NEGATIVE, ZERO or POSITIVE
    dependence: str                     # CLASS_DEPENDENT, POOL_DEPENDENT or NEITHER

    @property
    def leaf_pair(self) -> tuple[int, int]:
        return (self.class_leaf, self.station_leaf)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "class_leaf": self.class_leaf,
            "station_leaf": self.station_leaf,
            "vertices": list(self.vertices),
            "edges": [
                {"class": i, "station": j, "sign": s} for (i, j), s in self.signed_edges
            ],
            "class_weights": self.class_weights.tolist(),
            "weight": self.weight,
            "sign_class": self.sign_class,
            "dependence": self.dependence,
        }


def assign_signs(vertices: Sequence[int], closed: bool) -> tuple[SignedEdge, ...]:
    """Sign the edges of an oriented simple path.

    ``vertices`` alternates class, station, class, ... station. Edges at even
    offsets pair a class with its own station and get +1; odd offsets hand
    over to the next class and get -1. The closing leaf-pair edge, present
    only on closed paths, gets -1.
    """
    if len(vertices) < 4 or len(vertices) % 2:
        raise ValueError("a simple path has an even vertex count of at least 4")
    signed: list[SignedEdge] = []
    for idx in range(len(vertices) - 1):
        u, v = vertices[idx], vertices[idx + 1]
        if idx % 2 == 0:
            signed.append(((u, v), +1))
        else:
            signed.append(((v, u), -1))
    if closed:
        signed.append(((vertices[0], vertices[-1]), -1))
    return tuple(signed)


def _weights_from_edges(
    signed_edges: Iterable[SignedEdge], model: NetworkModel
) -> tuple[np.ndarray, float]:
    m = np.zeros(model.num_classes)
    for (i, j), s in signed_edges:
        m[model.class_pos(i)] += s * model.rate(i, j)
    m.setflags(write=False)
    return m, float(m.sum())


def path_weights(path: SimplePath, model: NetworkModel) -> tuple[np.ndarray, float]:
    """Per-class signed rate sums and their total for a signed path."""
    return _weights_from_edges(path.signed_edges, model)


def _classify_edges(
    signed_edges: Iterable[SignedEdge], model: NetworkModel, tol: float
) -> str:
    per_class: dict[int, float] = {}
    per_station: dict[int, float] = {}
    for (i, j), s in signed_edges:
        term = s * model.rate(i, j)
        per_class[i] = per_class.get(i, 0.0) + term
        per_station[j] = per_station.get(j, 0.0) + term
    if all(abs(v) <= tol for v in per_class.values()):
        return CLASS_DEPENDENT
    if all(abs(v) <= tol for v in per_station.values()):
        return POOL_DEPENDENT
    return NEITHER


def classify_dependence(
    path: SimplePath, model: NetworkModel, tol: float = DEFAULT_TOL
) -> str:
    """Class-dependent if every class's signed sum along the path vanishes,
    pool-dependent if every station's does; class-dependence wins when both
    hold. Either one forces a zero path."""
    return _classify_edges(path.signed_edges, model, tol)


def _sign_class(weight: float, tol: float) -> str:
    if abs(weight) <= tol:
        return ZERO
    return NEGATIVE if weight < 0 else POSITIVE


def _adjacency(edges: Iterable[tuple[int, int]]) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {}
    for i, j in edges:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    for nbrs in adj.values():
        nbrs.sort()
    return adj


def _tree_path(adj: dict[int, list[int]], src: int, dst: int) -> list[int]:
    parent = {src: src}
    stack = [src]
    while stack:
        v = stack.pop()
        if v == dst:
            break
        for w in adj.get(v, ()):
            if w not in parent:
                parent[w] = v
                stack.append(w)
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def enumerate_simple_paths(
    sol: FluidSolution,
    acts: ActivitySet,
    model: NetworkModel,
    tol: float = DEFAULT_TOL,
) -> list[SimplePath]:
    """One simple path per non-basic (class, station) pair.

    The count is always I*J - (I + J - 1) on a spanning tree. Paths come back
    sorted by leaf pair for deterministic downstream iteration.

    Raises:
        NotATree: the basic graph is not a spanning tree of all vertices.
    """
    n_vertices = model.num_classes + model.num_stations
    adj = _adjacency(sol.basic_edges)
    spanning = len(adj) == n_vertices and len(sol.basic_edges) == n_vertices - 1
    if spanning:
        reach = _reachable(adj, next(iter(adj)))
        spanning = len(reach) == n_vertices
    if not spanning:
        raise NotATree("basic activities do not form a spanning tree")

    paths: list[SimplePath] = []
    for i in model.class_labels:
        for j in model.station_labels:
            if (i, j) in sol.basic_edges:
                continue
            vertices = tuple(_tree_path(adj, i, j))
            closed = (i, j) in acts.edges
            signed = assign_signs(vertices, closed)
            m, weight = _weights_from_edges(signed, model)
            paths.append(
                SimplePath(
                    kind=CLOSED if closed else OPEN,
                    class_leaf=i,
                    station_leaf=j,
                    vertices=vertices,
                    signed_edges=signed,
                    class_weights=m,
                    weight=weight,
                    sign_class=_sign_class(weight, tol),
                    dependence=_classify_edges(signed, model, tol),
                )
            )
    return paths


def _reachable(adj: dict[int, list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def basic_cycle_weights(
    sol: FluidSolution, model: NetworkModel
) -> list[tuple[tuple[int, ...], float]]:
    """Signed weights of the fundamental cycles of the basic graph.

    Diagnostic for non-tree basic graphs: each basic edge outside a spanning
    forest closes one cycle, whose weight is the alternating signed rate sum
    around it (class-to-station steps count -1, station-to-class +1). The
    sign of a cycle weight depends on traversal direction; its zero-ness does
    not.
    """
    edges = sorted(sol.basic_edges)
    forest_adj: dict[int, list[int]] = {}
    in_forest: list[tuple[int, int]] = []
    extra: list[tuple[int, int]] = []
    for i, j in edges:
        if i in forest_adj and j in forest_adj and j in _reachable(forest_adj, i):
            extra.append((i, j))
            continue
        forest_adj.setdefault(i, []).append(j)
        forest_adj.setdefault(j, []).append(i)
        in_forest.append((i, j))

    cycles = []
    for i, j in extra:
        walk = _tree_path(forest_adj, j, i)  # station ... class
        sequence = [i] + walk  # i -> j -> ... -> i
        cycle_vertices = tuple(sequence[:-1])
        weight = 0.0
        for idx in range(len(sequence) - 1):
            u, v = sequence[idx], sequence[idx + 1]
            if u <= model.num_classes:
                weight += -model.rate(u, v)
            else:
                weight += model.rate(v, u)
        cycles.append((cycle_vertices, weight))
    return cycles
