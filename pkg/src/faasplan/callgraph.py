"""Call-graph representation and edit-distance measures.

Two distances are provided. `approx_ged` decomposes both graphs into
per-vertex star structures and solves a minimum-cost perfect assignment
between them, which runs in O(n^3) and scales to real call graphs.
`exact_ged` is a best-first search over vertex mappings with unit edit
costs; it is exponential and guarded by a size limit, but it gives the
true edit distance for the small graphs used to validate the
approximation.
"""
from __future__ import annotations

import heapq
import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import TooLarge


@dataclass(frozen=True)
class Vertex:
    id: str
    label: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("vertex id must be non-empty")


@dataclass(frozen=True)
class CallGraph:
    """A directed call graph with labelled vertices."""

    vertices: Tuple[Vertex, ...]
    edges: Tuple[Tuple[str, str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple((a, b) for a, b in self.edges))
        ids = [v.id for v in self.vertices]
        if len(set(ids)) != len(ids):
            raise ValueError("vertex ids must be unique")
        known = set(ids)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) references an unknown vertex")
            if a == b:
                raise ValueError(f"self-loop on {a} is not allowed")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges are not allowed")

    def __len__(self) -> int:
        return len(self.vertices)

    def labels(self) -> Dict[str, str]:
        return {v.id: v.label for v in self.vertices}

    def undirected_neighbors(self, vertex_id: str) -> FrozenSet[str]:
        out = {b for a, b in self.edges if a == vertex_id}
        inc = {a for a, b in self.edges if b == vertex_id}
        return frozenset(out | inc)


@dataclass(frozen=True)
class StarStructure:
    """A vertex label plus the multiset of its undirected neighbour labels.

    A center label of None marks a padding star used to even out graphs
    of different sizes; it mismatches every real label.
    """

    center_label: Optional[str]
    neighbor_labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "neighbor_labels", tuple(sorted(self.neighbor_labels)))

    @property
    def degree(self) -> int:
        return len(self.neighbor_labels)


#: The padding star matched against leftover vertices of the larger graph.
EMPTY_STAR = StarStructure(center_label=None, neighbor_labels=())


@dataclass(frozen=True)
class GedResult:
    distance: float
    is_exact: bool


def build_stars(graph: CallGraph) -> Tuple[StarStructure, ...]:
    """One star per vertex, in vertex order, over the undirected view."""
    labels = graph.labels()
    stars = []
    for v in graph.vertices:
        neigh = tuple(labels[n] for n in graph.undirected_neighbors(v.id))
        stars.append(StarStructure(center_label=v.label, neighbor_labels=neigh))
    return tuple(stars)


def star_distance(s1: StarStructure, s2: StarStructure) -> float:
    """Edit-style distance between two stars.

    Sum of a 0/1 center-label mismatch, the absolute degree gap, and the
    number of neighbour labels that cannot be paired up between the two
    multisets.
    """
    label_term = 0.0 if s1.center_label == s2.center_label else 1.0
    degree_term = abs(s1.degree - s2.degree)
    c1, c2 = Counter(s1.neighbor_labels), Counter(s2.neighbor_labels)
    overlap = sum((c1 & c2).values())
    multiset_term = max(s1.degree, s2.degree) - overlap
    return label_term + degree_term + multiset_term


def _padded_stars(g1: CallGraph, g2: CallGraph) -> Tuple[Sequence[StarStructure], Sequence[StarStructure]]:
    stars1, stars2 = list(build_stars(g1)), list(build_stars(g2))
    size = max(len(stars1), len(stars2))
    stars1 += [EMPTY_STAR] * (size - len(stars1))
    stars2 += [EMPTY_STAR] * (size - len(stars2))
    return stars1, stars2


def approx_ged(g1: CallGraph, g2: CallGraph) -> GedResult:
    """Star-assignment approximation of the graph edit distance.

    The smaller graph is padded with empty stars, then a minimum-cost
    perfect assignment between the two star multisets is solved and its
    total cost returned.
    """
    if len(g1) == 0 and len(g2) == 0:
        return GedResult(distance=0.0, is_exact=False)
    stars1, stars2 = _padded_stars(g1, g2)
    n = len(stars1)
    cost = np.empty((n, n), dtype=float)
    for i, s1 in enumerate(stars1):
        for j, s2 in enumerate(stars2):
            cost[i, j] = star_distance(s1, s2)
    rows, cols = linear_sum_assignment(cost)
    return GedResult(distance=float(cost[rows, cols].sum()), is_exact=False)


def exact_ged(g1: CallGraph, g2: CallGraph, max_vertices: int = 6) -> GedResult:
    """Exact graph edit distance under unit edit costs.

    Costs: 1 per vertex insertion, deletion or relabel; 1 per directed
    edge insertion or deletion. Solved with best-first search over
    partial vertex mappings; the admissible remaining-cost bound is the
    difference in unmapped vertex counts. Graphs larger than
    max_vertices on either side raise TooLarge.
    """
    if max(len(g1), len(g2)) > max_vertices:
        raise TooLarge(
            f"exact search limited to {max_vertices} vertices, "
            f"got {len(g1)} and {len(g2)}"
        )
    v1, v2 = g1.vertices, g2.vertices
    n1, n2 = len(v1), len(v2)
    e1, e2 = set(g1.edges), set(g2.edges)
    if n1 == 0:
        return GedResult(distance=float(n2 + len(e2)), is_exact=True)

    def edge_step_cost(i: int, choice: Optional[int], mapping: Tuple[Optional[int], ...]) -> float:
        # Edits for edges between v1[i] and every previously processed vertex.
        cost = 0.0
        u = v1[i].id
        w = v2[choice].id if choice is not None else None
        for j, mj in enumerate(mapping):
            p = v1[j].id
            q = v2[mj].id if mj is not None else None
            for a, b in ((u, p), (p, u)):
                has1 = (a, b) in e1
                if w is None or q is None:
                    has2 = False
                else:
                    c, d = (w, q) if a == u else (q, w)
                    has2 = (c, d) in e2
                cost += abs(int(has1) - int(has2))
        return cost

    def completion_cost(mapping: Tuple[Optional[int], ...]) -> float:
        used = {m for m in mapping if m is not None}
        leftover = [v2[k].id for k in range(n2) if k not in used]
        if not leftover:
            return 0.0
        left = set(leftover)
        dangling = sum(1 for a, b in e2 if a in left or b in left)
        return float(len(leftover) + dangling)

    def lower_bound(i: int, used_count: int) -> float:
        return float(abs((n1 - i) - (n2 - used_count)))

    counter = itertools.count()
    start = (lower_bound(0, 0), next(counter), 0, (), 0.0)
    heap = [start]
    while heap:
        _, _, i, mapping, g = heapq.heappop(heap)
        if i == n1:
            return GedResult(distance=g, is_exact=True)
        used = {m for m in mapping if m is not None}
        candidates: Iterable[Optional[int]] = [k for k in range(n2) if k not in used]
        for choice in list(candidates) + [None]:
            if choice is None:
                step = 1.0 + edge_step_cost(i, None, mapping)
            else:
                relabel = 0.0 if v1[i].label == v2[choice].label else 1.0
                step = relabel + edge_step_cost(i, choice, mapping)
            new_mapping = mapping + (choice,)
            new_g = g + step
            new_used = len(used) + (choice is not None)
            if i + 1 == n1:
                new_g += completion_cost(new_mapping)
                f = new_g
            else:
                f = new_g + lower_bound(i + 1, new_used)
            heapq.heappush(heap, (f, next(counter), i + 1, new_mapping, new_g))
    raise RuntimeError("search exhausted without a complete mapping")


EDIT_KINDS = ("relabel", "add_vertex", "del_vertex", "add_edge", "del_edge")


def apply_random_edits(
    graph: CallGraph,
    count: int,
    rng: np.random.Generator,
    kinds: Sequence[str] = EDIT_KINDS,
) -> CallGraph:
    """Apply `count` random unit edit operations to a copy of the graph.

    Inserted vertices and rewritten labels draw from a fresh namespace so
    every edit moves the graph away from the original. Edge insertion
    skips vertex pairs already connected in either direction (antiparallel
    edges collapse in the undirected star view and would be invisible to
    the approximation). Deleting a vertex also drops its incident edges.
    Raises ValueError when no requested kind is applicable (e.g. deleting
    from an empty graph).
    """
    unknown = set(kinds) - set(EDIT_KINDS)
    if unknown:
        raise ValueError(f"unknown edit kinds: {sorted(unknown)}")
    verts: Dict[str, str] = {v.id: v.label for v in graph.vertices}
    edges = list(graph.edges)
    fresh = itertools.count()

    def fresh_name(prefix: str, taken) -> str:
        while True:
            name = f"{prefix}{next(fresh)}"
            if name not in taken:
                return name

    for _ in range(count):
        linked = set(edges) | {(b, a) for a, b in edges}
        open_pairs = [
            (a, b)
            for a in verts
            for b in verts
            if a < b and (a, b) not in linked
        ]
        feasible = []
        for kind in kinds:
            if kind in ("relabel", "del_vertex") and verts:
                feasible.append(kind)
            elif kind == "add_vertex":
                feasible.append(kind)
            elif kind == "add_edge" and open_pairs:
                feasible.append(kind)
            elif kind == "del_edge" and edges:
                feasible.append(kind)
        if not feasible:
            raise ValueError("no applicable edit operation")
        kind = feasible[rng.integers(len(feasible))]
        if kind == "relabel":
            vid = sorted(verts)[rng.integers(len(verts))]
            verts[vid] = fresh_name("X", set(verts.values()))
        elif kind == "add_vertex":
            vid = fresh_name("v+", verts.keys())
            verts[vid] = fresh_name("X", set(verts.values()))
        elif kind == "del_vertex":
            vid = sorted(verts)[rng.integers(len(verts))]
            del verts[vid]
            edges = [(a, b) for a, b in edges if a != vid and b != vid]
        elif kind == "add_edge":
            a, b = open_pairs[rng.integers(len(open_pairs))]
            edges.append((a, b))
        else:
            edges.pop(rng.integers(len(edges)))
    return CallGraph(
        vertices=tuple(Vertex(i, label) for i, label in verts.items()),
        edges=tuple(edges),
    )
