"""Finite spacetimes as strict partial orders, regions and region causal structures."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import networkx as nx

Point = Hashable


def _sorted_points(points: Iterable[Point]) -> list[Point]:
    points = list(points)
    try:
        return sorted(points)
    except TypeError:
        return sorted(points, key=repr)


class SpacetimeError(ValueError):
    """Malformed spacetime, region or partition."""


@dataclass(frozen=True)
class Spacetime:
    """A finite set of points with a strict precedence relation ``p < q``."""

    points: tuple
    order: frozenset

    def __init__(self, points: Iterable[Point], order: Iterable[tuple[Point, Point]]):
        object.__setattr__(self, "points", tuple(_sorted_points(set(points))))
        object.__setattr__(self, "order", frozenset((p, q) for p, q in order))

    def precedes(self, p: Point, q: Point) -> bool:
        return (p, q) in self.order

    def __contains__(self, p):
        return p in set(self.points)

    def __repr__(self):
        return f"Spacetime({len(self.points)} points, {len(self.order)} relations)"


def validate_spacetime(st: Spacetime) -> list[str]:
    problems = []
    pts = set(st.points)
    for p, q in sorted(st.order, key=repr):
        if p not in pts or q not in pts:
            problems.append(f"relation {p!r} < {q!r} mentions an unknown point")
        if p == q:
            problems.append(f"irreflexivity violated at {p!r}")
        elif (q, p) in st.order and repr(p) < repr(q):
            problems.append(f"antisymmetry violated: {p!r} < {q!r} and {q!r} < {p!r}")
    succ: dict[Point, set] = {}
    for p, q in st.order:
        succ.setdefault(p, set()).add(q)
    for p, q in sorted(st.order, key=repr):
        for r in sorted(succ.get(q, ()), key=repr):
            if (p, r) not in st.order and p != r:
                problems.append(f"transitivity violated: {p!r} < {q!r} < {r!r} but not {p!r} < {r!r}")
    return problems


def transitive_closure(st: Spacetime) -> Spacetime:
    g = nx.DiGraph()
    g.add_nodes_from(st.points)
    g.add_edges_from(st.order)
    closed = nx.transitive_closure(g, reflexive=False)
    return Spacetime(st.points, closed.edges())


def chain(n: int) -> Spacetime:
    """Points 0..n-1 totally ordered (a timelike line)."""
    return Spacetime(range(n), [(i, j) for i in range(n) for j in range(i + 1, n)])


def light_cone_order(points: Iterable[tuple[int, int]]) -> Spacetime:
    """1+1 Minkowski order on (x, t) samples: p < q iff t_q > t_p and |x_q - x_p| <= t_q - t_p."""
    pts = list(points)
    order = [(p, q) for p in pts for q in pts if q[1] > p[1] and abs(q[0] - p[0]) <= q[1] - p[1]]
    return Spacetime(pts, order)


def minkowski_grid(xs: Iterable[int] | int, ts: Iterable[int] | int) -> Spacetime:
    xs = range(xs) if isinstance(xs, int) else xs
    ts = range(ts) if isinstance(ts, int) else ts
    return light_cone_order([(x, t) for x in xs for t in ts])


@dataclass(frozen=True)
class Region:
    """A nonempty set of points; the name is cosmetic and ignored by equality."""

    points: frozenset
    name: str = field(default="", compare=False)

    def __init__(self, points: Iterable[Point], name: str = ""):
        pts = frozenset(points)
        if not pts:
            raise SpacetimeError(f"region {name!r} is empty")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "name", name)

    @property
    def label(self) -> str:
        return self.name or "{" + ",".join(repr(p) for p in _sorted_points(self.points)) + "}"

    def overlaps(self, other: "Region | Iterable[Point]") -> bool:
        pts = other.points if isinstance(other, Region) else set(other)
        return not self.points.isdisjoint(pts)

    def sort_key(self):
        return repr(_sorted_points(self.points))

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class RegionCausalStructure:
    regions: tuple[Region, ...]
    edges: frozenset[tuple[int, int]]

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(len(self.regions)))
        g.add_edges_from(self.edges)
        return g

    def index(self, region: Region) -> int:
        return self.regions.index(region)

    def reachable(self, i: int) -> set[int]:
        """Regions reachable from ``i`` by a directed path with at least one edge."""
        g = self.graph()
        out = set()
        for s in g.successors(i):
            out.add(s)
            out |= nx.descendants(g, s)
        return out

    def has_path(self, i: int, j: int) -> bool:
        return j in self.reachable(i)

    def edge_labels(self) -> list[tuple[str, str]]:
        return sorted((self.regions[i].label, self.regions[j].label) for i, j in self.edges)


def _check_regions(st: Spacetime, regions: Sequence[Region]):
    pts = set(st.points)
    for r in regions:
        if not r.points <= pts:
            missing = _sorted_points(r.points - pts)
            raise SpacetimeError(f"region {r.label} has points outside the spacetime: {missing}")


def region_causal_structure(st: Spacetime, regions: Sequence[Region], self_loops: bool = True
                            ) -> RegionCausalStructure:
    """Edge i -> j iff some point of region i precedes some point of region j."""
    regions = tuple(regions)
    _check_regions(st, regions)
    edges = set()
    for (i, a), (j, b) in itertools.product(enumerate(regions), repeat=2):
        if i == j and not self_loops:
            continue
        if any((p, q) in st.order for p in a.points for q in b.points):
            edges.add((i, j))
    return RegionCausalStructure(regions, frozenset(edges))


def is_acyclic(g: RegionCausalStructure) -> bool:
    """No directed cycle; a self-loop counts as a cycle."""
    return nx.is_directed_acyclic_graph(g.graph())


@dataclass(frozen=True)
class Partition:
    parent: Region
    parts: tuple[Region, ...]

    def __init__(self, parent: Region, parts: Iterable[Region]):
        parts = tuple(parts)
        union: set = set()
        for p in parts:
            if union & p.points:
                raise SpacetimeError(f"parts of {parent.label} overlap at {_sorted_points(union & p.points)}")
            union |= p.points
        if union != set(parent.points):
            raise SpacetimeError(f"parts do not cover {parent.label} exactly")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "parts", parts)


def points_partition(region: Region, names: Sequence[str] | None = None) -> Partition:
    """Split a region into its single points (ordered by point)."""
    pts = _sorted_points(region.points)
    names = names or [""] * len(pts)
    return Partition(region, [Region([p], n) for p, n in zip(pts, names)])


def refine(regions: Sequence[Region], partitions: Mapping[Region, Partition], st: Spacetime,
           self_loops: bool = True) -> RegionCausalStructure:
    """Region causal structure over all parts; unpartitioned regions pass through whole."""
    for parent, part in partitions.items():
        if part.parent != parent:
            raise SpacetimeError(f"partition keyed by {parent.label} covers {part.parent.label}")
    out: list[Region] = []
    for r in regions:
        pieces = partitions[r].parts if r in partitions else (r,)
        for p in pieces:
            if p not in out:
                out.append(p)
    return region_causal_structure(st, out, self_loops)
