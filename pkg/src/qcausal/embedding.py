"""Spacetime embeddings of networks and the relativistic causality check."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .finegraining import SystemsFineGraining
from .linalg import DEFAULT_TOL
from .network import QuantumNetwork, network_systems
from .signalling import NetworkSignalling, SigGraph, _candidate_sets, node_label
from .spacetime import (Partition, Region, RegionCausalStructure, Spacetime, SpacetimeError, is_acyclic, refine)


class EmbeddingError(ValueError):
    """Unassigned systems or regions outside the declared spacetime."""


@dataclass(frozen=True)
class Embedding:
    assign: Mapping[str, Region]
    spacetime: Spacetime | None = None

    def __post_init__(self):
        object.__setattr__(self, "assign", dict(sorted(self.assign.items())))
        if self.spacetime is not None:
            pts = set(self.spacetime.points)
            for s, r in self.assign.items():
                if not r.points <= pts:
                    raise EmbeddingError(f"region of {s!r} leaves the spacetime")

    def region(self, system: str) -> Region:
        try:
            return self.assign[system]
        except KeyError:
            raise EmbeddingError(f"system {system!r} is not assigned a region") from None

    def points_of(self, systems: Iterable[str]) -> frozenset:
        """E(S) for a set: the union of member regions."""
        out: set = set()
        for s in systems:
            out |= self.region(s).points
        return frozenset(out)

    def image(self) -> list[Region]:
        """Distinct regions in the image, in first-assigned order."""
        out: list[Region] = []
        for r in self.assign.values():
            if r not in out:
                out.append(r)
        return sorted(out, key=Region.sort_key)


@dataclass
class Realisation:
    network: QuantumNetwork
    embedding: Embedding
    fine_net: QuantumNetwork
    fine_map: SystemsFineGraining
    partitions: Mapping[Region, Partition]
    fine_embedding: Embedding
    spacetime: Spacetime

    def refined_structure(self) -> RegionCausalStructure:
        return refine(self.embedding.image(), self.partitions, self.spacetime)


@dataclass
class CompatReport:
    ok: bool
    violations: list[tuple[frozenset, frozenset]] = field(default_factory=list)
    checked: int = 0
    precondition: str | None = None

    def describe(self) -> list[str]:
        lines = [f"{node_label(a)} -> {node_label(b)} has no matching path" for a, b in self.violations]
        if self.precondition:
            lines.insert(0, self.precondition)
        return lines


def _overlapping(g: RegionCausalStructure, points: frozenset) -> list[int]:
    return [i for i, r in enumerate(g.regions) if r.overlaps(points)]


class _Paths:
    def __init__(self, g: RegionCausalStructure):
        self.g = g
        self._reach: dict[int, set[int]] = {}

    def reach(self, i):
        if i not in self._reach:
            self._reach[i] = self.g.reachable(i)
        return self._reach[i]

    def matched(self, src: list[int], dst: list[int]) -> bool:
        return any(j in self.reach(i) for i in src for j in dst)


def compatible(sig: SigGraph, emb: Embedding, g: RegionCausalStructure) -> CompatReport:
    """Every signalling edge S1 -> S2 needs a directed path from a region overlapping E(S1) to one overlapping E(S2)."""
    paths = _Paths(g)
    violations = []
    for a, b in sig.sorted_edges():
        src = _overlapping(g, emb.points_of(a))
        dst = _overlapping(g, emb.points_of(b))
        if not paths.matched(src, dst):
            violations.append((a, b))
    return CompatReport(not violations, violations, len(sig.edges))


def relativistic_causality(r: Realisation, max_set_size: int | None = 1, tol: float = DEFAULT_TOL,
                           sig: SigGraph | None = None) -> CompatReport:
    """Fine-grained signalling against the refined region causal structure.

    Signalling is only evaluated for set pairs that lack a matching path, which
    gives the same verdict as computing the full structure first.
    """
    try:
        g = r.refined_structure()
    except SpacetimeError as exc:
        return CompatReport(False, precondition=f"refinement failed: {exc}")
    if not is_acyclic(g):
        return CompatReport(False, precondition="refined region causal structure is cyclic")
    problems = check_fine_embedding(r)
    if problems:
        return CompatReport(False, precondition="; ".join(problems))
    paths = _Paths(g)
    violations = []
    checked = 0
    if sig is not None:
        for a, b in sig.sorted_edges():
            checked += 1
            if not paths.matched(_overlapping(g, r.fine_embedding.points_of(a)),
                                 _overlapping(g, r.fine_embedding.points_of(b))):
                violations.append((a, b))
        return CompatReport(not violations, violations, checked)
    ns = NetworkSignalling(r.fine_net, tol)
    for a in _candidate_sets(ns.sources, max_set_size):
        for b in _candidate_sets(ns.targets, max_set_size):
            if a & b:
                continue
            src = _overlapping(g, r.fine_embedding.points_of(a))
            dst = _overlapping(g, r.fine_embedding.points_of(b))
            if paths.matched(src, dst):
                continue
            checked += 1
            if ns.signals(a, b):
                violations.append((a, b))
    return CompatReport(not violations, violations, checked)


def check_fine_embedding(r: Realisation) -> list[str]:
    """Fine systems must sit inside their coarse system's region and cover the fine network."""
    problems = []
    fine_systems = set(network_systems(r.fine_net))
    for s in sorted(fine_systems):
        if s not in r.fine_embedding.assign:
            problems.append(f"fine system {s!r} has no region")
    for coarse, fines in r.fine_map.assign.items():
        if coarse not in r.embedding.assign:
            continue
        outer = r.embedding.assign[coarse].points
        for f in sorted(fines):
            if f in r.fine_embedding.assign and not r.fine_embedding.assign[f].points <= outer:
                problems.append(f"fine system {f!r} lies outside the region of {coarse!r}")
    return problems


def forced_graph(sig: SigGraph, emb: Embedding) -> tuple[list[Region], set[tuple[int, int]]]:
    """Region graph forced by singleton signalling edges: E(s1) -> E(s2)."""
    regions = emb.image()
    index = {r: k for k, r in enumerate(regions)}
    edges = set()
    for a, b in sig.singleton_edges():
        edges.add((index[emb.region(a)], index[emb.region(b)]))
    return regions, edges


def certify_cycle(sig: SigGraph, emb: Embedding) -> list[Region] | None:
    """Shortest directed cycle in the forced region graph, or None.

    Ties are broken by the position of the cycle's first region in the image order.
    """
    regions, edges = forced_graph(sig, emb)
    succ: dict[int, list[int]] = {}
    for i, j in sorted(edges):
        succ.setdefault(i, []).append(j)
    best = None
    for start in range(len(regions)):
        # BFS for the shortest path start -> ... -> start
        parent = {}
        queue = deque()
        for s in succ.get(start, []):
            if s not in parent:
                parent[s] = start
                queue.append(s)
        found = start in parent
        while queue and not found:
            u = queue.popleft()
            for v in succ.get(u, []):
                if v not in parent:
                    parent[v] = u
                    if v == start:
                        found = True
                        break
                    queue.append(v)
        if not found:
            continue
        cycle = [start]
        u = parent[start]
        while u != start:
            cycle.append(u)
            u = parent[u]
        cycle = [cycle[0]] + cycle[1:][::-1]
        if best is None or len(cycle) < len(best):
            best = cycle
    return None if best is None else [regions[k] for k in best]


def compatible_on_graph(sig: SigGraph, emb: Embedding, nodes: Sequence[Region], edges: Iterable[tuple[int, int]]
                        ) -> bool:
    """Compatibility against an abstract directed graph over the given regions."""
    g = RegionCausalStructure(tuple(nodes), frozenset(edges))
    return compatible(sig, emb, g).ok


def acyclic_assignment_exists(sig: SigGraph, emb: Embedding) -> tuple[bool, tuple | None]:
    """Search all acyclic region graphs on the image for one compatible with ``sig``.

    Compatibility only improves when edges are added, and every DAG sits inside
    the transitive tournament of one of its topological orders, so checking the
    n! total orders is exhaustive.
    """
    regions = emb.image()
    n = len(regions)
    for perm in itertools.permutations(range(n)):
        pos = {k: i for i, k in enumerate(perm)}
        edges = {(a, b) for a in range(n) for b in range(n) if pos[a] < pos[b]}
        if compatible_on_graph(sig, emb, regions, edges):
            return True, perm
    return False, None


def acyclic_assignment_exists_bruteforce(sig: SigGraph, emb: Embedding, max_regions: int = 4) -> bool:
    """Same question by enumerating every edge subset (small images only)."""
    regions = emb.image()
    n = len(regions)
    if n > max_regions:
        raise ValueError(f"{n} regions is too many for the brute-force search")
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    for mask in range(1 << len(pairs)):
        edges = [pairs[k] for k in range(len(pairs)) if mask >> k & 1]
        g = nx.DiGraph(edges)
        g.add_nodes_from(range(n))
        if not nx.is_directed_acyclic_graph(g):
            continue
        if compatible_on_graph(sig, emb, regions, edges):
            return True
    return False


@dataclass
class IOReport:
    ok: bool
    matchings: dict[str, list[tuple[Region, Region]]] = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)


def io_correspondence(emb: Embedding, partitions: Mapping[Region, Partition], st: Spacetime,
                      parties: Sequence[tuple[str, str]]) -> IOReport:
    """Match each party's input parts to output parts with every input part preceding its output part."""
    image = emb.image()
    g = refine(image, partitions, st)
    matchings = {}
    problems = []
    for in_sys, out_sys in parties:
        rin, rout = emb.region(in_sys), emb.region(out_sys)
        pin = partitions[rin].parts if rin in partitions else (rin,)
        pout = partitions[rout].parts if rout in partitions else (rout,)
        if len(pin) != len(pout):
            raise EmbeddingError(f"{in_sys!r} has {len(pin)} parts but {out_sys!r} has {len(pout)}")
        b = nx.Graph()
        left = [("in", k) for k in range(len(pin))]
        right = [("out", k) for k in range(len(pout))]
        b.add_nodes_from(left, bipartite=0)
        b.add_nodes_from(right, bipartite=1)
        for i, p in enumerate(pin):
            for j, q in enumerate(pout):
                if (g.index(p), g.index(q)) in g.edges:
                    b.add_edge(("in", i), ("out", j))
        m = nx.bipartite.hopcroft_karp_matching(b, top_nodes=left)
        pairs = [(pin[i], pout[m[("in", i)][1]]) for i in range(len(pin)) if ("in", i) in m]
        if len(pairs) != len(pin):
            problems.append(f"party {in_sys}/{out_sys}: no perfect input-output matching")
        matchings[f"{in_sys}/{out_sys}"] = pairs
    return IOReport(not problems, matchings, problems)
