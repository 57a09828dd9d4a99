"""Cyclic quantum networks: CPMs wired together by loop compositions."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import networkx as nx

from .linalg import CPM, DimensionError, LabelError, SystemLabel, compose, cpm_tensor, loop_compose

Leg = tuple[str, str]


@dataclass(frozen=True, order=True)
class Composition:
    """Output ``src_sys`` of map ``src_map`` fed into input ``dst_sys`` of ``dst_map``."""

    src_map: str
    src_sys: str
    dst_map: str
    dst_sys: str

    @property
    def src(self) -> Leg:
        return (self.src_map, self.src_sys)

    @property
    def dst(self) -> Leg:
        return (self.dst_map, self.dst_sys)

    def __str__(self):
        return f"{self.src_map}.{self.src_sys} -> {self.dst_map}.{self.dst_sys}"


class NetworkError(ValueError):
    """The network violates a structural constraint."""


@dataclass(frozen=True)
class SubNetwork:
    maps: frozenset[str]
    comps: frozenset[Composition] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "maps", frozenset(self.maps))
        object.__setattr__(self, "comps", frozenset(self.comps))
        for c in self.comps:
            if c.src_map not in self.maps or c.dst_map not in self.maps:
                raise NetworkError(f"composition {c} joins maps outside the sub-network")

    def key(self):
        return (len(self.maps), sorted(self.maps), len(self.comps), sorted(self.comps))

    def __str__(self):
        comps = ", ".join(str(c) for c in sorted(self.comps))
        return "{" + ", ".join(sorted(self.maps)) + "}" + (f" with [{comps}]" if comps else "")


class QuantumNetwork:
    """A finite set of named CPMs plus loop compositions between them."""

    def __init__(self, maps: Mapping[str, CPM] | Sequence[tuple[str, CPM]], comps: Iterable[Composition] = ()):
        items = list(maps.items()) if isinstance(maps, Mapping) else list(maps)
        seen: dict[str, CPM] = {}
        for mid, cpm in items:
            if not isinstance(mid, str) or not mid:
                raise NetworkError(f"map id must be a nonempty string, got {mid!r}")
            if mid in seen:
                raise NetworkError(f"map id {mid!r} used twice")
            if not isinstance(cpm, CPM):
                raise NetworkError(f"map {mid!r} is not a CPM")
            seen[mid] = cpm
        self.maps: dict[str, CPM] = dict(sorted(seen.items()))
        comps = list(comps)
        if len(set(comps)) != len(comps):
            dup = next(c for c, n in Counter(comps).items() if n > 1)
            raise NetworkError(f"composition {dup} listed twice")
        self.comps: tuple[Composition, ...] = tuple(sorted(comps))

    @property
    def ids(self) -> list[str]:
        return list(self.maps)

    def full(self) -> SubNetwork:
        return SubNetwork(frozenset(self.maps), frozenset(self.comps))

    def legs(self) -> list[tuple[Leg, SystemLabel, str]]:
        """Every (map, system) leg with its label and role ('in' or 'out')."""
        out = []
        for mid, cpm in self.maps.items():
            out += [((mid, s.name), s, "in") for s in cpm.inputs]
            out += [((mid, s.name), s, "out") for s in cpm.outputs]
        return out

    def __repr__(self):
        return f"QuantumNetwork(maps={list(self.maps)}, comps={len(self.comps)})"


def validate(net: QuantumNetwork) -> list[str]:
    """Structural violations of ``net``; an empty list means the network is valid."""
    problems = []
    used: dict[Leg, Composition] = {}
    for c in net.comps:
        ok = True
        for mid in (c.src_map, c.dst_map):
            if mid not in net.maps:
                problems.append(f"dangling map id {mid!r} in composition {c}")
                ok = False
        if not ok:
            continue
        src_cpm, dst_cpm = net.maps[c.src_map], net.maps[c.dst_map]
        src = next((s for s in src_cpm.outputs if s.name == c.src_sys), None)
        dst = next((s for s in dst_cpm.inputs if s.name == c.dst_sys), None)
        if src is None:
            role = "an input" if any(s.name == c.src_sys for s in src_cpm.inputs) else "unknown"
            problems.append(f"composition {c}: source {c.src_map}.{c.src_sys} is {role}, not an output")
        if dst is None:
            role = "an output" if any(s.name == c.dst_sys for s in dst_cpm.outputs) else "unknown"
            problems.append(f"composition {c}: target {c.dst_map}.{c.dst_sys} is {role}, not an input")
        if src is not None and dst is not None and src.dim != dst.dim:
            problems.append(f"dimension mismatch in composition {c}: {src.dim} vs {dst.dim}")
        for leg in (c.src, c.dst):
            if leg in used:
                problems.append(f"endpoint reused: {leg[0]}.{leg[1]} appears in {used[leg]} and {c}")
            else:
                used[leg] = c
    return problems


def _require_valid(net: QuantumNetwork):
    problems = validate(net)
    if problems:
        raise NetworkError("invalid network: " + "; ".join(problems))


def composed_name(c: Composition) -> str:
    return c.src_sys if c.src_sys == c.dst_sys else f"{c.src_sys}={c.dst_sys}"


def system_names(net: QuantumNetwork) -> dict[Leg, str]:
    """Network-level name of every leg; composed legs share the identified system's name."""
    _require_valid(net)
    names: dict[Leg, str] = {}
    for c in net.comps:
        names[c.src] = names[c.dst] = composed_name(c)
    free = [(leg, s) for leg, s, _ in net.legs() if leg not in names]
    counts = Counter(s.name for _, s in free)
    counts.update(set(names.values()))
    for leg, s in free:
        names[leg] = s.name if counts[s.name] == 1 else f"{leg[0]}.{s.name}"
    pairs = {frozenset((c.src, c.dst)) for c in net.comps}
    by: dict[str, set[Leg]] = {}
    for leg, n in names.items():
        by.setdefault(n, set()).add(leg)
    for n, group in by.items():
        if len(group) > 1 and frozenset(group) not in pairs:
            raise NetworkError(f"system name {n!r} is ambiguous; rename systems")
    return names


def network_systems(net: QuantumNetwork) -> dict[str, SystemLabel]:
    """All systems of the network (identified pairs counted once), keyed by name."""
    names = system_names(net)
    out = {}
    for leg, s, _ in net.legs():
        out[names[leg]] = SystemLabel(names[leg], s.dim)
    return dict(sorted(out.items()))


def free_systems(net: QuantumNetwork) -> tuple[list[SystemLabel], list[SystemLabel]]:
    """Uncomposed inputs and outputs, under their network-level names."""
    names = system_names(net)
    composed = {leg for c in net.comps for leg in (c.src, c.dst)}
    ins, outs = [], []
    for leg, s, role in net.legs():
        if leg in composed:
            continue
        (ins if role == "in" else outs).append(SystemLabel(names[leg], s.dim))
    return ins, outs


def _free_leg_names(net: QuantumNetwork, sub: SubNetwork) -> dict[Leg, str]:
    """Names for the free legs of a sub-network's induced map.

    Legs free in the whole network keep their network name. Legs cut open by
    the sub-network keep their label when unambiguous, else become ``map.label``.
    """
    full = system_names(net)
    net_composed = {leg for c in net.comps for leg in (c.src, c.dst)}
    sub_composed = {leg for c in sub.comps for leg in (c.src, c.dst)}
    free = [(leg, s) for leg, s, _ in net.legs() if leg[0] in sub.maps and leg not in sub_composed]
    taken = Counter(full[leg] for leg, _ in free if leg not in net_composed)
    cut_counts = Counter(s.name for leg, s in free if leg in net_composed)
    names = {}
    for leg, s in free:
        if leg not in net_composed:
            names[leg] = full[leg]
        elif cut_counts[s.name] == 1 and taken[s.name] == 0:
            names[leg] = s.name
        else:
            names[leg] = f"{leg[0]}.{s.name}"
    return names


def induced_map(net: QuantumNetwork, sub: SubNetwork | None = None, *,
                order: Sequence[Composition] | None = None,
                names: Mapping[Leg, str] | None = None) -> CPM:
    """Tensor the sub-network's maps and perform its compositions.

    The default route contracts everything at once. Passing ``order`` instead
    tensors the maps and applies the loops one at a time in that order, which
    is slower but gives an independent route for order-independence checks.
    ``names`` overrides the names of free legs.
    """
    _require_valid(net)
    sub = net.full() if sub is None else sub
    if not sub.maps:
        raise NetworkError("empty sub-network induces no map")
    for mid in sub.maps:
        if mid not in net.maps:
            raise NetworkError(f"sub-network map {mid!r} not in network")
    for c in sub.comps:
        if c not in net.comps:
            raise NetworkError(f"sub-network composition {c} not in network")
    leg_names = _free_leg_names(net, sub)
    if names:
        leg_names.update(names)
    ids = sorted(sub.maps)

    if order is None:
        index = {mid: k for k, mid in enumerate(ids)}
        links = [((index[c.src_map], c.src_sys), (index[c.dst_map], c.dst_sys)) for c in sub.comps]
        rename = {(index[m], s): n for (m, s), n in leg_names.items()}
        return compose([net.maps[m] for m in ids], links, rename)

    order = list(order)
    if sorted(order) != sorted(sub.comps):
        raise NetworkError("order must list each composition of the sub-network exactly once")
    total = None
    for mid in ids:
        cpm = net.maps[mid]
        tagged = cpm.rename({s.name: f"{mid}:{s.name}" for s in cpm.systems})
        total = tagged if total is None else cpm_tensor(total, tagged)
    for c in order:
        total = loop_compose(total, f"{c.src_map}:{c.src_sys}", f"{c.dst_map}:{c.dst_sys}")
    return total.rename({f"{m}:{s}": n for (m, s), n in leg_names.items()})


def enumerate_subnetworks(net: QuantumNetwork, max_maps: int = 6) -> Iterator[SubNetwork]:
    """Nonempty sub-networks with at most ``max_maps`` maps, each with every subset of its internal compositions."""
    ids = sorted(net.maps)
    for k in range(1, min(max_maps, len(ids)) + 1):
        for chosen in itertools.combinations(ids, k):
            chosen_set = set(chosen)
            internal = [c for c in net.comps if c.src_map in chosen_set and c.dst_map in chosen_set]
            for r in range(len(internal) + 1):
                for comps in itertools.combinations(internal, r):
                    yield SubNetwork(frozenset(chosen), frozenset(comps))


def components(sub: SubNetwork, net: QuantumNetwork | None = None) -> list[SubNetwork]:
    """Connected pieces of a sub-network; its induced map is their tensor product.

    Given ``net``, links over dimension-1 systems are dropped, since composing
    along a trivial system is already a tensor product.
    """
    def trivial(c):
        return net is not None and net.maps[c.src_map].output(c.src_sys).dim == 1

    links = [c for c in sub.comps if not trivial(c)]
    g = nx.Graph()
    g.add_nodes_from(sub.maps)
    g.add_edges_from((c.src_map, c.dst_map) for c in links)
    if nx.number_connected_components(g) == 1:
        return [sub]
    out = []
    for part in nx.connected_components(g):
        comps = frozenset(c for c in links if c.src_map in part)
        out.append(SubNetwork(frozenset(part), comps))
    return sorted(out, key=SubNetwork.key)


def chain_network(dims: Sequence[int], prefix: str = "S") -> QuantumNetwork:
    """Identity channels S0->S1->...->Sn wired in a line (small test fixture)."""
    maps = {}
    comps = []
    for k in range(len(dims) - 1):
        if dims[k] != dims[k + 1]:
            raise DimensionError("chain of identities needs equal dimensions")
        maps[f"m{k}"] = CPM.identity(SystemLabel(f"{prefix}{k}", dims[k]), SystemLabel(f"{prefix}{k + 1}", dims[k]))
        if k:
            comps.append(Composition(f"m{k - 1}", f"{prefix}{k}", f"m{k}", f"{prefix}{k}"))
    return QuantumNetwork(maps, comps)


__all__ = [
    "Composition", "NetworkError", "QuantumNetwork", "SubNetwork", "LabelError",
    "validate", "system_names", "network_systems", "free_systems", "induced_map",
    "enumerate_subnetworks", "components", "chain_network", "composed_name",
]
