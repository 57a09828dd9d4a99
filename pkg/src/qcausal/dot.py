"""Deterministic Graphviz DOT text for signalling graphs, region structures and networks."""

from __future__ import annotations

from .network import QuantumNetwork
from .signalling import SigGraph, node_label
from .spacetime import RegionCausalStructure


def quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _emit(name: str, nodes: list[str], edges: list[tuple[str, str]], attrs: dict[str, str] | None = None) -> str:
    lines = [f"digraph {quote(name)} {{"]
    for k, v in sorted((attrs or {}).items()):
        lines.append(f"  {k}={quote(v)};")
    for n in nodes:
        lines.append(f"  {quote(n)};")
    for a, b in edges:
        lines.append(f"  {quote(a)} -> {quote(b)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def sig_to_dot(sig: SigGraph, name: str = "signalling") -> str:
    """One node per set that appears in an edge, labelled by its brace-joined members."""
    edges = [(node_label(a), node_label(b)) for a, b in sig.sorted_edges()]
    nodes = sorted({n for e in edges for n in e})
    return _emit(name, nodes, sorted(edges))


def regions_to_dot(g: RegionCausalStructure, name: str = "regions") -> str:
    labels = [r.label for r in g.regions]
    edges = sorted((labels[i], labels[j]) for i, j in g.edges)
    return _emit(name, sorted(labels), edges)


def network_to_dot(net: QuantumNetwork, name: str = "network") -> str:
    """Maps as nodes; a labelled edge per composition."""
    lines = [f"digraph {quote(name)} {{"]
    for mid in sorted(net.maps):
        lines.append(f"  {quote(mid)};")
    for c in sorted(net.comps):
        lines.append(f"  {quote(c.src_map)} -> {quote(c.dst_map)} [label={quote(c.src_sys)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = ["quote", "sig_to_dot", "regions_to_dot", "network_to_dot"]
