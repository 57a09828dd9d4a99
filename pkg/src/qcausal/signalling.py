"""Signalling relations of CPTP maps and networks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .linalg import (CPM, DEFAULT_TOL, SystemLabel, SystemRef, _prod, compose, marginal, permute_systems,
                     tp_deviation)
from .network import (NetworkError, QuantumNetwork, SubNetwork, free_systems, induced_map, network_systems,
                      system_names, validate)
from .sampling import random_density, random_pure_state, random_unitary, rng_of

MAX_SYSTEMS = 12
DENSE_MARGINAL_DIM = 2048
TP_TOL = 1e-8
PROBE_TOL = 1e-6  # state-difference needed before the probe counts as a signal


class NotTracePreservingError(ValueError):
    """Signalling is only decided for trace-preserving maps."""


def node_label(node: frozenset[str]) -> str:
    return "{" + ",".join(sorted(node)) + "}"


def _node_key(node):
    return (len(node), sorted(node))


@dataclass(frozen=True)
class SigGraph:
    """Signalling edges between sets of systems (input sets to output sets)."""

    systems: tuple[str, ...]
    edges: frozenset[tuple[frozenset[str], frozenset[str]]] = field(default_factory=frozenset)
    max_set_size: int | None = None

    @property
    def nodes(self) -> list[frozenset[str]]:
        ns = {n for e in self.edges for n in e}
        ns |= {frozenset([s]) for s in self.systems}
        return sorted(ns, key=_node_key)

    def sorted_edges(self) -> list[tuple[frozenset[str], frozenset[str]]]:
        return sorted(self.edges, key=lambda e: (_node_key(e[0]), _node_key(e[1])))

    def singleton_edges(self) -> set[tuple[str, str]]:
        return {(next(iter(a)), next(iter(b))) for a, b in self.edges if len(a) == 1 and len(b) == 1}

    def has_edge(self, src: Iterable[str] | str, dst: Iterable[str] | str) -> bool:
        src = {src} if isinstance(src, str) else set(src)
        dst = {dst} if isinstance(dst, str) else set(dst)
        return (frozenset(src), frozenset(dst)) in self.edges

    def __len__(self):
        return len(self.edges)


def _check_sets(cpm: CPM, s_in, s_out) -> tuple[list[SystemLabel], list[SystemLabel]]:
    ins = [cpm.input(s) for s in s_in]
    outs = [cpm.output(s) for s in s_out]
    if len({s.name for s in ins}) != len(ins) or len({s.name for s in outs}) != len(outs):
        raise ValueError("repeated system in signalling query")
    return ins, outs


def check_trace_preserving(cpm: CPM, tol: float = TP_TOL):
    dev = tp_deviation(cpm)
    if dev > tol:
        raise NotTracePreservingError(
            f"map is not trace preserving (deviation {dev:.3g}); the signalling criterion needs a TP map")


def _marginal_rows(cpm: CPM, ins: Sequence[SystemLabel], outs: Sequence[SystemLabel]) -> np.ndarray:
    """Purification of Tr_{Out \\ outs} C with rows ordered (ins, other inputs, outs)."""
    v = cpm.leg_tensor()
    n_in = len(cpm.inputs)
    in_pos = {s.name: k for k, s in enumerate(cpm.inputs)}
    out_pos = {s.name: n_in + k for k, s in enumerate(cpm.outputs)}
    first = [in_pos[s.name] for s in ins]
    rest_in = [k for k in range(n_in) if k not in first]
    kept = [out_pos[s.name] for s in outs]
    traced = [k for k in range(n_in, n_in + len(cpm.outputs)) if k not in kept] + [v.ndim - 1]
    rows = cpm.din * _prod(s.dim for s in outs)
    return v.transpose(first + rest_in + kept + traced).reshape(rows, -1)


def _frob2_gram(a: np.ndarray, b: np.ndarray | None = None) -> float:
    """||a^dagger b||_F^2 (= Tr[(a a^dagger)(b b^dagger)]), via the cheaper Gram side."""
    b = a if b is None else b
    if a.shape[1] * b.shape[1] <= a.shape[0] ** 2:
        g = a.conj().T @ b
        return float(np.vdot(g, g).real)
    ga = a @ a.conj().T
    gb = b @ b.conj().T
    return float(np.vdot(ga, gb).real)


def signals(cpm: CPM, s_in: Iterable[SystemRef], s_out: Iterable[SystemRef], tol: float = DEFAULT_TOL, *,
            check_tp: bool = True) -> bool:
    """True iff the marginal channel onto ``s_out`` depends on the inputs ``s_in``.

    No signalling holds iff Tr_{Out\\s_out} C = I_{s_in}/d (x) Tr_{s_in, Out\\s_out} C.
    """
    ins, outs = _check_sets(cpm, s_in, s_out)
    if check_tp:
        check_trace_preserving(cpm)
    d_si = _prod(s.dim for s in ins)
    d_so = _prod(s.dim for s in outs)
    if d_si == 1 or d_so == 1:
        return False
    d_rest = cpm.din // d_si
    marg_dim = cpm.din * d_so
    if marg_dim <= DENSE_MARGINAL_DIM:
        if cpm.has_purification():
            a = _marginal_rows(cpm, ins, outs)
            m = a @ a.conj().T
        else:
            m = _dense_marginal(cpm, ins, outs)
        m4 = m.reshape(d_si, d_rest * d_so, d_si, d_rest * d_so)
        reduced = np.einsum("iaib->ab", m4)
        expected = np.kron(np.eye(d_si) / d_si, reduced)
        return bool(np.max(np.abs(m - expected)) > tol)
    if cpm.has_purification() and _probe_signals(cpm, ins, outs):
        return True
    # large marginals: ||M - I/d (x) N||_F^2 = Tr M^2 - Tr N^2 / d
    a = _marginal_rows(cpm, ins, outs)
    # N = sum_i a_i a_i^dagger = s s^dagger with s the row blocks side by side
    side = a.reshape(d_si, d_rest * d_so, a.shape[1]).transpose(1, 0, 2).reshape(d_rest * d_so, -1)
    tr_m2 = _frob2_gram(a)
    tr_n2 = _frob2_gram(side)
    dist2 = tr_m2 - tr_n2 / d_si
    slack = 1e3 * np.finfo(float).eps * max(tr_m2, 1.0)
    return bool(dist2 > tol**2 + slack)


def _probe_signals(cpm: CPM, ins, outs, trials: int = 2, seed: int = 0) -> bool:
    """Feed product pure inputs differing only on ``ins``; a changed ``outs`` marginal proves signalling.

    Only a positive answer is conclusive, so callers fall back to the exact test.
    """
    rng = rng_of(seed)
    v = cpm.purification.reshape(cpm.din, -1)
    out_dims = [s.dim for s in cpm.outputs]
    keep = [k for k, s in enumerate(cpm.outputs) if s in outs]
    rest = [k for k in range(len(out_dims) + 1) if k not in keep]
    d_so = _prod(s.dim for s in outs)
    fixed = {s.name: random_pure_state(s.dim, rng) for s in cpm.inputs}
    for _ in range(trials):
        margs = []
        for _ in range(2):
            psi = np.ones(1, dtype=complex)
            for s in cpm.inputs:
                psi = np.kron(psi, random_pure_state(s.dim, rng) if s in ins else fixed[s.name])
            u = (psi @ v).reshape(out_dims + [-1]).transpose(keep + rest).reshape(d_so, -1)
            margs.append(u @ u.conj().T)
        if np.max(np.abs(margs[0] - margs[1])) > PROBE_TOL:
            return True
    return False


def _dense_marginal(cpm: CPM, ins, outs) -> np.ndarray:
    c = cpm.choi.tensor()
    names = [s.name for s in cpm.systems]
    n = len(names)
    order = [s.name for s in ins] + [s.name for s in cpm.inputs if s not in ins] + [s.name for s in outs]
    traced = {s.name for s in cpm.outputs if s not in outs}
    ket = list(range(n))
    bra = [k if names[k] in traced else n + k for k in range(n)]
    out = [names.index(x) for x in order] + [n + names.index(x) for x in order]
    t = np.einsum(c, ket + bra, out)
    d = cpm.din * _prod(s.dim for s in outs)
    return t.reshape(d, d)


def intervention_oracle(cpm: CPM, s_in: Iterable[SystemRef], s_out: Iterable[SystemRef], trials: int = 64,
                        seed=0, tol: float = 1e-7, *, check_tp: bool = True) -> bool:
    """Search for a local CPTP intervention on ``s_in`` that changes the marginal on ``s_out``.

    Alternates random unitaries and random state replacements. ``True`` is
    conclusive; ``False`` only means no witness was found.
    """
    ins, outs = _check_sets(cpm, s_in, s_out)
    if check_tp:
        check_trace_preserving(cpm)
    if not ins or not outs:
        return False
    rng = rng_of(seed)
    reference = marginal(cpm, [s.name for s in outs])
    d_si = _prod(s.dim for s in ins)
    fresh = [SystemLabel(f"{s.name}#pre", s.dim) for s in ins]
    base = reference.choi_matrix
    for t in range(trials):
        if t % 2 == 0:
            nmap = CPM.from_unitary(fresh, ins, random_unitary(d_si, rng))
        else:
            sigma = random_density(d_si, seed=rng)
            w, u = np.linalg.eigh(sigma)
            kraus = [np.sqrt(max(w[k], 0.0)) * np.outer(u[:, k], np.eye(d_si)[j])
                     for k in range(d_si) for j in range(d_si)]
            nmap = CPM.from_kraus(fresh, ins, kraus)
        links = [((1, s.name), (0, s.name)) for s in ins]
        names = {(1, f.name): s.name for f, s in zip(fresh, ins)}
        after = compose([reference, nmap], links, names)
        order = [s.name for s in reference.systems]
        got = permute_systems(after.choi, order).data
        if np.max(np.abs(got - base)) > tol:
            return True
    return False


def _candidate_sets(names: Sequence[str], max_size: int | None) -> list[frozenset[str]]:
    top = len(names) if max_size is None else min(max_size, len(names))
    out = []
    for k in range(1, top + 1):
        out += [frozenset(c) for c in itertools.combinations(sorted(names), k)]
    return out


def signalling_structure(cpm: CPM, max_set_size: int | None = 3, tol: float = DEFAULT_TOL, *,
                         use_monotonicity: bool = False) -> SigGraph:
    """All edges S_I -> S_O with set sizes up to ``max_set_size`` (``None`` for the full powerset)."""
    total = len(cpm.inputs) + len(cpm.outputs)
    if total > MAX_SYSTEMS:
        raise ValueError(f"{total} systems exceeds the cap of {MAX_SYSTEMS}")
    check_trace_preserving(cpm)
    ins = _candidate_sets([s.name for s in cpm.inputs], max_set_size)
    outs = _candidate_sets([s.name for s in cpm.outputs], max_set_size)
    edges = set()
    for a in ins:
        for b in outs:
            # supersets of a signalling pair signal too
            if use_monotonicity and any(a2 <= a and b2 <= b for a2, b2 in edges):
                edges.add((a, b))
                continue
            if signals(cpm, a, b, tol, check_tp=False):
                edges.add((a, b))
    return SigGraph(tuple(s.name for s in cpm.systems), frozenset(edges), max_set_size)


# ---------------------------------------------------------------------------
# Networks


IN_END = "#in"
OUT_END = "#out"


class NetworkSignalling:
    """Signalling queries on a network, cutting composed systems open as needed.

    A composed system used as a source is cut and driven at its input end; used
    as a target it is cut and read at its output end. Induced maps of the cut
    networks are cached per cut set.
    """

    def __init__(self, net: QuantumNetwork, tol: float = DEFAULT_TOL):
        problems = validate(net)
        if problems:
            raise NetworkError("invalid network: " + "; ".join(problems))
        self.net = net
        self.tol = tol
        self.names = system_names(net)
        self.systems = network_systems(net)
        self.by_name = {}
        for c in net.comps:
            self.by_name[self.names[c.src]] = c
        free_in, free_out = free_systems(net)
        self.free_in = {s.name for s in free_in}
        self.free_out = {s.name for s in free_out}
        self.sources = sorted(self.free_in | set(self.by_name))
        self.targets = sorted(self.free_out | set(self.by_name))
        self._cache: dict[frozenset[str], CPM] = {}

    def cut_map(self, cut: frozenset[str]) -> CPM:
        if cut not in self._cache:
            comps = frozenset(c for c in self.net.comps if self.names[c.src] not in cut)
            sub = SubNetwork(frozenset(self.net.maps), comps)
            leg_names = {}
            for name in cut:
                c = self.by_name[name]
                leg_names[c.dst] = name + IN_END
                leg_names[c.src] = name + OUT_END
            self._cache[cut] = induced_map(self.net, sub, names=leg_names)
        return self._cache[cut]

    def signals(self, s1: Iterable[str], s2: Iterable[str]) -> bool:
        s1, s2 = frozenset(s1), frozenset(s2)
        if s1 & s2:
            raise ValueError("source and target sets must be disjoint")
        for s in s1:
            if s not in self.sources:
                raise ValueError(f"{s!r} cannot act as a signalling source (not an input or composed system)")
        for s in s2:
            if s not in self.targets:
                raise ValueError(f"{s!r} cannot act as a signalling target (not an output or composed system)")
        cut = frozenset(s for s in s1 | s2 if s in self.by_name)
        cpm = self.cut_map(cut)
        ins = [s + IN_END if s in cut else s for s in sorted(s1)]
        outs = [s + OUT_END if s in cut else s for s in sorted(s2)]
        return signals(cpm, ins, outs, self.tol)


def network_signalling_structure(net: QuantumNetwork, max_set_size: int | None = 1,
                                 tol: float = DEFAULT_TOL) -> SigGraph:
    """Signalling structure of a network over its systems (composed pairs identified)."""
    if not net.maps:
        return SigGraph((), frozenset(), max_set_size)
    ns = NetworkSignalling(net, tol)
    if len(ns.systems) > MAX_SYSTEMS * 2 and (max_set_size is None or max_set_size > 1):
        raise ValueError("too many systems for sets larger than singletons")
    edges = set()
    for a in _candidate_sets(ns.sources, max_set_size):
        for b in _candidate_sets(ns.targets, max_set_size):
            if a & b:
                continue
            if ns.signals(a, b):
                edges.add((a, b))
    return SigGraph(tuple(ns.systems), frozenset(edges), max_set_size)
