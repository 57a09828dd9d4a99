"""Checking that a CPM or network fine-grains another one.

A witness is a pair (Enc, Dec) with ``M = Dec o M^f o Enc``. Inside witness maps,
fine-side systems carry the fine names and coarse-side systems the coarse
names. When the same name occurs on both sides of one witness map, the
coarse-side copy is written ``name~c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .linalg import (CPM, DEFAULT_TOL, LabeledOperator, LabelError, SystemLabel, compose, permute_systems,
                     trace_out_outputs)
from .network import QuantumNetwork, SubNetwork, _free_leg_names, components, enumerate_subnetworks, induced_map, system_names
from .signalling import NotTracePreservingError, check_trace_preserving, signalling_structure, signals, node_label

COARSE_SUFFIX = "~c"


class FineGrainingError(ValueError):
    """Inconsistent wiring between coarse map, fine map, systems map and witness."""


@dataclass(frozen=True)
class SystemsFineGraining:
    """Coarse system name -> nonempty set of fine system names, with disjoint images."""

    assign: Mapping[str, frozenset[str]]

    def __post_init__(self):
        clean = {}
        owner: dict[str, str] = {}
        for k, v in sorted(self.assign.items()):
            v = frozenset([v]) if isinstance(v, str) else frozenset(v)
            if not v:
                raise FineGrainingError(f"coarse system {k!r} maps to an empty set")
            for f in v:
                if f in owner:
                    raise FineGrainingError(f"fine system {f!r} is the image of both {owner[f]!r} and {k!r}")
                owner[f] = k
            clean[k] = v
        object.__setattr__(self, "assign", clean)

    def image(self, systems: Iterable[str]) -> frozenset[str]:
        out: set[str] = set()
        for s in systems:
            if s not in self.assign:
                raise FineGrainingError(f"coarse system {s!r} has no image under the systems map")
            out |= self.assign[s]
        return frozenset(out)

    @classmethod
    def identity(cls, names: Iterable[str]) -> "SystemsFineGraining":
        return cls({n: frozenset([n]) for n in names})


@dataclass(frozen=True)
class FineGrainingWitness:
    enc: CPM
    dec: CPM


@dataclass
class FineGrainingReport:
    ok: bool
    condition_i: bool
    condition_ii: bool
    choi_error: float
    enc_tp: bool
    dec_tp_on_image: bool
    missing_edges: list[tuple[frozenset, frozenset]] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)

    def describe(self) -> list[str]:
        out = list(self.problems)
        out += [f"lost signalling {node_label(a)} -> {node_label(b)}" for a, b in self.missing_edges]
        return out


def _port(cpm: CPM, name: str, side: str) -> SystemLabel:
    pool = cpm.inputs if side == "in" else cpm.outputs
    for cand in (name + COARSE_SUFFIX, name):
        for s in pool:
            if s.name == cand:
                return s
    raise FineGrainingError(f"witness map lacks a port for {name!r}")


def _witness_links(m: CPM, mf: CPM, w: FineGrainingWitness):
    """Check names/dims and return (enc input ports, dec output ports)."""
    enc_in = [_port(w.enc, s.name, "in") for s in m.inputs]
    dec_out = [_port(w.dec, s.name, "out") for s in m.outputs]
    for coarse, port in zip(m.inputs, enc_in):
        if coarse.dim != port.dim:
            raise FineGrainingError(f"Enc port {port.name} has dim {port.dim}, coarse {coarse.name} has {coarse.dim}")
    for coarse, port in zip(m.outputs, dec_out):
        if coarse.dim != port.dim:
            raise FineGrainingError(f"Dec port {port.name} has dim {port.dim}, coarse {coarse.name} has {coarse.dim}")
    if {s.name for s in w.enc.outputs} != {s.name for s in mf.inputs}:
        raise FineGrainingError(f"Enc outputs {sorted(s.name for s in w.enc.outputs)} differ from fine inputs "
                                f"{sorted(s.name for s in mf.inputs)}")
    if {s.name for s in w.dec.inputs} != {s.name for s in mf.outputs}:
        raise FineGrainingError(f"Dec inputs {sorted(s.name for s in w.dec.inputs)} differ from fine outputs "
                                f"{sorted(s.name for s in mf.outputs)}")
    return enc_in, dec_out


def _after_enc(mf: CPM, w: FineGrainingWitness, m: CPM) -> CPM:
    """M^f o Enc with the coarse inputs under their coarse names."""
    enc_in, _ = _witness_links(m, mf, w)
    links = [((1, s.name), (0, s.name)) for s in mf.inputs]
    names = {(1, p.name): c.name for p, c in zip(enc_in, m.inputs)}
    return compose([mf, w.enc], links, names)


def _apply_dec(image_map: CPM, w: FineGrainingWitness, m: CPM) -> CPM:
    dec_out = [_port(w.dec, s.name, "out") for s in m.outputs]
    links = [((1, s.name), (0, s.name)) for s in w.dec.inputs]
    names = {(0, p.name): c.name for p, c in zip(dec_out, m.outputs)}
    return compose([w.dec, image_map], links, names)


def reconstruct(mf: CPM, w: FineGrainingWitness, m: CPM) -> CPM:
    """Dec o M^f o Enc with systems named like ``m``."""
    return _apply_dec(_after_enc(mf, w, m), w, m)


def verify_cpm_finegraining(m: CPM, mf: CPM, f: SystemsFineGraining, w: FineGrainingWitness,
                            tol: float = DEFAULT_TOL, max_set_size: int | None = 1) -> FineGrainingReport:
    """Check M = Dec o M^f o Enc and that every signalling edge I -> O of M survives as F(I) -> F(O) in M^f."""
    problems = []
    for s in m.inputs:
        img = f.image([s.name])
        for x in img:
            mf.input(x)
    for s in m.outputs:
        for x in f.image([s.name]):
            mf.output(x)

    enc_dev = float(np.max(np.abs(trace_out_outputs(w.enc) - np.eye(w.enc.din)), initial=0.0))
    enc_tp = enc_dev <= max(tol, 1e-9)
    if not enc_tp:
        problems.append(f"Enc is not trace preserving (deviation {enc_dev:.3g})")

    image_map = _after_enc(mf, w, m)
    rebuilt = _apply_dec(image_map, w, m)
    order = [s.name for s in m.inputs]
    # both marginals carry the coarse inputs; bring them to the same order
    lhs = _reorder_inputs(rebuilt, order, trace_out_outputs(rebuilt))
    rhs = _reorder_inputs(image_map, order, trace_out_outputs(image_map))
    dec_dev = float(np.max(np.abs(lhs - rhs), initial=0.0))
    dec_tp = dec_dev <= max(tol, 1e-9)
    if not dec_tp:
        problems.append(f"Dec is not trace preserving on the image of M^f o Enc (deviation {dec_dev:.3g})")

    target = permute_systems(rebuilt.choi, [s.name for s in m.systems]).data
    err = float(np.max(np.abs(target - m.choi_matrix), initial=0.0))
    cond_i = err <= tol
    if not cond_i:
        problems.append(f"Dec o M^f o Enc differs from M by {err:.3g} in max-norm")

    missing = []
    try:
        check_trace_preserving(mf)
        sig = signalling_structure(m, max_set_size, tol)
        for a, b in sig.sorted_edges():
            if not signals(mf, f.image(a), f.image(b), tol, check_tp=False):
                missing.append((a, b))
        cond_ii = not missing
    except NotTracePreservingError as exc:
        problems.append(f"signalling preservation undecidable: {exc}")
        cond_ii = False
    ok = cond_i and cond_ii and enc_tp and dec_tp
    return FineGrainingReport(ok, cond_i, cond_ii, err, enc_tp, dec_tp, missing, problems)


def _reorder_inputs(cpm: CPM, order: Sequence[str], marg: np.ndarray) -> np.ndarray:
    op = LabeledOperator(cpm.inputs, marg)
    return permute_systems(op, order).data


# ---------------------------------------------------------------------------
# Networks


@dataclass
class SubNetworkResult:
    sub: SubNetwork
    sub_f: SubNetwork | None
    report: FineGrainingReport | None
    status: str  # "pass", "fail" or "missing"
    parts: tuple[SubNetwork, ...] = ()  # set when decided through connected components


@dataclass
class NetworkFineGrainingReport:
    ok: bool
    complete: bool
    results: list[SubNetworkResult]

    @property
    def failures(self) -> list[SubNetworkResult]:
        return [r for r in self.results if r.status == "fail"]

    @property
    def missing(self) -> list[SubNetworkResult]:
        return [r for r in self.results if r.status == "missing"]

    def summary(self) -> str:
        n_pass = sum(r.status == "pass" for r in self.results)
        label = "verified" if self.complete else "verified up to the supplied family"
        return f"{n_pass}/{len(self.results)} sub-networks pass ({label})"


def free_port_names(net: QuantumNetwork, sub: SubNetwork) -> dict[str, tuple[str, str]]:
    """Induced-map system name -> (role, network-level system name) for a sub-network."""
    names = _free_leg_names(net, sub)
    full = system_names(net)
    roles = {leg: role for leg, _, role in net.legs()}
    return {n: (roles[leg], full[leg]) for leg, n in names.items()}


def restrict(f: SystemsFineGraining, net: QuantumNetwork, sub: SubNetwork, net_f: QuantumNetwork,
             sub_f: SubNetwork) -> SystemsFineGraining:
    """Systems map between the induced maps of ``sub`` and ``sub_f``, matched by role and network system."""
    coarse = free_port_names(net, sub)
    fine = free_port_names(net_f, sub_f)
    by_sys: dict[tuple[str, str], list[str]] = {}
    for name, key in fine.items():
        by_sys.setdefault(key, []).append(name)
    out = {}
    for name, (role, system) in coarse.items():
        if system not in f.assign:
            raise FineGrainingError(f"network system {system!r} has no image under the systems map")
        img = [n for fs in sorted(f.assign[system]) for n in by_sys.get((role, fs), [])]
        if not img:
            raise FineGrainingError(f"no free {role}put of the fine sub-network corresponds to {name!r}")
        out[name] = frozenset(img)
    return SystemsFineGraining(out)


def verify_network_finegraining(n: QuantumNetwork, nf: QuantumNetwork, f: SystemsFineGraining,
                                witnesses: Mapping[SubNetwork, tuple[SubNetwork, FineGrainingWitness]],
                                cap: int = 6, subs: Sequence[SubNetwork] | None = None,
                                tol: float = DEFAULT_TOL, max_set_size: int | None = 1,
                                split_products: bool = True) -> NetworkFineGrainingReport:
    """Run the CPM check on every sub-network (enumerated up to ``cap`` maps, or the explicit ``subs``).

    With ``split_products`` a disconnected sub-network is decided by its connected
    components (links over dimension-1 systems do not connect): product
    witnesses reproduce a product map, and a product of trace-preserving maps
    signals between two sets exactly when one factor does.
    """
    family = list(subs) if subs is not None else list(enumerate_subnetworks(n, cap))
    cache: dict[SubNetwork, SubNetworkResult] = {}

    def direct(sub):
        if sub not in witnesses:
            return SubNetworkResult(sub, None, None, "missing")
        sub_f, w = witnesses[sub]
        try:
            m = induced_map(n, sub)
            mf = induced_map(nf, sub_f)
            rf = restrict(f, n, sub, nf, sub_f)
            rep = verify_cpm_finegraining(m, mf, rf, w, tol, max_set_size)
        except (FineGrainingError, LabelError, ValueError) as exc:
            rep = FineGrainingReport(False, False, False, float("inf"), False, False, [], [str(exc)])
        return SubNetworkResult(sub, sub_f, rep, "pass" if rep.ok else "fail")

    def result(sub):
        if sub in cache:
            return cache[sub]
        parts = components(sub, n) if split_products else [sub]
        if len(parts) == 1:
            res = direct(sub)
        else:
            states = [result(p).status for p in parts]
            status = "fail" if "fail" in states else "missing" if "missing" in states else "pass"
            res = SubNetworkResult(sub, None, None, status, tuple(parts))
        cache[sub] = res
        return res

    results = [result(sub) for sub in family]
    complete = all(r.status != "missing" for r in results)
    ok = all(r.status == "pass" for r in results)
    return NetworkFineGrainingReport(ok, complete, results)


def identity_witness(m: CPM) -> FineGrainingWitness:
    """Enc = Dec = identity wires for checking a map against itself."""
    enc = _identity_block([SystemLabel(s.name + COARSE_SUFFIX, s.dim) for s in m.inputs], list(m.inputs))
    dec = _identity_block(list(m.outputs), [SystemLabel(s.name + COARSE_SUFFIX, s.dim) for s in m.outputs])
    return FineGrainingWitness(enc, dec)


def _identity_block(ins: list[SystemLabel], outs: list[SystemLabel]) -> CPM:
    d = int(np.prod([s.dim for s in ins])) if ins else 1
    return CPM.from_unitary(ins, outs, np.eye(d))
