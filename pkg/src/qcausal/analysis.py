"""Instance-level audits: the no-go trichotomy and fine-grained fixed-order explanations."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .embedding import (CompatReport, Embedding, IOReport, Realisation, certify_cycle, io_correspondence,
                        relativistic_causality)
from .finegraining import (FineGrainingWitness, NetworkFineGrainingReport, SystemsFineGraining, identity_witness,
                           verify_network_finegraining)
from .linalg import DEFAULT_TOL, LabeledOperator
from .network import QuantumNetwork, SubNetwork, enumerate_subnetworks, induced_map, network_systems
from .process import (PROCESS_MAP_ID, FixedOrderResult, Party, ProcessError, ProcessMatrix, is_fixed_order,
                      process_to_map)
from .signalling import SigGraph, signalling_structure
from .spacetime import Region, Spacetime, chain, is_acyclic, region_causal_structure
from .switch import FineGrainedSwitchBundle

log = logging.getLogger(__name__)


class ImplementationFalsified(AssertionError):
    """All three no-go conditions held at once; the toolkit, not the theorem, is wrong."""


@dataclass
class TheoremOneVerdict:
    condition1_not_fixed_order: bool
    condition2_relativistic_causality: bool
    condition3_acyclic_image: bool
    cycle_certificate: list[Region] | None = None
    fixed_order: FixedOrderResult | None = None
    causality: CompatReport | None = None

    @property
    def all_hold(self) -> bool:
        return self.condition1_not_fixed_order and self.condition2_relativistic_causality and \
            self.condition3_acyclic_image

    @property
    def consistent(self) -> bool:
        return not self.all_hold

    def summary(self) -> str:
        flags = [("not fixed order", self.condition1_not_fixed_order),
                 ("relativistic causality", self.condition2_relativistic_causality),
                 ("acyclic coarse image", self.condition3_acyclic_image)]
        lines = [f"  {name}: {'yes' if ok else 'no'}" for name, ok in flags]
        if self.cycle_certificate:
            lines.append("  forced cycle: " + " -> ".join(r.label for r in self.cycle_certificate))
        if self.causality is not None:
            lines += [f"  violation: {v}" for v in self.causality.describe()]
        head = "consistent with Theorem 1" if self.consistent else "INCONSISTENT: all three conditions hold"
        return "\n".join([head] + lines)

    def to_dict(self) -> dict:
        return {
            "condition1_not_fixed_order": self.condition1_not_fixed_order,
            "condition2_relativistic_causality": self.condition2_relativistic_causality,
            "condition3_acyclic_image": self.condition3_acyclic_image,
            "cycle_certificate": None if self.cycle_certificate is None
            else [r.label for r in self.cycle_certificate],
            "violations": [] if self.causality is None else self.causality.describe(),
            "consistent": self.consistent,
        }


@dataclass
class TheoremTwoVerdict:
    fine_graining_verified: bool
    fine_process_fixed_order: bool
    party_count_fine: int
    party_count_coarse: int
    order: tuple[str, ...] | None = None
    precondition: str | None = None
    finegraining: NetworkFineGrainingReport | None = None
    io: IOReport | None = None

    @property
    def consistent(self) -> bool:
        return self.precondition is None and self.fine_graining_verified and self.fine_process_fixed_order \
            and self.party_count_fine >= self.party_count_coarse

    def summary(self) -> str:
        if self.precondition:
            return f"precondition failed: {self.precondition}"
        lines = ["consistent with Theorem 2" if self.consistent else "not consistent with Theorem 2"]
        if self.finegraining is not None:
            lines.append("  fine-graining: " + self.finegraining.summary())
        lines.append(f"  fine process fixed order: {'yes' if self.fine_process_fixed_order else 'no'}"
                     + (f" ({' < '.join(self.order)})" if self.order else ""))
        lines.append(f"  parties: M={self.party_count_fine}, N={self.party_count_coarse}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        fg = self.finegraining
        return {
            "fine_graining_verified": self.fine_graining_verified,
            "fine_process_fixed_order": self.fine_process_fixed_order,
            "party_count_fine": self.party_count_fine,
            "party_count_coarse": self.party_count_coarse,
            "order": None if self.order is None else list(self.order),
            "precondition": self.precondition,
            "subnetworks": None if fg is None else len(fg.results),
            "failures": [] if fg is None else [str(r.sub) for r in fg.failures],
            "consistent": self.consistent,
        }


# ---------------------------------------------------------------------------
# Theorem 1


def process_signalling(w: ProcessMatrix, tol: float = DEFAULT_TOL) -> SigGraph:
    return signalling_structure(process_to_map(w, check=False), 1, tol)


def theorem1_audit(r: Realisation, w: ProcessMatrix, *, max_set_size: int | None = 1, tol: float = DEFAULT_TOL,
                   strict: bool = True) -> TheoremOneVerdict:
    """Evaluate the three no-go conditions independently and attach a forced cycle, if any.

    The certificate comes from the process map's singleton signalling edges
    pulled through the coarse embedding.
    """
    missing = [s for p in w.parties for s in (p.input.name, p.output.name) if s not in r.embedding.assign]
    if missing:
        raise ProcessError(f"realisation does not embed the party systems {missing}")
    fo = is_fixed_order(w, tol)
    rc = relativistic_causality(r, max_set_size, tol)
    image = region_causal_structure(r.spacetime, r.embedding.image())
    cert = certify_cycle(process_signalling(w, tol), r.embedding)
    verdict = TheoremOneVerdict(not fo.fixed, rc.ok, is_acyclic(image), cert, fo, rc)
    if verdict.all_hold:
        msg = "all three no-go conditions hold on this instance; the implementation is inconsistent"
        log.error(msg)
        if strict:
            raise ImplementationFalsified(msg)
        warnings.warn(msg, RuntimeWarning)
    return verdict


def trivial_realisation(net: QuantumNetwork, emb: Embedding, st: Spacetime) -> Realisation:
    """The network is its own fine-graining (identity systems map, no partitions)."""
    f = SystemsFineGraining.identity(network_systems(net))
    return Realisation(net, emb, net, f, {}, emb, st)


def chain_embedding(systems: Sequence[str], positions: Mapping[str, int] | None = None
                    ) -> tuple[Embedding, Spacetime]:
    """Pointlike regions on a chain; by default one point per system in the given order."""
    positions = dict(positions) if positions is not None else {s: k for k, s in enumerate(systems)}
    n = max(positions.values()) + 1
    st = chain(n)
    return Embedding({s: Region([positions[s]], s) for s in systems}, st), st


def localized_embedding(w: ProcessMatrix) -> Embedding:
    """One abstract point per party holding both of its systems (no spacetime attached)."""
    assign = {}
    for p in w.parties:
        region = Region([p.name], f"R^{p.name}")
        assign[p.input.name] = region
        assign[p.output.name] = region
    return Embedding(assign)


# ---------------------------------------------------------------------------
# Theorem 2


def extract_process(net: QuantumNetwork, map_id: str = PROCESS_MAP_ID) -> ProcessMatrix:
    """Read the process off a process network: each other map is a party joined to ``map_id`` by one wire each way."""
    if map_id not in net.maps:
        raise ProcessError(f"network has no process map {map_id!r}")
    wmap = net.maps[map_id]
    ins: dict[str, str] = {}
    outs: dict[str, str] = {}
    for c in net.comps:
        if c.src_map == map_id and c.dst_map != map_id:
            if c.dst_map in ins:
                raise ProcessError(f"party {c.dst_map!r} receives more than one wire from {map_id!r}")
            ins[c.dst_map] = c.src_sys
        elif c.dst_map == map_id and c.src_map != map_id:
            if c.src_map in outs:
                raise ProcessError(f"party {c.src_map!r} sends more than one wire to {map_id!r}")
            outs[c.src_map] = c.dst_sys
        else:
            raise ProcessError(f"composition {c} does not touch the process map exactly once")
    names = sorted(set(net.maps) - {map_id})
    parties = []
    for name in names:
        if name not in ins or name not in outs:
            raise ProcessError(f"party {name!r} must have one input and one output wire")
        parties.append(Party(name, wmap.output(ins[name]), wmap.input(outs[name])))
    used = {s for p in parties for s in (p.input.name, p.output.name)}
    free = [s.name for s in wmap.systems if s.name not in used]
    if free:
        raise ProcessError(f"process map has unconnected systems {free}")
    if wmap.is_purified and wmap.purification.shape[1] == 1:
        op = LabeledOperator(wmap.systems, wmap.purification[:, 0])
    else:
        op = wmap.choi
    return ProcessMatrix(parties, op)


def _party_pairs(w: ProcessMatrix) -> list[tuple[str, str]]:
    return [(p.input.name, p.output.name) for p in w.parties]


class IdentityWitnesses(Mapping):
    """Sub-network -> (same sub-network, identity Enc/Dec) for a trivial fine-graining."""

    def __init__(self, net: QuantumNetwork, subs: Sequence[SubNetwork]):
        self.net = net
        self._subs = list(subs)
        self._set = set(self._subs)

    def __getitem__(self, sub):
        if sub not in self._set:
            raise KeyError(sub)
        return sub, identity_witness(induced_map(self.net, sub))

    def __iter__(self):
        return iter(self._subs)

    def __len__(self):
        return len(self._subs)

    def __contains__(self, sub):
        return sub in self._set


def identity_witnesses(net: QuantumNetwork, cap: int = 6) -> IdentityWitnesses:
    return IdentityWitnesses(net, list(enumerate_subnetworks(net, cap)))


def theorem2_audit(subject: FineGrainedSwitchBundle | Realisation,
                   witnesses: Mapping[SubNetwork, tuple[SubNetwork, FineGrainingWitness]] | None = None, *,
                   subs: Sequence[SubNetwork] | None = None, cap: int = 6, tol: float = DEFAULT_TOL,
                   check_causality: bool = True) -> TheoremTwoVerdict:
    """Check the realisation's preconditions, the network fine-graining, and fixed order of the fine process."""
    if isinstance(subject, FineGrainedSwitchBundle):
        r = subject.realisation
        witnesses = subject.witnesses if witnesses is None else witnesses
        subs = subject.subnetworks if subs is None else subs
    else:
        r = subject
    if witnesses is None:
        raise ProcessError("theorem 2 audit needs fine-graining witnesses")
    try:
        coarse_w = extract_process(r.network)
        fine_w = extract_process(r.fine_net)
    except ProcessError as exc:
        return TheoremTwoVerdict(False, False, 0, 0, precondition=f"not a process network: {exc}")
    n, m = len(coarse_w.parties), len(fine_w.parties)
    io = io_correspondence(r.embedding, r.partitions, r.spacetime, _party_pairs(coarse_w))
    if not io.ok:
        return TheoremTwoVerdict(False, False, m, n, precondition="; ".join(io.problems), io=io)
    if check_causality:
        rc = relativistic_causality(r, 1, tol)
        if not rc.ok:
            cause = rc.precondition or "; ".join(rc.describe())
            return TheoremTwoVerdict(False, False, m, n, precondition=f"relativistic causality fails: {cause}",
                                     io=io)
    rep = verify_network_finegraining(r.network, r.fine_net, r.fine_map, witnesses, cap, subs, tol)
    fo = is_fixed_order(fine_w, tol, wmap=r.fine_net.maps[PROCESS_MAP_ID])
    return TheoremTwoVerdict(rep.ok and rep.complete, fo.fixed, m, n, fo.order, None, rep, io)


__all__ = [
    "ImplementationFalsified", "TheoremOneVerdict", "TheoremTwoVerdict", "theorem1_audit", "theorem2_audit",
    "trivial_realisation", "chain_embedding", "localized_embedding", "extract_process", "process_signalling",
    "identity_witnesses", "IdentityWitnesses",
]
