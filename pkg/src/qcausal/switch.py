"""The time-bin fine-graining of the quantum switch.

Each of Alice's and Bob's systems splits into two time bins of dimension d+1:
the qudit plus a vacuum state (last basis index). With control 0 the target
visits A1 then B2; with control 1 it visits B1 then A2. The bins not visited
carry the vacuum. The six parties C, A1, B1, A2, B2, D then act in the fixed
order C < {A1, B1} < {A2, B2} < D.

D's input holds (control, target slot, rest slot). The rest slot collects
whatever the unused second-bin party emitted, which is the vacuum whenever
local operations preserve it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .embedding import Embedding, Realisation
from .finegraining import COARSE_SUFFIX, FineGrainingWitness, SystemsFineGraining
from .linalg import CPM, LabeledOperator, SystemLabel
from .network import Composition, Leg, QuantumNetwork, SubNetwork, _free_leg_names, enumerate_subnetworks
from .process import (PROCESS_MAP_ID, Party, ProcessMatrix, process_network, process_to_map, quantum_switch,
                      switch_locals)
from .sampling import random_unitary, rng_of
from .spacetime import Partition, Region, Spacetime, minkowski_grid

SLOT = {("A", 0): 1, ("A", 1): 2, ("B", 0): 2, ("B", 1): 1}


def vacuum(d: int) -> int:
    return d


def lift_unitary(u: np.ndarray) -> np.ndarray:
    """U (+) 1: acts as U on the qudit and leaves the vacuum alone."""
    d = u.shape[0]
    out = np.zeros((d + 1, d + 1), dtype=complex)
    out[:d, :d] = u
    out[d, d] = 1.0
    return out


def lift_kraus(kraus) -> list[np.ndarray]:
    """Vacuum extension of a CPTP map: K_0 (+) 1, K_k (+) 0 for k > 0.

    The vacuum is invariant, and coherence between vacuum and qudit survives
    through the first Kraus operator only.
    """
    out = []
    for k, op in enumerate(kraus):
        op = np.asarray(op, dtype=complex)
        e_out, e_in = op.shape[0] + 1, op.shape[1] + 1
        big = np.zeros((e_out, e_in), dtype=complex)
        big[:-1, :-1] = op
        if k == 0:
            big[-1, -1] = 1.0
        out.append(big)
    return out


def lift(cpm: CPM, inp: SystemLabel, out: SystemLabel) -> CPM:
    return CPM.from_kraus([inp], [out], lift_kraus(cpm.kraus()))


# ---------------------------------------------------------------------------
# Fine process


def fine_parties(d: int) -> list[Party]:
    e = d + 1
    out = [Party("C", SystemLabel("C^I", 1), SystemLabel("C^O", 2 * d))]
    for name in ("A1", "B1", "A2", "B2"):
        out.append(Party(name, SystemLabel(f"{name}^I", e), SystemLabel(f"{name}^O", e)))
    out.append(Party("D", SystemLabel("D^I", 2 * e * e), SystemLabel("D^O", 1)))
    return out


def fine_switch_process(d: int) -> ProcessMatrix:
    """Pure six-party process of the time-bin switch."""
    if d < 2:
        raise ValueError("the switch needs a target dimension d >= 2")
    e, om = d + 1, vacuum(d)
    # legs: C^I, C^O(c,t), A1^I, A1^O, B1^I, B1^O, A2^I, A2^O, B2^I, B2^O, D^I(c,T,R), D^O
    v = np.zeros((1, 2, d, e, e, e, e, e, e, e, e, 2, e, e, 1), dtype=complex)
    t, a1, b1, a2, b2 = np.meshgrid(np.arange(d), *[np.arange(e)] * 4, indexing="ij")
    # control 0: C -> A1 -> B2 -> D_T; B1 gets vacuum, A2 -> D_R
    v[0, 0, t, t, a1, om, b1, b1, a2, a1, b2, 0, b2, a2, 0] = 1.0
    # control 1: C -> B1 -> A2 -> D_T; A1 gets vacuum, B2 -> D_R
    v[0, 1, t, om, a1, t, b1, b1, a2, a1, b2, 1, a2, b2, 0] = 1.0
    parties = fine_parties(d)
    systems = [s for p in parties for s in (p.input, p.output)]
    return ProcessMatrix(parties, LabeledOperator(systems, v.reshape(-1)))


def extraction_kraus(d: int) -> list[np.ndarray]:
    """(control, T, R) -> (control, target): keep T's qudit, trace R, send a vacuum T to |0>."""
    e, om = d + 1, vacuum(d)
    ops = []
    for r in range(e):
        k = np.zeros((2 * d, 2 * e * e))
        z = np.zeros((2 * d, 2 * e * e))
        for c in range(2):
            for t in range(d):
                k[c * d + t, (c * e + t) * e + r] = 1.0
            z[c * d, (c * e + om) * e + r] = 1.0
        ops += [k, z]
    return ops


def fine_locals(d: int, u1, u2, v1, v2, prep_port: str = "P", out_port: str = "F") -> dict[str, CPM]:
    """Lifted unitaries for the four bins; C forwards P, D extracts and forwards to F."""
    ps = {p.name: p for p in fine_parties(d)}
    coarse = switch_locals(d, np.eye(d), np.eye(d), prep_port, out_port)
    ops = {"C": coarse["C"]}
    for name, u in (("A1", u1), ("A2", u2), ("B1", v1), ("B2", v2)):
        ops[name] = CPM.from_unitary([ps[name].input], [ps[name].output], lift_unitary(np.asarray(u)))
    ops["D"] = CPM.from_kraus([ps["D"].input], [ps["D"].output, SystemLabel(out_port, 2 * d)],
                              extraction_kraus(d))
    return ops


# ---------------------------------------------------------------------------
# Witnesses


def systems_map(d: int) -> SystemsFineGraining:
    assign = {s: {s} for s in ("C^I", "C^O", "D^I", "D^O", "P", "F")}
    for x in ("A", "B"):
        for io in ("I", "O"):
            assign[f"{x}^{io}"] = {f"{x}1^{io}", f"{x}2^{io}"}
    return SystemsFineGraining(assign)


def _fine_map_ids(mid: str) -> list[str]:
    return [f"{mid}1", f"{mid}2"] if mid in ("A", "B") else [mid]


def fine_sub(sub: SubNetwork) -> SubNetwork:
    """Fine counterpart: A and B become both bins, their compositions both bin compositions."""
    maps = {f for m in sub.maps for f in _fine_map_ids(m)}
    comps = set()
    for c in sub.comps:
        party = c.dst_map if c.src_map == PROCESS_MAP_ID else c.src_map
        if party in ("A", "B"):
            for k in (1, 2):
                fp = f"{party}{k}"
                sys_name = c.src_sys.replace(party, fp, 1)
                src_map = PROCESS_MAP_ID if c.src_map == PROCESS_MAP_ID else fp
                dst_map = PROCESS_MAP_ID if c.dst_map == PROCESS_MAP_ID else fp
                comps.add(Composition(src_map, sys_name, dst_map, sys_name))
        else:
            comps.add(c)
    return SubNetwork(frozenset(maps), frozenset(comps))


def _routed(leg: Leg, c: int) -> tuple[Leg, str] | None:
    """Fine leg that carries coarse ``leg`` under control ``c`` and its routed party."""
    mid, sys_name = leg
    party = sys_name[0]
    if len(sys_name) < 2 or party not in ("A", "B") or sys_name[1] != "^":
        return None
    slot = SLOT[(party, c)]
    fine_sys = f"{party}{slot}{sys_name[1:]}"
    fine_mid = mid if mid == PROCESS_MAP_ID else f"{party}{slot}"
    return (fine_mid, fine_sys), party


def _embedding_matrix(d: int, coarse: list[tuple[Leg, int]], fine: list[tuple[Leg, int]],
                      control: Leg | None, fixed_c: int = 0) -> np.ndarray:
    """Isometry sending coarse basis states to fine ones by the routing rule."""
    e, om = d + 1, vacuum(d)
    fine_index = {leg: k for k, (leg, _) in enumerate(fine)}
    fine_dims = [dim for _, dim in fine]
    coarse_dims = [dim for _, dim in coarse]
    mat = np.zeros((int(np.prod(fine_dims)), int(np.prod(coarse_dims))))
    ctrl_pos = next((k for k, (leg, _) in enumerate(coarse) if leg == control), None)
    for col, values in enumerate(itertools.product(*[range(n) for n in coarse_dims])):
        c = values[ctrl_pos] // d if ctrl_pos is not None else fixed_c
        out = [None] * len(fine)
        for (leg, dim), x in zip(coarse, values):
            routed = _routed(leg, c)
            if routed is not None:
                out[fine_index[routed[0]]] = x
            elif leg[1] == "D^I":
                cc, t = divmod(x, d)
                out[fine_index[leg]] = (cc * e + t) * e + om
            else:
                out[fine_index[leg]] = x
        for k, (leg, dim) in enumerate(fine):
            if out[k] is None:
                if dim != e:
                    raise ValueError(f"fine leg {leg} left unassigned")
                out[k] = om
        row = int(np.ravel_multi_index(out, fine_dims)) if fine_dims else 0
        mat[row, col] = 1.0
    return mat


def switch_witness(coarse_net: QuantumNetwork, fine_net: QuantumNetwork, sub: SubNetwork, d: int
                   ) -> tuple[SubNetwork, FineGrainingWitness]:
    """Enc routes coarse inputs into time bins by the control; Dec reads the bins back out.

    Dec is a partial isometry and is trace preserving on the image of the fine
    map composed with Enc, which is all the definition asks for.
    """
    sub_f = fine_sub(sub)
    cn = _free_leg_names(coarse_net, sub)
    fn = _free_leg_names(fine_net, sub_f)
    roles_c = {leg: (role, s.dim) for leg, s, role in coarse_net.legs()}
    roles_f = {leg: (role, s.dim) for leg, s, role in fine_net.legs()}

    def legs(names, roles, role):
        return sorted((leg, roles[leg][1]) for leg in names if roles[leg][0] == role)

    c_in, c_out = legs(cn, roles_c, "in"), legs(cn, roles_c, "out")
    f_in, f_out = legs(fn, roles_f, "in"), legs(fn, roles_f, "out")
    has_w = PROCESS_MAP_ID in sub.maps
    names_c = {leg for leg, _ in c_in + c_out}

    def pick(options):
        return next((leg for leg in options if leg in names_c), None)

    enc_ctrl = pick([(PROCESS_MAP_ID, "C^O"), ("C", "P")]) if has_w else None
    dec_ctrl = pick([(PROCESS_MAP_ID, "D^I"), ("D", "F")]) if has_w else None
    enc_mat = _embedding_matrix(d, c_in, f_in, enc_ctrl)
    dec_mat = _embedding_matrix(d, c_out, f_out, dec_ctrl)

    fine_in_names = {fn[leg] for leg, _ in f_in}
    fine_out_names = {fn[leg] for leg, _ in f_out}

    def port(name, clash):
        return name + COARSE_SUFFIX if name in clash else name

    enc = CPM.from_kraus([SystemLabel(port(cn[leg], fine_in_names), dim) for leg, dim in c_in],
                         [SystemLabel(fn[leg], dim) for leg, dim in f_in], [enc_mat])
    dec = CPM.from_kraus([SystemLabel(fn[leg], dim) for leg, dim in f_out],
                         [SystemLabel(port(cn[leg], fine_out_names), dim) for leg, dim in c_out],
                         [dec_mat.T])
    return sub_f, FineGrainingWitness(enc, dec)


class SwitchWitnesses(Mapping):
    """Lazy mapping coarse sub-network -> (fine sub-network, witness)."""

    def __init__(self, coarse_net, fine_net, d, subs):
        self._args = (coarse_net, fine_net, d)
        self._subs = list(subs)
        self._set = set(self._subs)

    def __getitem__(self, sub):
        if sub not in self._set:
            raise KeyError(sub)
        return switch_witness(self._args[0], self._args[1], sub, self._args[2])

    def __iter__(self):
        return iter(self._subs)

    def __len__(self):
        return len(self._subs)

    def __contains__(self, sub):
        return sub in self._set


# ---------------------------------------------------------------------------
# Spacetime realisation on a 1+1 grid

# (x, t) points; Alice at x=0, Bob at x=2, C and D at x=1
SWITCH_POINTS = {
    "P": (1, -1), "C^I": (1, -1), "C^O": (1, 0),
    "A1^I": (0, 1), "A1^O": (0, 2), "A2^I": (0, 4), "A2^O": (0, 5),
    "B1^I": (2, 1), "B1^O": (2, 2), "B2^I": (2, 4), "B2^O": (2, 5),
    "D^I": (1, 6), "D^O": (1, 7), "F": (1, 7),
}


def switch_spacetime() -> Spacetime:
    return minkowski_grid(range(0, 3), range(-1, 8))


def switch_realisation(coarse_net: QuantumNetwork, fine_net: QuantumNetwork, d: int,
                       points: Mapping[str, tuple[int, int]] | None = None, per_party: bool = False
                       ) -> Realisation:
    """Fine systems at single grid points; coarse systems at the union of their images.

    With ``per_party`` both systems of a coarse party (and C's preparation port,
    D's output port) share one region, split into the fine points.
    """
    pts = dict(SWITCH_POINTS)
    pts.update(points or {})
    st = switch_spacetime()
    f = systems_map(d)
    fine = {x: Region([pts[x]], x) for fines in f.assign.values() for x in fines}
    groups: dict[str, list[str]] = {}
    for s in f.assign:
        key = (s[0] if s not in ("P", "F") else {"P": "C", "F": "D"}[s]) if per_party else s
        groups.setdefault(key, []).append(s)
    coarse, parts = {}, {}
    for key, members in groups.items():
        fines = sorted({x for s in members for x in f.assign[s]})
        region = Region([pts[x] for x in fines], key)
        for s in members:
            coarse[s] = region
        pieces = sorted({fine[x] for x in fines}, key=Region.sort_key)
        if len(pieces) > 1:
            parts[region] = Partition(region, pieces)
    return Realisation(coarse_net, Embedding(coarse, st), fine_net, f, parts, Embedding(fine, st), st)


# ---------------------------------------------------------------------------
# Bundle


@dataclass
class FineGrainedSwitchBundle:
    d: int
    u: np.ndarray
    v: np.ndarray
    process: ProcessMatrix
    coarse_process: ProcessMatrix
    coarse_net: QuantumNetwork
    fine_net: QuantumNetwork
    f: SystemsFineGraining
    witnesses: SwitchWitnesses
    realisation: Realisation
    subnetworks: list[SubNetwork] = field(default_factory=list)

    @property
    def party_count_fine(self) -> int:
        return len(self.process.parties)

    @property
    def party_count_coarse(self) -> int:
        return len(self.coarse_process.parties)


def fine_grained_switch(d: int, u=None, v=None, seed=0, cap: int = 6) -> FineGrainedSwitchBundle:
    """Coarse and fine switch networks with local unitaries U, V (random from ``seed`` if omitted)."""
    if d < 2:
        raise ValueError("the switch needs a target dimension d >= 2")
    rng = rng_of(seed)
    u = random_unitary(d, rng) if u is None else np.asarray(u, dtype=complex)
    v = random_unitary(d, rng) if v is None else np.asarray(v, dtype=complex)
    coarse_w = quantum_switch(d)
    fine_w = fine_switch_process(d)
    coarse_net = process_network(coarse_w, switch_locals(d, u, v))
    fine_net = process_network(fine_w, fine_locals(d, u, u, v, v), wmap=process_to_map(fine_w, check=False))
    subs = list(enumerate_subnetworks(coarse_net, cap))
    witnesses = SwitchWitnesses(coarse_net, fine_net, d, subs)
    real = switch_realisation(coarse_net, fine_net, d)
    return FineGrainedSwitchBundle(d, u, v, fine_w, coarse_w, coarse_net, fine_net, systems_map(d), witnesses,
                                   real, subs)
