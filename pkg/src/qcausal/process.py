"""Process matrices, their process maps and process networks; the quantum switch."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .linalg import (CPM, DEFAULT_TOL, DimensionError, LabeledOperator, LabelError, SystemLabel, apply, compose,
                     is_cptp, permute_systems, trace_out_outputs)
from .network import Composition, QuantumNetwork, induced_map
from .sampling import random_channel, random_instrument, rng_of
from .signalling import signals

PROCESS_MAP_ID = "W"
MAX_FIXED_ORDER_PARTIES = 8


class ProcessError(ValueError):
    """Invalid process matrix or mismatched local operations."""


@dataclass(frozen=True)
class Party:
    name: str
    input: SystemLabel
    output: SystemLabel


@dataclass(frozen=True)
class ProcessMatrix:
    """Operator (or pure vector) over every party's input and output system."""

    parties: tuple[Party, ...]
    w: LabeledOperator

    def __init__(self, parties: Sequence[Party], w: LabeledOperator):
        parties = tuple(parties)
        names = [p.name for p in parties]
        if len(set(names)) != len(names):
            raise ProcessError("party names must be distinct")
        systems = [s for p in parties for s in (p.input, p.output)]
        if len({s.name for s in systems}) != len(systems):
            raise ProcessError("party systems must carry distinct labels")
        if {s.name for s in w.systems} != {s.name for s in systems}:
            raise ProcessError(f"W is over {sorted(w.names)}, parties use {sorted(s.name for s in systems)}")
        for s in systems:
            if w.system(s.name).dim != s.dim:
                raise DimensionError(f"dimension of {s.name} differs between W and its party")
        object.__setattr__(self, "parties", parties)
        object.__setattr__(self, "w", w)

    def party(self, name: str) -> Party:
        for p in self.parties:
            if p.name == name:
                return p
        raise ProcessError(f"no party {name!r}")

    @property
    def is_pure(self) -> bool:
        return self.w.is_vector

    @property
    def trace(self) -> float:
        return self.w.trace().real

    @property
    def expected_trace(self) -> int:
        return int(np.prod([p.output.dim for p in self.parties]))

    @property
    def map_inputs(self) -> list[SystemLabel]:
        return [p.output for p in self.parties]

    @property
    def map_outputs(self) -> list[SystemLabel]:
        return [p.input for p in self.parties]


@dataclass(frozen=True)
class Instrument:
    setting: str
    branches: Mapping[object, CPM]

    def total(self) -> CPM:
        """Sum of the branch maps."""
        branches = list(self.branches.values())
        first = branches[0]
        for b in branches:
            if b.systems != first.systems:
                raise ProcessError("instrument branches must act on identical systems")
        if all(b.has_purification() for b in branches):
            v = np.concatenate([b.purification for b in branches], axis=1)
            return CPM(first.inputs, first.outputs, purification=v)
        return CPM(first.inputs, first.outputs, sum(b.choi_matrix for b in branches))

    def validate(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(is_cptp(self.total(), tol))


def process_to_map(w: ProcessMatrix, check: bool = True, tol: float = 1e-8) -> CPM:
    """The process map: party outputs are its inputs, party inputs its outputs, Choi = W."""
    ins, outs = w.map_inputs, w.map_outputs
    order = [s.name for s in ins + outs]
    data = permute_systems(w.w, order).data
    cpm = CPM(ins, outs, purification=data) if w.is_pure else CPM(ins, outs, data)
    if check:
        dev = float(np.max(np.abs(trace_out_outputs(cpm) - np.eye(cpm.din)), initial=0.0))
        if dev > tol:
            raise ProcessError(f"process map is not trace preserving (deviation {dev:.3g})")
        if not w.is_pure:
            ev = np.linalg.eigvalsh((w.w.data + w.w.data.conj().T) / 2)
            if ev[0] < -tol:
                raise ProcessError(f"W is not positive (min eigenvalue {ev[0]:.3g})")
    return cpm


def process_network(w: ProcessMatrix, local_ops: Mapping[str, CPM], map_id: str = PROCESS_MAP_ID,
                    wmap: CPM | None = None) -> QuantumNetwork:
    """Process map wired to each party's local operation through loop compositions.

    Local operations are keyed by party name, must have the party's input among
    their inputs and its output among their outputs, and may carry extra free
    wires.
    """
    wmap = process_to_map(w, check=False) if wmap is None else wmap
    maps = {map_id: wmap}
    comps = []
    for p in w.parties:
        if p.name not in local_ops:
            raise ProcessError(f"no local operation for party {p.name!r}")
        op = local_ops[p.name]
        try:
            i, o = op.input(p.input.name), op.output(p.output.name)
        except LabelError as exc:
            raise ProcessError(f"local operation of {p.name!r}: {exc}") from None
        if i.dim != p.input.dim or o.dim != p.output.dim:
            raise DimensionError(f"local operation of {p.name!r} has mismatched dimensions")
        if p.name == map_id:
            raise ProcessError(f"party name {p.name!r} clashes with the process map id")
        maps[p.name] = op
        comps.append(Composition(map_id, p.input.name, p.name, p.input.name))
        comps.append(Composition(p.name, p.output.name, map_id, p.output.name))
    extra = set(local_ops) - {p.name for p in w.parties}
    if extra:
        raise ProcessError(f"local operations for unknown parties {sorted(extra)}")
    return QuantumNetwork(maps, comps)


def network_value(w: ProcessMatrix, ops: Mapping[str, CPM], wmap: CPM | None = None) -> complex:
    """Scalar of the closed network W + local maps without extra wires."""
    net = process_network(w, ops, wmap=wmap)
    m = induced_map(net)
    if m.inputs or m.outputs:
        raise ProcessError("local operations have free wires; the network is not closed")
    return complex(m.choi_matrix[0, 0])


def probability(w: ProcessMatrix, instruments: Mapping[str, Instrument], outcomes: Mapping[str, object],
                wmap: CPM | None = None) -> float:
    """P(x | a) by contracting W with the chosen branch of every instrument."""
    ops = {}
    for p in w.parties:
        if p.name not in instruments:
            raise ProcessError(f"no instrument for party {p.name!r}")
        inst = instruments[p.name]
        if outcomes[p.name] not in inst.branches:
            raise ProcessError(f"outcome {outcomes[p.name]!r} not in the instrument of {p.name!r}")
        ops[p.name] = inst.branches[outcomes[p.name]]
    return network_value(w, ops, wmap).real


def pairing_oracle(w: ProcessMatrix, ops: Mapping[str, CPM]) -> complex:
    """Tr(W (x)_i M_i^T) evaluated densely; agrees with the network contraction."""
    systems = [s for p in w.parties for s in (p.input, p.output)]
    m = None
    for p in w.parties:
        op = ops[p.name]
        c = permute_systems(op.choi, [p.input.name, p.output.name])
        m = c if m is None else LabeledOperator(m.systems + c.systems, np.kron(m.data, c.data))
    wd = permute_systems(w.w.as_operator(), [s.name for s in systems]).data
    return complex(np.sum(wd * m.data))


@dataclass
class ProcessReport:
    ok: bool
    positive: bool
    min_eigenvalue: float
    trace: float
    trace_ok: bool
    normalization_ok: bool
    max_normalization_error: float
    samples: int
    problems: list[str] = field(default_factory=list)


def validate_process(w: ProcessMatrix, samples: int = 100, seed=0, tol: float = DEFAULT_TOL) -> ProcessReport:
    """Positivity, trace and normalisation under random product instruments (a necessary-condition battery)."""
    problems = []
    if w.is_pure:
        min_ev = 0.0
    else:
        data = w.w.data
        herm = float(np.max(np.abs(data - data.conj().T), initial=0.0))
        min_ev = float(np.linalg.eigvalsh((data + data.conj().T) / 2)[0])
        if herm > tol:
            problems.append(f"W is not Hermitian (deviation {herm:.3g})")
            min_ev = min(min_ev, -herm)
    positive = min_ev >= -tol
    if not positive:
        problems.append(f"W is not positive (min eigenvalue {min_ev:.3g})")
    trace = w.trace
    trace_ok = abs(trace - w.expected_trace) <= tol * max(1, w.expected_trace)
    if not trace_ok:
        problems.append(f"Tr W = {trace:.12g}, expected {w.expected_trace}")
    rng = rng_of(seed)
    wmap = process_to_map(w, check=False)
    worst = 0.0
    for k in range(samples):
        instruments = {}
        for p in w.parties:
            n_out = 1 + k % 3
            instruments[p.name] = Instrument("random", random_instrument([p.input], [p.output], n_out, seed=rng))
        total = 0.0
        # probabilities over all outcome tuples, exercising each branch
        keys = [list(instruments[p.name].branches) for p in w.parties]
        if np.prod([len(x) for x in keys]) <= 27:
            for combo in itertools.product(*keys):
                total += probability(w, instruments, dict(zip([p.name for p in w.parties], combo)), wmap)
        else:
            ops = {p.name: instruments[p.name].total() for p in w.parties}
            total = network_value(w, ops, wmap).real
        worst = max(worst, abs(total - 1.0))
    norm_ok = worst <= max(tol, 1e-9) * 10
    if not norm_ok:
        problems.append(f"probabilities do not sum to one (worst error {worst:.3g})")
    ok = positive and trace_ok and norm_ok
    return ProcessReport(ok, positive, min_ev, trace, trace_ok, norm_ok, worst, samples, problems)


# ---------------------------------------------------------------------------
# Fixed order


@dataclass(frozen=True)
class FixedOrderResult:
    fixed: bool
    order: tuple[str, ...] | None


def is_fixed_order(w: ProcessMatrix, tol: float = DEFAULT_TOL, wmap: CPM | None = None) -> FixedOrderResult:
    """Search total orders (lexicographically first) with no signalling from later outputs to earlier inputs.

    For an order p_1, ..., p_N the check is: for every k, the outputs of
    p_k..p_N do not signal to the inputs of p_1..p_k.
    """
    n = len(w.parties)
    if n > MAX_FIXED_ORDER_PARTIES:
        raise ProcessError(f"{n} parties exceeds the brute-force limit of {MAX_FIXED_ORDER_PARTIES}")
    wmap = process_to_map(w) if wmap is None else wmap
    parties = sorted(w.parties, key=lambda p: p.name)
    memo: dict[tuple[frozenset, str], bool] = {}

    def allowed(placed: frozenset, p: Party) -> bool:
        key = (placed, p.name)
        if key not in memo:
            later = [q.output.name for q in parties if q.name not in placed]
            earlier = [q.input.name for q in parties if q.name in placed or q.name == p.name]
            memo[key] = not signals(wmap, later, earlier, tol, check_tp=False)
        return memo[key]

    def search(placed: frozenset, order: list[str]):
        if len(order) == n:
            return tuple(order)
        for p in parties:
            if p.name in placed:
                continue
            if allowed(placed, p):
                found = search(placed | {p.name}, order + [p.name])
                if found:
                    return found
        return None

    order = search(frozenset(), [])
    return FixedOrderResult(order is not None, order)


def one_way_process(d_a: int, d_b: int, channel: CPM | None = None, seed=0, names=("A", "B")) -> ProcessMatrix:
    """Bipartite process where A's output reaches B's input through ``channel``; A receives a fixed state."""
    a, b = names
    ai, ao = SystemLabel(f"{a}^I", d_a), SystemLabel(f"{a}^O", d_a)
    bi, bo = SystemLabel(f"{b}^I", d_b), SystemLabel(f"{b}^O", d_b)
    rng = rng_of(seed)
    if channel is None:
        channel = random_channel([ao], [bi], n_kraus=2, seed=rng)
    rho = random_channel([], [ai], n_kraus=2, seed=rng)  # random state on A^I
    # W = rho^{A^I} (x) C_channel^{A^O B^I} (x) I^{B^O}
    trace_b = CPM.from_kraus([bo], [], [np.eye(d_b)[k:k + 1] for k in range(d_b)])
    wmap = compose([rho, channel, trace_b], [])
    # process map: inputs A^O, B^O; outputs A^I, B^I
    choi = permute_systems(wmap.choi, [ai.name, ao.name, bi.name, bo.name])
    parties = [Party(a, ai, ao), Party(b, bi, bo)]
    return ProcessMatrix(parties, choi)


def single_party_process(d: int = 2, seed=0, name: str = "A") -> ProcessMatrix:
    """One party receiving a fixed random state; its output is discarded."""
    ai, ao = SystemLabel(f"{name}^I", d), SystemLabel(f"{name}^O", d)
    rho = random_channel([], [ai], n_kraus=2, seed=seed)
    trace_o = CPM.from_kraus([ao], [], [np.eye(d)[k:k + 1] for k in range(d)])
    wmap = compose([rho, trace_o], [])
    return ProcessMatrix([Party(name, ai, ao)], permute_systems(wmap.choi, [ai.name, ao.name]))


# ---------------------------------------------------------------------------
# Quantum switch


def switch_parties(d: int) -> list[Party]:
    return [
        Party("A", SystemLabel("A^I", d), SystemLabel("A^O", d)),
        Party("B", SystemLabel("B^I", d), SystemLabel("B^O", d)),
        Party("C", SystemLabel("C^I", 1), SystemLabel("C^O", 2 * d)),
        Party("D", SystemLabel("D^I", 2 * d), SystemLabel("D^O", 1)),
    ]


def quantum_switch(d: int) -> ProcessMatrix:
    """Pure switch process; C^O and D^I are (control, target) pairs of dimension 2d.

    Control 0 routes C's target to A, A to B and B to D; control 1 routes it to
    B, B to A and A to D. The control is handed to D unchanged.
    """
    if d < 2:
        raise ValueError("the switch needs a target dimension d >= 2")
    # legs: C^I, C^O(c, t), A^I, A^O, B^I, B^O, D^I(c, t), D^O
    v = np.zeros((1, 2, d, d, d, d, d, 2, d, 1), dtype=complex)
    r = np.arange(d)
    t, x, y = np.meshgrid(r, r, r, indexing="ij")
    # control 0: A^I = t, B^I = A^O = x, D_T = B^O = y
    v[0, 0, t, t, x, x, y, 0, y, 0] = 1.0
    # control 1: B^I = t, A^I = B^O = x, D_T = A^O = y
    v[0, 1, t, x, y, t, x, 1, y, 0] = 1.0
    parties = switch_parties(d)
    by = {p.name: p for p in parties}
    systems = [by["C"].input, by["C"].output, by["A"].input, by["A"].output, by["B"].input, by["B"].output,
               by["D"].input, by["D"].output]
    return ProcessMatrix(parties, LabeledOperator(systems, v.reshape(-1)))


def preparation(alpha: complex, beta: complex, psi: np.ndarray) -> np.ndarray:
    """alpha|0> + beta|1> on the control, psi on the target, as one 2d vector."""
    return np.kron(np.array([alpha, beta], dtype=complex), np.asarray(psi, dtype=complex))


def _check_unit(alpha, beta, psi, unitaries, tol=1e-9):
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > tol:
        raise ValueError("|alpha|^2 + |beta|^2 must be 1")
    if abs(np.linalg.norm(psi) - 1) > tol:
        raise ValueError("psi must be normalised")
    for u in unitaries:
        u = np.asarray(u)
        if u.shape != (len(psi), len(psi)) or np.max(np.abs(u.conj().T @ u - np.eye(len(psi)))) > tol:
            raise ValueError("operations must be unitaries on the target dimension")


def _control_target(vec: np.ndarray, d: int) -> LabeledOperator:
    return LabeledOperator([SystemLabel("control", 2), SystemLabel("target", d)], vec)


def qs_reference_output(alpha, beta, psi, u, v) -> LabeledOperator:
    """alpha|0> V U psi + beta|1> U V psi."""
    psi = np.asarray(psi, dtype=complex)
    _check_unit(alpha, beta, psi, [u, v])
    vec = np.concatenate([alpha * (v @ u @ psi), beta * (u @ v @ psi)])
    return _control_target(vec, len(psi))


def qsf_reference_output(alpha, beta, psi, u1, u2, v1, v2) -> LabeledOperator:
    """alpha|0> V2 U1 psi + beta|1> U2 V1 psi."""
    psi = np.asarray(psi, dtype=complex)
    _check_unit(alpha, beta, psi, [u1, u2, v1, v2])
    vec = np.concatenate([alpha * (v2 @ u1 @ psi), beta * (u2 @ v1 @ psi)])
    return _control_target(vec, len(psi))


def switch_locals(d: int, u: np.ndarray, v: np.ndarray, prep_port: str = "P", out_port: str = "F"
                  ) -> dict[str, CPM]:
    """Local operations for the switch: C forwards its free input P, A and B apply U and V, D forwards to F."""
    ps = {p.name: p for p in switch_parties(d)}
    c = CPM.from_unitary([ps["C"].input, SystemLabel(prep_port, 2 * d)], [ps["C"].output], np.eye(2 * d))
    dd = CPM.from_unitary([ps["D"].input], [ps["D"].output, SystemLabel(out_port, 2 * d)], np.eye(2 * d))
    a = CPM.from_unitary([ps["A"].input], [ps["A"].output], u)
    b = CPM.from_unitary([ps["B"].input], [ps["B"].output], v)
    return {"A": a, "B": b, "C": c, "D": dd}


def run_switch(net: QuantumNetwork, prep: np.ndarray, prep_port: str = "P", out_port: str = "F") -> np.ndarray:
    """Density matrix on ``out_port`` when the induced map of ``net`` acts on the pure preparation."""
    m = induced_map(net)
    d2 = m.input(prep_port).dim
    rho = LabeledOperator([SystemLabel(prep_port, d2)], np.outer(prep, np.conj(prep)))
    return apply(m, rho).as_operator().data


def fidelity(state: np.ndarray, reference: np.ndarray) -> float:
    """|<ref|psi>|^2 for a vector, <ref|rho|ref> for a density matrix."""
    ref = np.asarray(reference).reshape(-1)
    state = np.asarray(state)
    if state.ndim == 2 and state.shape[0] == state.shape[1] and state.shape[0] > 1:
        return float(np.real(ref.conj() @ state @ ref))
    return float(abs(np.vdot(ref, state.reshape(-1))) ** 2)
