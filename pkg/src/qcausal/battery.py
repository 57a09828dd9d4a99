"""The switch acceptance battery: one named check per criterion, as used by ``qcausal demo-qswitch``."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import (chain_embedding, localized_embedding, process_signalling, theorem1_audit, theorem2_audit,
                       trivial_realisation)
from .embedding import Embedding, acyclic_assignment_exists, certify_cycle
from .linalg import CPM, MAX_DENSE_DIM, SystemLabel, compose, permute_systems
from .network import induced_map, network_systems
from .process import (fidelity, is_fixed_order, one_way_process, preparation, process_network,
                      qs_reference_output, qsf_reference_output, quantum_switch, run_switch, switch_locals,
                      validate_process)
from .sampling import (random_amplitudes, random_channel, random_network, random_pure_state, random_unitary,
                       rng_of)
from .signalling import intervention_oracle, signals
from .switch import fine_grained_switch, fine_locals

# singleton signalling edges of the switch process map
QS_EDGES = frozenset({
    ("C^O", "A^I"), ("C^O", "B^I"), ("C^O", "D^I"),
    ("A^O", "B^I"), ("A^O", "D^I"),
    ("B^O", "A^I"), ("B^O", "D^I"),
})
FIDELITY_TOL = 1e-9


@dataclass
class Check:
    criterion: int
    name: str
    ok: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.criterion}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _draw(d: int, rng):
    a, b = random_amplitudes(rng)
    return a, b, random_pure_state(d, rng), random_unitary(d, rng), random_unitary(d, rng)


def check_transformation(d: int, draws: int = 50, seed=0) -> Check:
    rng = rng_of(seed)
    w = quantum_switch(d)
    worst = 1.0
    for _ in range(draws):
        a, b, psi, u, v = _draw(d, rng)
        rho = run_switch(process_network(w, switch_locals(d, u, v)), preparation(a, b, psi))
        worst = min(worst, fidelity(rho, qs_reference_output(a, b, psi, u, v).data))
    return Check(1, "switch transformation", worst >= 1 - FIDELITY_TOL, f"min fidelity {worst:.15f} over {draws}")


def check_validity(d: int, seed=0) -> Check:
    w = quantum_switch(d)
    tr = w.trace
    rep = validate_process(w, 100, seed)
    ok = abs(tr - 2 * d ** 3) <= 1e-9 and rep.ok
    return Check(2, "switch trace and validity", ok, f"Tr W_QS = {tr:.10g} (expected {2 * d ** 3}); "
                 f"normalisation error {rep.max_normalization_error:.2g} over {rep.samples} instruments")


def check_signalling(d: int) -> Check:
    sig = process_signalling(quantum_switch(d))
    got = frozenset(sig.singleton_edges())
    ok = got == QS_EDGES and sig.has_edge("A^O", "B^I") and sig.has_edge("B^O", "A^I")
    extra, missing = sorted(got - QS_EDGES), sorted(QS_EDGES - got)
    return Check(3, "bidirectional signalling", ok, f"{len(got)} singleton edges; extra {extra}, missing {missing}")


def refines_switch_order(order) -> bool:
    """Order compatible with C < {A1, B1} < {A2, B2} < D."""
    if order is None:
        return False
    layer = {"C": 0, "A1": 1, "B1": 1, "A2": 2, "B2": 2, "D": 3}
    ranks = [layer[p] for p in order]
    return ranks == sorted(ranks)


def check_fixed_order(d: int, bundle=None) -> Check:
    b = bundle or fine_grained_switch(d)
    coarse = is_fixed_order(b.coarse_process)
    fine = is_fixed_order(b.process, wmap=b.fine_net.maps["W"])
    ok = not coarse.fixed and fine.fixed and refines_switch_order(fine.order)
    return Check(4, "fixed-order verdicts", ok, f"W_QS fixed: {coarse.fixed}; W^f fixed: {fine.fixed} "
                 f"with order {' < '.join(fine.order or ())}")


def check_theorem2(d: int, bundle=None, draws: int = 50, seed=0) -> Check:
    b = bundle or fine_grained_switch(d)
    verdict = theorem2_audit(b)
    rng = rng_of(seed)
    worst = 0.0
    worst_fid = 1.0
    for _ in range(draws):
        a, bb, psi, u, v = _draw(d, rng)
        lhs = qsf_reference_output(a, bb, psi, u, u, v, v).data
        rhs = qs_reference_output(a, bb, psi, u, v).data
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        net = process_network(b.process, fine_locals(d, u, u, v, v), wmap=b.fine_net.maps["W"])
        worst_fid = min(worst_fid, fidelity(run_switch(net, preparation(a, bb, psi)), rhs))
    ok = verdict.consistent and worst <= 1e-9 and worst_fid >= 1 - FIDELITY_TOL
    return Check(5, "fine-grained explanation", ok, verdict.summary().replace("\n", ";") +
                 f"; equal-bin reference vs switch reference max deviation {worst:.2g}; fine network min fidelity {worst_fid:.15f}")


def check_theorem1(d: int) -> Check:
    w = quantum_switch(d)
    emb = localized_embedding(w)
    sig = process_signalling(w)
    cycle = certify_cycle(sig, emb)
    found, _ = acyclic_assignment_exists(sig, emb)
    ok = cycle is not None and not found and len(emb.image()) <= 5
    label = " -> ".join(r.label for r in cycle) if cycle else "none"
    return Check(6, "forced cycle", ok, f"certificate {label}; acyclic assignment exists: {found}")


def random_pointlike_embedding(systems, rng, n_points: int | None = None) -> tuple[Embedding, object]:
    n = n_points or len(systems)
    pos = {s: int(rng.integers(n)) for s in systems}
    return chain_embedding(list(systems), pos)


def check_trichotomy(d: int, instances: int = 20, seed=0) -> Check:
    rng = rng_of(seed)
    w = quantum_switch(d)
    b = fine_grained_switch(d, seed=seed)
    cases = [(trivial_realisation(b.coarse_net, *random_pointlike_embedding(network_systems(b.coarse_net), rng)), w)]
    for k in range(instances):
        one = one_way_process(2, 2, seed=rng)
        ops = {p.name: random_channel([p.input], [p.output], 2, rng) for p in one.parties}
        net = process_network(one, ops)
        if k % 2:
            emb, st = random_pointlike_embedding(network_systems(net), rng)
        else:
            # ordered along the one-way channel, with random gaps
            gaps = np.cumsum(rng.integers(1, 3, size=4))
            emb, st = chain_embedding(["A^I", "A^O", "B^I", "B^O"], dict(zip(["A^I", "A^O", "B^I", "B^O"],
                                                                           map(int, gaps))))
        cases.append((trivial_realisation(net, emb, st), one))
    bad = 0
    counts = [0, 0, 0]
    for r, proc in cases:
        v = theorem1_audit(r, proc, strict=False)
        bad += v.all_hold
        counts = [c + f for c, f in zip(counts, (v.condition1_not_fixed_order, v.condition2_relativistic_causality,
                                                  v.condition3_acyclic_image))]
    return Check(7, "no-go trichotomy", bad == 0, f"{len(cases)} instances, {bad} with all three conditions; "
                 f"condition counts {counts}")


def _free_dim(net) -> int:
    linked = {c.src for c in net.comps} | {c.dst for c in net.comps}
    return int(np.prod([s.dim for leg, s, _ in net.legs() if leg not in linked]))


def check_numerics(networks: int = 100, channels: int = 50, seed=0) -> Check:
    rng = rng_of(seed)
    worst_order = 0.0
    for k in range(networks):
        net = random_network(1 + k % 4, 3, rng)
        while _free_dim(net) > MAX_DENSE_DIM:
            net = random_network(1 + k % 4, 3, rng)
        comps = sorted(net.comps)
        ref = induced_map(net)
        names = [s.name for s in ref.systems]
        for _ in range(2):
            perm = [comps[i] for i in rng.permutation(len(comps))]
            alt = induced_map(net, order=perm)
            worst_order = max(worst_order, float(np.max(np.abs(permute_systems(alt.choi, names).data
                                                               - ref.choi_matrix), initial=0.0)))
    worst_seq = 0.0
    for _ in range(20):
        d1, d2, d3 = (int(x) for x in rng.integers(1, 4, size=3))
        f = random_channel([SystemLabel("a", d1)], [SystemLabel("b", d2)], 2, rng)
        g = random_channel([SystemLabel("b", d2)], [SystemLabel("c", d3)], 2, rng)
        loop = compose([g, f], [((1, "b"), (0, "b"))], dense=True)
        # sequential composition via Kraus products
        kraus = [kg @ kf for kg in g.kraus() for kf in f.kraus()]
        direct = CPM.from_kraus(f.inputs, g.outputs, kraus)
        worst_seq = max(worst_seq, float(np.max(np.abs(permute_systems(loop.choi, ["a", "c"]).data
                                                       - direct.choi_matrix))))
    agree = 0
    for _ in range(channels):
        n_in, n_out = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        ins = [SystemLabel(f"i{j}", int(rng.integers(2, 4))) for j in range(n_in)]
        outs = [SystemLabel(f"o{j}", int(rng.integers(2, 4))) for j in range(n_out)]
        m = random_channel(ins, outs, 2, rng) if rng.random() < 0.5 else _partially_signalling(ins, outs, rng)
        si, so = [ins[0].name], [outs[-1].name]
        crit = signals(m, si, so)
        oracle = intervention_oracle(m, si, so, trials=64, seed=rng)
        agree += (crit == oracle)
    ok = worst_order <= 1e-9 and worst_seq <= 1e-9 and agree == channels
    return Check(8, "core numerics", ok, f"order independence {worst_order:.2g}; loop vs sequential "
                 f"{worst_seq:.2g}; signalling criterion/oracle agreement {agree}/{channels}")


def _partially_signalling(ins, outs, rng) -> CPM:
    """Product of a channel on the first input and one on the rest, so some pairs cannot signal."""
    if len(ins) < 2 or len(outs) < 2:
        return random_channel(ins, outs, 2, rng)
    a = random_channel(ins[:1], outs[:1], 2, rng)
    b = random_channel(ins[1:], outs[1:], 2, rng)
    return compose([a, b], [])


def run_battery(d: int = 2, seed=0, report: Callable[[Check], None] | None = None) -> list[Check]:
    if d < 2:
        raise ValueError("the switch needs d >= 2")
    bundle = fine_grained_switch(d, seed=seed)
    steps = [
        lambda: check_transformation(d, seed=seed),
        lambda: check_validity(d, seed=seed),
        lambda: check_signalling(d),
        lambda: check_fixed_order(d, bundle),
        lambda: check_theorem2(d, bundle, seed=seed),
        lambda: check_theorem1(d),
        lambda: check_trichotomy(d, seed=seed),
        lambda: check_numerics(seed=seed),
    ]
    out = []
    for step in steps:
        t = time.perf_counter()
        c = step()
        c.seconds = time.perf_counter() - t
        out.append(c)
        if report:
            report(c)
    return out


__all__ = ["Check", "QS_EDGES", "run_battery", "refines_switch_order"] + [
    f"check_{n}" for n in ("transformation", "validity", "signalling", "fixed_order", "theorem2", "theorem1",
                           "trichotomy", "numerics")]
