import numpy as np
import pytest

from qcausal.analysis import (ImplementationFalsified, TheoremOneVerdict, chain_embedding, extract_process,
                              identity_witnesses, localized_embedding, process_signalling, theorem1_audit,
                              theorem2_audit, trivial_realisation)
from qcausal.embedding import acyclic_assignment_exists, certify_cycle, relativistic_causality
from qcausal.linalg import CPM
from qcausal.network import chain_network
from qcausal.process import ProcessError, one_way_process, process_network, quantum_switch, single_party_process
from qcausal.sampling import random_channel
from qcausal.switch import switch_realisation


def test_localized_switch_forces_cycle():
    w = quantum_switch(2)
    emb = localized_embedding(w)
    sig = process_signalling(w)
    assert [r.label for r in certify_cycle(sig, emb)] == ["R^A", "R^B"]
    assert acyclic_assignment_exists(sig, emb) == (False, None)
    assert len(emb.image()) == 4


def test_theorem1_on_bundle(bundle2):
    v = theorem1_audit(bundle2.realisation, bundle2.coarse_process)
    assert (v.condition1_not_fixed_order, v.condition2_relativistic_causality, v.condition3_acyclic_image) == \
        (True, True, False)
    assert v.consistent and v.summary().startswith("consistent with Theorem 1")


def test_theorem1_per_party_certificate(bundle2):
    r = switch_realisation(bundle2.coarse_net, bundle2.fine_net, 2, per_party=True)
    v = theorem1_audit(r, bundle2.coarse_process)
    assert [x.label for x in v.cycle_certificate] == ["A", "B"]
    assert v.to_dict()["cycle_certificate"] == ["A", "B"]


def test_reversed_chain_violates_causality():
    net = chain_network([2, 2, 2, 2])
    emb, st = chain_embedding(["S0", "S1", "S2", "S3"], {"S0": 3, "S1": 2, "S2": 1, "S3": 0})
    rep = relativistic_causality(trivial_realisation(net, emb, st))
    assert not rep.ok
    assert "{S0} -> {S1} has no matching path" in rep.describe()
    emb, st = chain_embedding(["S0", "S1", "S2", "S3"])
    assert relativistic_causality(trivial_realisation(net, emb, st)).ok


def one_way_realisation(ordered: bool):
    rng = np.random.default_rng(3)
    w = one_way_process(2, 2, seed=rng)
    ops = {p.name: random_channel([p.input], [p.output], 2, rng) for p in w.parties}
    net = process_network(w, ops)
    names = ["A^I", "A^O", "B^I", "B^O"]
    pos = dict(zip(names, range(4))) if ordered else dict(zip(names, [3, 2, 1, 0]))
    emb, st = chain_embedding(names, pos)
    return trivial_realisation(net, emb, st), w


def test_one_way_ordered_is_fixed_order():
    r, w = one_way_realisation(True)
    v = theorem1_audit(r, w)
    assert (v.condition1_not_fixed_order, v.condition2_relativistic_causality, v.condition3_acyclic_image) == \
        (False, True, True)


def test_one_way_reversed_breaks_causality():
    r, w = one_way_realisation(False)
    v = theorem1_audit(r, w)
    assert not v.condition2_relativistic_causality
    assert v.to_dict()["violations"]


def test_all_three_raises(monkeypatch):
    import qcausal.analysis as an
    r, w = one_way_realisation(True)
    monkeypatch.setattr(an, "is_fixed_order", lambda *a, **k: an.FixedOrderResult(False, None))
    with pytest.raises(ImplementationFalsified):
        theorem1_audit(r, w)
    with pytest.warns(RuntimeWarning):
        assert theorem1_audit(r, w, strict=False).all_hold


def test_theorem2_trivial_single_party():
    w = single_party_process(2)
    a = w.parties[0]
    op = CPM.identity(a.input, a.output)
    net = process_network(w, {"A": op})
    emb, st = chain_embedding(["A^I", "A^O"])
    r = trivial_realisation(net, emb, st)
    v = theorem2_audit(r, identity_witnesses(net))
    assert v.consistent
    assert (v.party_count_fine, v.party_count_coarse) == (1, 1)
    assert len(v.finegraining.results) == 6


def test_theorem2_swapped_bins_fail_precondition(bundle2):
    pts = {"A1^I": (0, 4), "A1^O": (0, 5), "A2^I": (0, 1), "A2^O": (0, 2)}
    r = switch_realisation(bundle2.coarse_net, bundle2.fine_net, 2, points=pts)
    v = theorem2_audit(r, bundle2.witnesses, subs=bundle2.subnetworks)
    assert not v.consistent
    assert v.summary().startswith("precondition failed: relativistic causality fails: {A1^I} -> {B2^I}")


def test_theorem2_needs_witnesses(bundle2):
    with pytest.raises(ProcessError):
        theorem2_audit(bundle2.realisation)


def test_extract_process_roundtrip(bundle2):
    w = extract_process(bundle2.coarse_net)
    assert [p.name for p in w.parties] == ["A", "B", "C", "D"]
    assert w.trace == pytest.approx(16)
    with pytest.raises(ProcessError):
        extract_process(chain_network([2, 2]))


def test_verdict_defaults():
    v = TheoremOneVerdict(True, True, False)
    assert v.consistent and not v.all_hold
