import itertools

import numpy as np
import pytest

from qcausal import signalling as sg
from qcausal.battery import QS_EDGES
from qcausal.linalg import CPM, SystemLabel, cpm_tensor
from qcausal.network import chain_network
from qcausal.process import process_to_map, quantum_switch
from qcausal.sampling import random_channel
from qcausal.signalling import (NotTracePreservingError, intervention_oracle, network_signalling_structure,
                                node_label, signalling_structure, signals)

PAULI = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]


def oracle_signals(cpm, s_in, s_out, tol=1e-9):
    """Plain numpy version of the marginal factorisation test."""
    names = [s.name for s in cpm.systems]
    dims = [s.dim for s in cpm.systems]
    n = len(names)
    c = cpm.choi_matrix.reshape(dims + dims)
    outs = [s.name for s in cpm.outputs]
    ins = [s.name for s in cpm.inputs]
    for o in outs:
        if o not in s_out:
            k = names.index(o)
            c = np.trace(c, axis1=k, axis2=k + len(names))
            names.pop(k)
            dims.pop(k)
    n = len(names)
    order = [names.index(x) for x in list(s_in) + [i for i in ins if i not in s_in] + list(s_out)]
    c = c.transpose(order + [k + n for k in order])
    d_si = int(np.prod([dims[names.index(x)] for x in s_in]))
    d = int(np.prod(dims))
    m = c.reshape(d, d)
    m4 = m.reshape(d_si, d // d_si, d_si, d // d_si)
    red = np.einsum("iaib->ab", m4)
    return bool(np.max(np.abs(m - np.kron(np.eye(d_si) / d_si, red))) > tol)


def pauli_pad():
    """Message a padded by a random Pauli whose label k is output too."""
    a, b, k = SystemLabel("a", 2), SystemLabel("b", 2), SystemLabel("k", 4)
    kraus = [np.kron(PAULI[j], np.eye(4)[:, [j]]) / 2 for j in range(4)]
    return CPM.from_kraus([a], [b, k], kraus)


def test_node_label():
    assert node_label(frozenset({"B", "A"})) == "{A,B}"


def test_switch_singleton_edges_exact():
    sig = signalling_structure(process_to_map(quantum_switch(2)), 1)
    assert frozenset(sig.singleton_edges()) == QS_EDGES
    assert not sig.has_edge("D^O", "C^I")


def test_switch_set_edge_counts():
    m = process_to_map(quantum_switch(2))
    assert len(signalling_structure(m, 3)) == 161
    assert len(signalling_structure(m, None)) == 188


def test_switch_structure_matches_numpy_oracle():
    m = process_to_map(quantum_switch(2))
    sig = signalling_structure(m, 2)
    ins = [s.name for s in m.inputs]
    outs = [s.name for s in m.outputs]
    for r in (1, 2):
        for si in itertools.combinations(ins, r):
            for so in itertools.combinations(outs, r):
                assert sig.has_edge(si, so) == oracle_signals(m, si, so), (si, so)


def test_pauli_pad_pair_but_not_singletons():
    m = pauli_pad()
    assert not signals(m, ["a"], ["b"])
    assert not signals(m, ["a"], ["k"])
    assert signals(m, ["a"], ["b", "k"])
    assert not intervention_oracle(m, ["a"], ["b"], trials=32)
    assert intervention_oracle(m, ["a"], ["b", "k"], trials=32)


def test_product_channel_does_not_cross_signal():
    rng = np.random.default_rng(0)
    m = cpm_tensor(random_channel([SystemLabel("x", 2)], [SystemLabel("u", 2)], 2, rng),
                   random_channel([SystemLabel("y", 3)], [SystemLabel("v", 2)], 2, rng))
    assert signals(m, ["x"], ["u"]) and signals(m, ["y"], ["v"])
    assert not signals(m, ["x"], ["v"]) and not signals(m, ["y"], ["u"])


def test_non_tp_rejected():
    m = CPM.from_kraus([SystemLabel("a", 2)], [SystemLabel("b", 2)], [0.5 * np.eye(2)])
    with pytest.raises(NotTracePreservingError):
        signals(m, ["a"], ["b"])


def test_large_route_agrees_with_dense(monkeypatch):
    rng = np.random.default_rng(1)
    cases = [pauli_pad(), process_to_map(quantum_switch(2))]
    for _ in range(6):
        ins = [SystemLabel(f"i{j}", int(rng.integers(2, 4))) for j in range(2)]
        outs = [SystemLabel(f"o{j}", int(rng.integers(2, 4))) for j in range(2)]
        cases.append(cpm_tensor(random_channel(ins[:1], outs[:1], 2, rng), random_channel(ins[1:], outs[1:], 2, rng)))
        cases.append(random_channel(ins, outs, 2, rng))
    queries = []
    for m in cases:
        for si in [[s.name] for s in m.inputs] + [[s.name for s in m.inputs[:2]]]:
            for so in [[s.name] for s in m.outputs]:
                queries.append((m, si, so, signals(m, si, so)))
    monkeypatch.setattr(sg, "DENSE_MARGINAL_DIM", 0)
    for m, si, so, dense in queries:
        assert signals(m, si, so) == dense


def test_probe_is_sound():
    m = pauli_pad()
    assert not sg._probe_signals(m, [m.input("a")], [m.output("b")], trials=8)


def test_chain_network_structure():
    sig = network_signalling_structure(chain_network([2, 2, 2, 2]))
    assert [(node_label(a), node_label(b)) for a, b in sig.sorted_edges()] == [
        ("{S0}", "{S1}"), ("{S0}", "{S2}"), ("{S0}", "{S3}"), ("{S1}", "{S2}"), ("{S1}", "{S3}"), ("{S2}", "{S3}")]


def test_network_query_errors():
    ns = sg.NetworkSignalling(chain_network([2, 2, 2]))
    with pytest.raises(ValueError):
        ns.signals(["S2"], ["S0"])
    with pytest.raises(ValueError):
        ns.signals(["S1"], ["S1"])
