import numpy as np
import pytest

from qcausal.analysis import identity_witnesses
from qcausal.finegraining import (FineGrainingError, FineGrainingWitness, SystemsFineGraining, identity_witness,
                                  reconstruct, verify_cpm_finegraining, verify_network_finegraining)
from qcausal.linalg import CPM, SystemLabel, permute_systems
from qcausal.network import chain_network, enumerate_subnetworks, network_systems
from qcausal.sampling import random_channel, random_network, random_unitary

L = SystemLabel


def split_unitary(u):
    """Coarse 4-dim a -> b from u, and the same unitary acting on qubit pairs."""
    m = CPM.from_unitary([L("a", 4)], [L("b", 4)], u)
    mf = CPM.from_unitary([L("a1", 2), L("a2", 2)], [L("b1", 2), L("b2", 2)], u)
    enc = CPM.from_unitary([L("a~c", 4)], [L("a1", 2), L("a2", 2)], np.eye(4))
    dec = CPM.from_unitary([L("b1", 2), L("b2", 2)], [L("b~c", 4)], np.eye(4))
    f = SystemsFineGraining({"a": {"a1", "a2"}, "b": {"b1", "b2"}})
    return m, mf, f, FineGrainingWitness(enc, dec)


def test_systems_map_disjoint():
    with pytest.raises(FineGrainingError):
        SystemsFineGraining({"a": {"x"}, "b": {"x", "y"}})
    with pytest.raises(FineGrainingError):
        SystemsFineGraining({"a": set()})
    assert SystemsFineGraining({"a": "x"}).image(["a"]) == {"x"}


def test_identity_witness_reconstructs():
    m = random_channel([L("x", 2), L("y", 3)], [L("z", 2)], 2, seed=0)
    w = identity_witness(m)
    back = reconstruct(m, w, m)
    assert np.allclose(permute_systems(back.choi, [s.name for s in m.systems]).data, m.choi_matrix)
    rep = verify_cpm_finegraining(m, m, SystemsFineGraining.identity(["x", "y", "z"]), w)
    assert rep.ok and rep.condition_i and rep.condition_ii


def test_split_unitary_passes():
    m, mf, f, w = split_unitary(random_unitary(4, seed=1))
    rep = verify_cpm_finegraining(m, mf, f, w)
    assert rep.ok and rep.choi_error < 1e-9


def test_wrong_fine_map_fails_condition_i():
    m, _, f, w = split_unitary(random_unitary(4, seed=2))
    _, other, _, _ = split_unitary(random_unitary(4, seed=3))
    rep = verify_cpm_finegraining(m, other, f, w)
    assert not rep.ok and not rep.condition_i


def test_rerouted_signal_fails_condition_ii():
    # coarse identity a -> b; fine map sends a to the extra output y, Dec reads y
    m = CPM.identity(L("a", 2), L("b", 2))
    swap = np.eye(4)[[0, 2, 1, 3]]
    mf = CPM.from_unitary([L("a", 2), L("x", 2)], [L("b", 2), L("y", 2)], swap)
    enc = CPM.from_kraus([L("a~c", 2)], [L("a", 2), L("x", 2)], [np.kron(np.eye(2), np.eye(2)[:, [0]])])
    dec = CPM.from_kraus([L("b", 2), L("y", 2)], [L("b~c", 2)],
                         [np.kron(np.eye(2)[[k]], np.eye(2)) for k in range(2)])
    f = SystemsFineGraining({"a": {"a"}, "b": {"b"}})
    rep = verify_cpm_finegraining(m, mf, f, FineGrainingWitness(enc, dec))
    assert rep.condition_i and not rep.condition_ii
    assert rep.describe() == ["lost signalling {a} -> {b}"]


def test_network_identity_finegraining_and_missing():
    net = chain_network([2, 2, 2, 2])
    f = SystemsFineGraining.identity(["S0", "S1", "S2", "S3"])
    rep = verify_network_finegraining(net, net, f, identity_witnesses(net))
    assert rep.ok and rep.complete
    subs = list(enumerate_subnetworks(net))
    partial = {s: v for s, v in identity_witnesses(net).items() if len(s.maps) == 1}
    rep = verify_network_finegraining(net, net, f, partial, subs=subs)
    assert not rep.complete and rep.missing and not rep.failures


def test_split_products_agrees_with_direct():
    rng = np.random.default_rng(4)
    for k in range(6):
        net = random_network(2 + k % 2, 2, rng, link_prob=0.4)
        names = sorted(network_systems(net))
        f = SystemsFineGraining.identity(names)
        wit = identity_witnesses(net)
        a = verify_network_finegraining(net, net, f, wit, split_products=True)
        b = verify_network_finegraining(net, net, f, wit, split_products=False)
        assert [r.status for r in a.results] == [r.status for r in b.results]
        assert a.ok and b.ok

