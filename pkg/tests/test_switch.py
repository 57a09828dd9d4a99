import numpy as np
import pytest

from qcausal.battery import refines_switch_order
from qcausal.embedding import check_fine_embedding
from qcausal.finegraining import verify_cpm_finegraining
from qcausal.linalg import is_cptp
from qcausal.network import induced_map
from qcausal.process import (fidelity, is_fixed_order, preparation, process_network, qs_reference_output,
                             qsf_reference_output, run_switch, validate_process)
from qcausal.sampling import random_amplitudes, random_pure_state, random_unitary
from qcausal.finegraining import restrict
from qcausal.spacetime import is_acyclic
from qcausal.switch import (extraction_kraus, fine_locals, fine_switch_process, lift_kraus, lift_unitary,
                            switch_witness)


def test_lift_keeps_vacuum():
    u = random_unitary(2, seed=0)
    big = lift_unitary(u)
    assert np.allclose(big.conj().T @ big, np.eye(3))
    assert np.allclose(big[:, 2], [0, 0, 1])
    k = [np.sqrt(0.5) * np.eye(2), np.sqrt(0.5) * np.diag([1, -1])]
    lifted = lift_kraus(k)
    assert np.allclose(sum(x.conj().T @ x for x in lifted), np.eye(3))


def test_extraction_is_cptp():
    ops = extraction_kraus(2)
    assert len(ops) == 6
    assert np.allclose(sum(k.T @ k for k in ops), np.eye(18))


def test_fine_process_valid_and_ordered():
    w = fine_switch_process(2)
    assert validate_process(w, 10).ok
    assert w.trace == pytest.approx(w.expected_trace)
    r = is_fixed_order(w)
    assert r.fixed and refines_switch_order(r.order)


def test_fine_network_reproduces_two_bin_reference(bundle2):
    rng = np.random.default_rng(1)
    for _ in range(3):
        a, b = random_amplitudes(rng)
        psi = random_pure_state(2, rng)
        u1, u2, v1, v2 = (random_unitary(2, rng) for _ in range(4))
        net = process_network(bundle2.process, fine_locals(2, u1, u2, v1, v2), wmap=bundle2.fine_net.maps["W"])
        rho = run_switch(net, preparation(a, b, psi))
        assert fidelity(rho, qsf_reference_output(a, b, psi, u1, u2, v1, v2).data) == pytest.approx(1, abs=1e-9)


def test_equal_bins_reduce_to_switch():
    rng = np.random.default_rng(2)
    a, b = random_amplitudes(rng)
    psi, u, v = random_pure_state(2, rng), random_unitary(2, rng), random_unitary(2, rng)
    assert np.allclose(qsf_reference_output(a, b, psi, u, u, v, v).data, qs_reference_output(a, b, psi, u, v).data)


def test_bundle_shape(bundle2):
    assert len(bundle2.subnetworks) == 640
    assert (bundle2.party_count_fine, bundle2.party_count_coarse) == (6, 4)
    assert check_fine_embedding(bundle2.realisation) == []
    assert is_acyclic(bundle2.realisation.refined_structure())


def test_full_network_witness(bundle2):
    b = bundle2
    sub = b.coarse_net.full()
    sub_f, w = b.witnesses[sub]
    assert is_cptp(w.enc)
    m, mf = induced_map(b.coarse_net, sub), induced_map(b.fine_net, sub_f)
    rep = verify_cpm_finegraining(m, mf, restrict(b.f, b.coarse_net, sub, b.fine_net, sub_f), w)
    assert rep.ok, rep.describe()


def test_witness_matches_direct_call(bundle2):
    sub = bundle2.subnetworks[5]
    sub_f, w = switch_witness(bundle2.coarse_net, bundle2.fine_net, sub, 2)
    assert sub_f == bundle2.witnesses[sub][0]


@pytest.mark.slow
def test_d3_audit():
    from qcausal.analysis import theorem2_audit
    from qcausal.switch import fine_grained_switch
    v = theorem2_audit(fine_grained_switch(3))
    assert v.consistent, v.summary()
    assert len(v.finegraining.results) == 640
    assert v.order == ("C", "A1", "B1", "A2", "B2", "D")
