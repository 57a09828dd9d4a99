import numpy as np
import pytest

from qcausal.linalg import LabeledOperator, SystemLabel
from qcausal.process import (Instrument, Party, ProcessError, ProcessMatrix, fidelity, is_fixed_order,
                             network_value, one_way_process, pairing_oracle, preparation, probability,
                             process_network, process_to_map, quantum_switch, run_switch, single_party_process,
                             switch_locals, validate_process)
from qcausal.sampling import (random_amplitudes, random_channel, random_instrument, random_pure_state,
                              random_unitary)


def local_channels(w, rng):
    return {p.name: random_channel([p.input], [p.output], 2, rng) for p in w.parties}


@pytest.mark.parametrize("d,tr", [(2, 16), (3, 54)])
def test_switch_trace(d, tr):
    assert quantum_switch(d).trace == pytest.approx(tr, abs=1e-9)


def test_switch_rejects_d1():
    with pytest.raises(ValueError):
        quantum_switch(1)


def test_switch_matches_block_unitary():
    rng = np.random.default_rng(0)
    w = quantum_switch(2)
    for _ in range(5):
        a, b = random_amplitudes(rng)
        psi, u, v = random_pure_state(2, rng), random_unitary(2, rng), random_unitary(2, rng)
        s = np.kron(np.diag([1, 0]), v @ u) + np.kron(np.diag([0, 1]), u @ v)
        out = s @ preparation(a, b, psi)
        rho = run_switch(process_network(w, switch_locals(2, u, v)), preparation(a, b, psi))
        assert np.allclose(rho, np.outer(out, out.conj()), atol=1e-10)
        assert fidelity(rho, out) == pytest.approx(1.0, abs=1e-10)


def test_network_value_matches_pairing_oracle():
    rng = np.random.default_rng(1)
    for w in (quantum_switch(2), one_way_process(2, 3, seed=rng)):
        for _ in range(3):
            ops = local_channels(w, rng)
            assert network_value(w, ops) == pytest.approx(pairing_oracle(w, ops), abs=1e-10)
            assert network_value(w, ops).real == pytest.approx(1.0, abs=1e-10)


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(2)
    w = one_way_process(2, 2, seed=rng)
    inst = {p.name: Instrument("r", random_instrument([p.input], [p.output], 2, seed=rng)) for p in w.parties}
    total = sum(probability(w, inst, {"A": x, "B": y}) for x in inst["A"].branches for y in inst["B"].branches)
    assert total == pytest.approx(1.0, abs=1e-10)
    ops = {p.name: inst[p.name].branches[0] for p in w.parties}
    assert probability(w, inst, {"A": 0, "B": 0}) == pytest.approx(pairing_oracle(w, ops).real, abs=1e-12)


def test_validate_process():
    assert validate_process(quantum_switch(2), 20).ok
    assert validate_process(one_way_process(2, 2), 20).ok
    w = single_party_process(2)
    assert w.trace == pytest.approx(2)
    bad = ProcessMatrix(w.parties, LabeledOperator(w.w.systems, -w.w.data))
    rep = validate_process(bad, 5)
    assert not rep.ok and not rep.positive


def test_fixed_order():
    assert is_fixed_order(one_way_process(2, 2)).order == ("A", "B")
    assert is_fixed_order(one_way_process(2, 2, names=("B", "A"))).order == ("B", "A")
    assert not is_fixed_order(quantum_switch(2)).fixed


def test_process_constructor_checks():
    a = SystemLabel("A^I", 2)
    with pytest.raises(ProcessError):
        ProcessMatrix([Party("A", a, a)], LabeledOperator([a], np.eye(2)))
    with pytest.raises(ProcessError):
        process_network(quantum_switch(2), {})


def test_process_map_rejects_non_tp():
    w = single_party_process(2)
    bad = ProcessMatrix(w.parties, LabeledOperator(w.w.systems, 2 * w.w.data))
    with pytest.raises(ProcessError):
        process_to_map(bad)
