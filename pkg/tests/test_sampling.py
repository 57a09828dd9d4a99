import numpy as np

from qcausal.linalg import SystemLabel, is_cptp
from qcausal.network import validate
from qcausal.process import Instrument
from qcausal.sampling import (random_amplitudes, random_channel, random_density, random_instrument, random_isometry,
                              random_network, random_pure_state, random_unitary)


def test_unitary_and_isometry():
    u = random_unitary(3, seed=0)
    assert np.allclose(u.conj().T @ u, np.eye(3))
    v = random_isometry(4, 2, seed=0)
    assert np.allclose(v.conj().T @ v, np.eye(2))


def test_states():
    psi = random_pure_state(3, seed=1)
    assert np.isclose(np.vdot(psi, psi), 1)
    rho = random_density(3, rank=2, seed=1)
    assert np.isclose(np.trace(rho), 1)
    assert np.linalg.matrix_rank(rho, tol=1e-10) == 2
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-12
    a, b = random_amplitudes(2)
    assert np.isclose(abs(a) ** 2 + abs(b) ** 2, 1)


def test_seeds_are_reproducible():
    assert np.allclose(random_unitary(2, seed=5), random_unitary(2, seed=5))


def test_channel_and_instrument():
    ins, outs = [SystemLabel("i", 2)], [SystemLabel("o", 3)]
    assert is_cptp(random_channel(ins, outs, 2, seed=2))
    inst = random_instrument(ins, outs, 3, seed=2)
    assert len(inst) == 3
    assert Instrument("x", inst).validate()


def test_random_network_is_valid():
    rng = np.random.default_rng(3)
    for k in range(10):
        net = random_network(1 + k % 4, 3, rng)
        assert validate(net) == []
