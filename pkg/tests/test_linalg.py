import numpy as np
import pytest

from qcausal.linalg import (CPM, DimensionError, LabelError, LabeledOperator, SystemLabel, apply, choi_of, compose,
                            cpm_tensor, is_cptp, ket, loop_compose, marginal, max_entangled, partial_trace,
                            permute_systems, sequential, tensor_product, tp_deviation, trace_out_outputs)
from qcausal.sampling import random_channel, random_density, random_unitary

A, B, C = SystemLabel("a", 2), SystemLabel("b", 3), SystemLabel("c", 2)


def test_label_validation():
    with pytest.raises(DimensionError):
        SystemLabel("x", 0)
    with pytest.raises(LabelError):
        SystemLabel("", 2)
    assert str(B) == "b[3]"


def test_tensor_rejects_duplicate_label():
    with pytest.raises(LabelError):
        tensor_product(ket(A, 0), ket(A, 1))


def test_partial_trace_matches_numpy():
    rng = np.random.default_rng(1)
    ra, rb = random_density(2, seed=rng), random_density(3, seed=rng)
    rho = LabeledOperator([A, B], np.kron(ra, rb))
    assert np.allclose(partial_trace(rho, ["b"]).data, ra)
    assert np.allclose(partial_trace(rho, ["a"]).data, rb)
    with pytest.raises(LabelError):
        partial_trace(rho, ["zz"])


def test_permute_systems_is_swap():
    rng = np.random.default_rng(2)
    ra, rb = random_density(2, seed=rng), random_density(3, seed=rng)
    rho = LabeledOperator([A, B], np.kron(ra, rb))
    out = permute_systems(rho, ["b", "a"])
    assert out.names == ("b", "a")
    assert np.allclose(out.data, np.kron(rb, ra))


def test_max_entangled():
    v = max_entangled(A, C)
    assert np.allclose(v.data.reshape(-1), [1, 0, 0, 1])
    with pytest.raises(DimensionError):
        max_entangled(A, B)


def test_choi_of_unitary_and_apply():
    u = random_unitary(2, seed=3)
    m = choi_of(lambda x: u @ x @ u.conj().T, [A], [C])
    assert is_cptp(m)
    assert np.allclose(m.choi_matrix, CPM.from_unitary([A], [C], u).choi_matrix)
    rho = random_density(2, seed=4)
    out = apply(m, LabeledOperator([A], rho))
    assert np.allclose(out.data, u @ rho @ u.conj().T)


def test_choi_of_rejects_nonlinear():
    with pytest.raises(ValueError):
        choi_of(lambda x: x @ x, [A], [C])


def test_purified_and_dense_agree():
    m = random_channel([A], [B], 3, seed=5)
    dense = CPM(m.inputs, m.outputs, m.choi_matrix)
    assert np.allclose(trace_out_outputs(m), np.eye(2))
    assert np.allclose(trace_out_outputs(dense), np.eye(2))
    assert np.allclose(m.choi_matrix, sum(np.outer(v, v.conj()) for v in m.purification.T))


def test_is_cptp_flags_non_tp():
    m = CPM.from_kraus([A], [C], [0.5 * np.eye(2)])
    v = is_cptp(m)
    assert v.cp and not v.tp and not v
    assert tp_deviation(m) == pytest.approx(0.75)


def test_sequential_is_kraus_product():
    rng = np.random.default_rng(6)
    f = random_channel([A], [B], 2, rng)
    g = random_channel([B], [C], 2, rng)
    direct = CPM.from_kraus([A], [C], [kg @ kf for kg in g.kraus() for kf in f.kraus()])
    assert np.allclose(permute_systems(sequential(g, f).choi, ["a", "c"]).data, direct.choi_matrix)


def test_loop_compose_of_tensor_matches_sequential():
    rng = np.random.default_rng(7)
    f = random_channel([A], [B], 2, rng)
    g = random_channel([SystemLabel("b2", 3)], [C], 2, rng)
    both = cpm_tensor(f, g)
    looped = loop_compose(both, "b", "b2")
    seq = sequential(g.rename({"b2": "b"}), f)
    assert np.allclose(permute_systems(looped.choi, ["a", "c"]).data,
                       permute_systems(seq.choi, ["a", "c"]).data)


def test_compose_order_independent():
    rng = np.random.default_rng(8)
    x, y = SystemLabel("x", 2), SystemLabel("y", 2)
    f = random_channel([A], [x], 2, rng)
    g = random_channel([x], [y], 2, rng)
    h = random_channel([y], [C], 2, rng)
    links = [((0, "x"), (1, "x")), ((1, "y"), (2, "y"))]
    one = compose([f, g, h], links)
    two = compose([f, g, h], links[::-1])
    assert np.allclose(one.choi_matrix, two.choi_matrix)


def test_marginal_keeps_outputs():
    rng = np.random.default_rng(9)
    m = cpm_tensor(random_channel([A], [SystemLabel("o1", 2)], 2, rng),
                   random_channel([B], [SystemLabel("o2", 3)], 2, rng))
    k = marginal(m, ["o1"])
    assert [s.name for s in k.outputs] == ["o1"]
    assert is_cptp(k)


def test_tp_deviation_sketch_and_exact_agree_on_channels():
    m = random_channel([A, B], [C], 2, seed=10)
    assert tp_deviation(m) < 1e-9
