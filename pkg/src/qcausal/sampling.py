"""Random test objects: Haar unitaries, states, channels and instruments."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .linalg import CPM, LabeledOperator, SystemLabel, _prod
from .network import Composition, QuantumNetwork


def rng_of(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(shape, rng) -> np.ndarray:
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


def random_unitary(d: int, seed=None) -> np.ndarray:
    rng = rng_of(seed)
    q, r = np.linalg.qr(ginibre((d, d), rng))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_isometry(d_out: int, d_in: int, seed=None) -> np.ndarray:
    u = random_unitary(d_out, seed)
    return u[:, :d_in]


def random_pure_state(d: int, seed=None) -> np.ndarray:
    v = ginibre(d, rng_of(seed))
    return v / np.linalg.norm(v)


def random_density(d: int, rank: int | None = None, seed=None) -> np.ndarray:
    rng = rng_of(seed)
    g = ginibre((d, rank or d), rng)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_amplitudes(seed=None) -> tuple[complex, complex]:
    a, b = random_pure_state(2, seed)
    return complex(a), complex(b)


def min_kraus(d_in: int, d_out: int) -> int:
    """Fewest Kraus operators a CPTP map d_in -> d_out can have."""
    return -(-d_in // d_out)


def random_kraus(d_in: int, d_out: int, n_kraus: int, seed=None) -> list[np.ndarray]:
    """Kraus operators of a random CPTP map (a random isometry d_in -> d_out*n_kraus)."""
    n_kraus = max(n_kraus, min_kraus(d_in, d_out))
    iso = random_isometry(d_out * n_kraus, d_in, seed)
    return [iso[k * d_out:(k + 1) * d_out] for k in range(n_kraus)]


def random_channel(inputs: Sequence[SystemLabel], outputs: Sequence[SystemLabel], n_kraus: int = 2,
                   seed=None) -> CPM:
    din = _prod(s.dim for s in inputs)
    dout = _prod(s.dim for s in outputs)
    return CPM.from_kraus(inputs, outputs, random_kraus(din, dout, n_kraus, seed))


def random_unitary_channel(inp: Sequence[SystemLabel], out: Sequence[SystemLabel], seed=None) -> CPM:
    d = _prod(s.dim for s in inp)
    return CPM.from_unitary(inp, out, random_unitary(d, seed))


def random_instrument(inputs: Sequence[SystemLabel], outputs: Sequence[SystemLabel], n_outcomes: int = 2,
                      seed=None) -> dict[int, CPM]:
    """Outcomes 0..n-1 of a random instrument; branch Chois sum to a CPTP map."""
    din = _prod(s.dim for s in inputs)
    dout = _prod(s.dim for s in outputs)
    per = max(2, -(-min_kraus(din, dout) // n_outcomes))
    kraus = random_kraus(din, dout, per * n_outcomes, seed)
    return {x: CPM.from_kraus(inputs, outputs, kraus[per * x:per * (x + 1)]) for x in range(n_outcomes)}


def random_state(systems: Sequence[SystemLabel], seed=None) -> LabeledOperator:
    d = _prod(s.dim for s in systems)
    return LabeledOperator(systems, random_density(d, seed=seed))


def random_network(n_maps: int, max_dim: int = 3, seed=None, *, max_legs: int = 2,
                   link_prob: float = 0.7) -> QuantumNetwork:
    """Random CPTP maps joined by random (possibly cyclic) loop compositions between equal dimensions."""
    rng = rng_of(seed)
    maps = {}
    for k in range(n_maps):
        ins = [SystemLabel(f"i{k}{j}", int(rng.integers(1, max_dim + 1))) for j in range(rng.integers(1, max_legs + 1))]
        outs = [SystemLabel(f"o{k}{j}", int(rng.integers(1, max_dim + 1))) for j in range(rng.integers(1, max_legs + 1))]
        maps[f"m{k}"] = random_channel(ins, outs, int(rng.integers(1, 3)), rng)
    outs = [(mid, s) for mid, m in maps.items() for s in m.outputs]
    ins = [(mid, s) for mid, m in maps.items() for s in m.inputs]
    rng.shuffle(outs)
    free_ins = list(ins)
    comps = []
    for mid, o in outs:
        if rng.random() > link_prob:
            continue
        cands = [k for k, (_, i) in enumerate(free_ins) if i.dim == o.dim]
        if not cands:
            continue
        dst, i = free_ins.pop(cands[int(rng.integers(len(cands)))])
        comps.append(Composition(mid, o.name, dst, i.name))
    return QuantumNetwork(maps, comps)
