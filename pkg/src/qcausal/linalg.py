"""Labeled multipartite linear algebra.

Operators carry an ordered list of named systems. Completely positive maps are
stored in Choi form with the convention

    C = sum_ij |i><j|_in (x) M(|i><j|)

(computational basis, inputs listed before outputs). A CPM may hold its Choi
matrix densely or as a purification ``v`` with ``C = v v^dagger``; the latter is
what keeps the large switch processes tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np
import opt_einsum as oe

DEFAULT_TOL = 1e-9
MAX_DENSE_DIM = 2**12


class LabelError(ValueError):
    """Unknown, duplicate or otherwise inconsistent system label."""


class DimensionError(ValueError):
    """Shapes or system dimensions do not agree."""


@dataclass(frozen=True, order=True)
class SystemLabel:
    name: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise LabelError(f"system name must be a nonempty string, got {self.name!r}")
        if isinstance(self.dim, bool) or int(self.dim) != self.dim or self.dim < 1:
            raise DimensionError(f"system {self.name!r}: dimension must be a positive integer")
        object.__setattr__(self, "dim", int(self.dim))

    def __str__(self):
        return f"{self.name}[{self.dim}]"


SystemRef = Union[str, SystemLabel]


def _name(ref: SystemRef) -> str:
    return ref.name if isinstance(ref, SystemLabel) else ref


def _prod(dims: Iterable[int]) -> int:
    return math.prod(dims)


def _check_distinct(systems: Sequence[SystemLabel]):
    seen = set()
    for s in systems:
        if s.name in seen:
            raise LabelError(f"duplicate system label {s.name!r}")
        seen.add(s.name)


def einsum(*operands_and_subscripts):
    """``opt_einsum.contract`` in interleaved form with integer leg symbols."""
    return oe.contract(*operands_and_subscripts, optimize="greedy")


class LabeledOperator:
    """A matrix (or column vector) over an ordered list of labeled systems."""

    __slots__ = ("systems", "data")

    def __init__(self, systems: Sequence[SystemLabel], data):
        systems = tuple(systems)
        for s in systems:
            if not isinstance(s, SystemLabel):
                raise LabelError(f"expected SystemLabel, got {s!r}")
        _check_distinct(systems)
        arr = np.array(data, dtype=complex)
        dim = _prod(s.dim for s in systems)
        if arr.ndim == 1:
            arr = arr.reshape(dim, 1)
        if arr.shape not in ((dim, dim), (dim, 1)):
            raise DimensionError(
                f"data of shape {arr.shape} does not match systems "
                f"{[str(s) for s in systems]} (total dimension {dim})"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, key, value):
        raise AttributeError("LabeledOperator is immutable")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.systems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.systems)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_vector(self) -> bool:
        # a 1x1 scalar counts as an operator
        return self.data.shape[1] == 1 and self.data.shape[0] != 1

    def index(self, ref: SystemRef) -> int:
        name = _name(ref)
        for k, s in enumerate(self.systems):
            if s.name == name:
                return k
        raise LabelError(f"system {name!r} not in {list(self.names)}")

    def system(self, ref: SystemRef) -> SystemLabel:
        return self.systems[self.index(ref)]

    def as_operator(self) -> "LabeledOperator":
        """|v><v| for a vector, the operator itself otherwise."""
        if self.is_vector:
            v = self.data
            return LabeledOperator(self.systems, v @ v.conj().T)
        return self

    def tensor(self) -> np.ndarray:
        """Data reshaped to one leg per system (ket legs, then bra legs)."""
        if self.is_vector:
            return self.data.reshape(self.dims)
        return self.data.reshape(self.dims + self.dims)

    def trace(self) -> complex:
        if self.is_vector:
            return complex(np.vdot(self.data, self.data))
        return complex(np.trace(self.data))

    def allclose(self, other: "LabeledOperator", tol: float = DEFAULT_TOL) -> bool:
        if set(self.names) != set(other.names):
            return False
        other = permute_systems(other, self.names)
        if other.dims != self.dims:
            return False
        a, b = self.as_operator().data, other.as_operator().data
        return bool(np.max(np.abs(a - b), initial=0.0) <= tol)

    def __repr__(self):
        kind = "vector" if self.is_vector else "operator"
        return f"LabeledOperator({kind} over {[str(s) for s in self.systems]})"


def ket(system: SystemLabel, index: int) -> LabeledOperator:
    v = np.zeros(system.dim, dtype=complex)
    v[index] = 1.0
    return LabeledOperator([system], v)


def tensor_product(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    shared = set(a.names) & set(b.names)
    if shared:
        raise LabelError(f"duplicate system label {sorted(shared)[0]!r} in tensor product")
    if a.is_vector and b.is_vector:
        return LabeledOperator(a.systems + b.systems, np.kron(a.data, b.data))
    return LabeledOperator(a.systems + b.systems, np.kron(a.as_operator().data, b.as_operator().data))


def partial_trace(a: LabeledOperator, traced: Iterable[SystemRef]) -> LabeledOperator:
    """Trace out ``traced``; the remaining systems keep their order."""
    if a.is_vector:
        raise DimensionError("partial_trace needs an operator, got a vector (use as_operator())")
    names = {_name(t) for t in traced}
    for n in names:
        a.index(n)
    n_sys = len(a.systems)
    keep = [k for k, s in enumerate(a.systems) if s.name not in names]
    ket_legs = list(range(n_sys))
    bra_legs = [k if a.systems[k].name in names else n_sys + k for k in range(n_sys)]
    out = [k for k in keep] + [n_sys + k for k in keep]
    t = einsum(a.tensor(), ket_legs + bra_legs, out)
    d = _prod(a.systems[k].dim for k in keep)
    return LabeledOperator([a.systems[k] for k in keep], np.asarray(t).reshape(d, d))


def permute_systems(a: LabeledOperator, order: Sequence[SystemRef]) -> LabeledOperator:
    names = [_name(o) for o in order]
    if sorted(names) != sorted(a.names) or len(set(names)) != len(names):
        raise LabelError(f"order {names} is not a permutation of {list(a.names)}")
    perm = [a.index(n) for n in names]
    systems = [a.systems[p] for p in perm]
    d = a.dim
    if a.is_vector:
        t = a.tensor().transpose(perm)
        return LabeledOperator(systems, t.reshape(d, 1))
    n = len(perm)
    t = a.tensor().transpose(perm + [p + n for p in perm])
    return LabeledOperator(systems, t.reshape(d, d))


def max_entangled(x: SystemLabel, y: SystemLabel) -> LabeledOperator:
    """Unnormalised sum_i |ii> over [x, y]."""
    if x.dim != y.dim:
        raise DimensionError(f"max_entangled needs equal dimensions, got {x} and {y}")
    return LabeledOperator([x, y], np.eye(x.dim, dtype=complex).reshape(-1))


# ---------------------------------------------------------------------------
# Completely positive maps


@dataclass(frozen=True)
class CPTPVerdict:
    cp: bool
    tp: bool
    max_violation: float

    def __bool__(self):
        return self.cp and self.tp


class CPM:
    """Completely positive map from ``inputs`` to ``outputs`` in Choi form.

    Exactly one of ``choi`` (dense matrix or LabeledOperator over
    inputs + outputs) and ``purification`` (array of shape ``(Din*Dout, r)``
    with ``C = v v^dagger``) must be given.
    """

    def __init__(self, inputs: Sequence[SystemLabel], outputs: Sequence[SystemLabel], choi=None, *,
                 purification=None):
        inputs, outputs = tuple(inputs), tuple(outputs)
        _check_distinct(inputs + outputs)
        self._inputs = inputs
        self._outputs = outputs
        self._dense = None
        self._pur = None
        d = self.din * self.dout
        if (choi is None) == (purification is None):
            raise ValueError("give exactly one of choi and purification")
        if choi is not None:
            if isinstance(choi, LabeledOperator):
                if choi.names != tuple(s.name for s in inputs + outputs):
                    choi = permute_systems(choi, inputs + outputs)
                if choi.dims != tuple(s.dim for s in inputs + outputs):
                    raise DimensionError("Choi systems disagree with the map's in/outputs")
                choi = choi.as_operator().data
            arr = np.array(choi, dtype=complex)
            if arr.shape != (d, d):
                raise DimensionError(f"Choi matrix must be {d}x{d}, got {arr.shape}")
            arr.flags.writeable = False
            self._dense = arr
        else:
            arr = np.array(purification, dtype=complex)
            if arr.ndim == 1:
                arr = arr.reshape(d, 1)
            if arr.ndim != 2 or arr.shape[0] != d:
                raise DimensionError(f"purification must have {d} rows, got shape {arr.shape}")
            arr.flags.writeable = False
            self._pur = arr

    # -- construction helpers
    @classmethod
    def from_kraus(cls, inputs, outputs, kraus: Iterable[np.ndarray]) -> "CPM":
        inputs, outputs = tuple(inputs), tuple(outputs)
        din, dout = _prod(s.dim for s in inputs), _prod(s.dim for s in outputs)
        cols = []
        for k in kraus:
            k = np.asarray(k, dtype=complex)
            if k.shape != (dout, din):
                raise DimensionError(f"Kraus operator of shape {k.shape}, expected {(dout, din)}")
            cols.append(k.T.reshape(-1))
        return cls(inputs, outputs, purification=np.stack(cols, axis=1))

    @classmethod
    def from_unitary(cls, inputs, outputs, u: np.ndarray) -> "CPM":
        return cls.from_kraus(inputs, outputs, [u])

    @classmethod
    def identity(cls, inp: SystemLabel, out: SystemLabel) -> "CPM":
        if inp.dim != out.dim:
            raise DimensionError(f"identity channel needs equal dimensions: {inp}, {out}")
        return cls.from_unitary([inp], [out], np.eye(inp.dim))

    # -- basic properties
    @property
    def inputs(self) -> tuple[SystemLabel, ...]:
        return self._inputs

    @property
    def outputs(self) -> tuple[SystemLabel, ...]:
        return self._outputs

    @property
    def systems(self) -> tuple[SystemLabel, ...]:
        return self._inputs + self._outputs

    @property
    def din(self) -> int:
        return _prod(s.dim for s in self._inputs)

    @property
    def dout(self) -> int:
        return _prod(s.dim for s in self._outputs)

    @property
    def is_purified(self) -> bool:
        return self._pur is not None

    def system(self, ref: SystemRef) -> SystemLabel:
        name = _name(ref)
        for s in self.systems:
            if s.name == name:
                return s
        raise LabelError(f"system {name!r} not in map with inputs {[s.name for s in self._inputs]} "
                         f"and outputs {[s.name for s in self._outputs]}")

    def input(self, ref: SystemRef) -> SystemLabel:
        s = self.system(ref)
        if s not in self._inputs:
            raise LabelError(f"{s.name!r} is an output, not an input")
        return s

    def output(self, ref: SystemRef) -> SystemLabel:
        s = self.system(ref)
        if s not in self._outputs:
            raise LabelError(f"{s.name!r} is an input, not an output")
        return s

    @property
    def choi_matrix(self) -> np.ndarray:
        if self._dense is None:
            d = self.din * self.dout
            if d > MAX_DENSE_DIM:
                raise DimensionError(f"refusing to densify a {d}x{d} Choi matrix (cap {MAX_DENSE_DIM})")
            v = self._pur
            dense = v @ v.conj().T
            dense.flags.writeable = False
            self._dense = dense
        return self._dense

    @property
    def choi(self) -> LabeledOperator:
        return LabeledOperator(self.systems, self.choi_matrix)

    @cached_property
    def _purification(self) -> np.ndarray | None:
        if self._pur is not None:
            return self._pur
        c = self._dense
        h = (c + c.conj().T) / 2
        if np.max(np.abs(c - h), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(c), initial=0.0)):
            return None
        w, u = np.linalg.eigh(h)
        scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
        if w.size and w[0] < -1e-10 * scale:
            return None
        keep = w > 1e-13 * scale
        if not np.any(keep):
            return np.zeros((c.shape[0], 1), dtype=complex)
        return u[:, keep] * np.sqrt(w[keep])

    @property
    def purification(self) -> np.ndarray:
        """``v`` with ``C = v v^dagger``; raises if the Choi matrix is not PSD."""
        p = self._purification
        if p is None:
            raise ValueError("Choi matrix is not positive semidefinite; no purification exists")
        return p

    def has_purification(self) -> bool:
        return self._purification is not None

    def kraus(self) -> list[np.ndarray]:
        v = self.purification
        return [v[:, k].reshape(self.din, self.dout).T for k in range(v.shape[1])]

    def rename(self, mapping: Mapping[str, str]) -> "CPM":
        def ren(s):
            return SystemLabel(mapping.get(s.name, s.name), s.dim)

        ins, outs = [ren(s) for s in self._inputs], [ren(s) for s in self._outputs]
        if self._pur is not None:
            return CPM(ins, outs, purification=self._pur)
        return CPM(ins, outs, self._dense)

    def leg_tensor(self) -> np.ndarray:
        """Purification reshaped to (inputs..., outputs..., env)."""
        v = self.purification
        return v.reshape(tuple(s.dim for s in self.systems) + (v.shape[1],))

    def __repr__(self):
        form = f"purified r={self._pur.shape[1]}" if self._pur is not None else "dense"
        return (f"CPM({[str(s) for s in self._inputs]} -> {[str(s) for s in self._outputs]}, {form})")


def choi_of(map_action: Callable[[np.ndarray], np.ndarray], inputs: Sequence[SystemLabel],
            outputs: Sequence[SystemLabel], *, check_linearity: bool = True, seed: int = 0) -> CPM:
    """Choi matrix of ``map_action``, evaluated on the basis |i><j| of the joint input."""
    inputs, outputs = tuple(inputs), tuple(outputs)
    din, dout = _prod(s.dim for s in inputs), _prod(s.dim for s in outputs)

    def act(x):
        y = np.asarray(map_action(x), dtype=complex)
        if y.shape != (dout, dout):
            raise DimensionError(f"map action returned shape {y.shape}, expected {(dout, dout)}")
        return y

    choi = np.zeros((din * dout, din * dout), dtype=complex)
    images = {}
    for i in range(din):
        for j in range(din):
            e = np.zeros((din, din), dtype=complex)
            e[i, j] = 1.0
            images[i, j] = act(e)
            choi[i * dout:(i + 1) * dout, j * dout:(j + 1) * dout] = images[i, j]
    if check_linearity:
        rng = np.random.default_rng(seed)
        for _ in range(2):
            x = rng.normal(size=(din, din)) + 1j * rng.normal(size=(din, din))
            expected = sum(x[i, j] * images[i, j] for i in range(din) for j in range(din))
            got = act(x)
            if np.max(np.abs(got - expected)) > 1e-9 * max(1.0, np.max(np.abs(expected))):
                raise ValueError("map action is not linear on the operator basis")
    return CPM(inputs, outputs, choi)


def is_cptp(cpm: CPM, tol: float = DEFAULT_TOL) -> CPTPVerdict:
    cp_violation = 0.0
    if not cpm.is_purified:
        c = cpm.choi_matrix
        herm_dev = float(np.max(np.abs(c - c.conj().T), initial=0.0))
        w = np.linalg.eigvalsh((c + c.conj().T) / 2)
        cp_violation = max(herm_dev, float(-w[0]) if w.size else 0.0, 0.0)
    marg = trace_out_outputs(cpm)
    tp_violation = float(np.max(np.abs(marg - np.eye(cpm.din)), initial=0.0))
    return CPTPVerdict(cp_violation <= tol, tp_violation <= tol, max(cp_violation, tp_violation))


def trace_out_outputs(cpm: CPM) -> np.ndarray:
    """Tr_out C as a Din x Din matrix."""
    if cpm.is_purified:
        a = cpm.purification.reshape(cpm.din, -1)
        return a @ a.conj().T
    c = cpm.choi_matrix.reshape(cpm.din, cpm.dout, cpm.din, cpm.dout)
    return np.einsum("iojo->ij", c)


SKETCH_FLOPS = 2e9  # above this the dense Tr_out C product is replaced by a random sketch
SKETCH_COLUMNS = 16


def tp_deviation(cpm: CPM, seed: int = 0) -> float:
    """Distance of Tr_out C from the identity.

    Exact max-norm when Tr_out C is cheap to form. For large purified maps the
    Frobenius norm is estimated from (Tr_out C - I) Z with Gaussian Z, which
    upper-bounds the max-norm in expectation and costs one pass over the purification.
    """
    if cpm.is_purified:
        a = cpm.purification.reshape(cpm.din, -1)
        if cpm.din * cpm.din * a.shape[1] > SKETCH_FLOPS:
            rng = np.random.default_rng(seed)
            z = (rng.normal(size=(cpm.din, SKETCH_COLUMNS)) + 1j * rng.normal(size=(cpm.din, SKETCH_COLUMNS))) / np.sqrt(2)
            r = a @ (a.conj().T @ z) - z
            return float(np.linalg.norm(r) / np.sqrt(SKETCH_COLUMNS))
    return float(np.max(np.abs(trace_out_outputs(cpm) - np.eye(cpm.din)), initial=0.0))


def apply(cpm: CPM, rho: LabeledOperator) -> LabeledOperator:
    """M (x) id applied to ``rho``; result systems are rho's others, then the outputs."""
    rho = rho.as_operator()
    in_idx = []
    for s in cpm.inputs:
        k = rho.index(s.name)
        if rho.systems[k].dim != s.dim:
            raise DimensionError(f"dimension of {s.name!r} differs between map and state")
        in_idx.append(k)
    rest = [k for k in range(len(rho.systems)) if k not in in_idx]
    n_rho = len(rho.systems)
    n_in, n_out = len(cpm.inputs), len(cpm.outputs)
    # symbols: rho ket legs 0..n_rho-1, rho bra legs n_rho..2n_rho-1
    rho_sub = list(range(2 * n_rho))
    base = 2 * n_rho
    out_ket = [base + m for m in range(n_out)]
    out_bra = [base + n_out + m for m in range(n_out)]
    in_ket = [in_idx[k] for k in range(n_in)]
    in_bra = [n_rho + in_idx[k] for k in range(n_in)]
    final = rest + out_ket + [n_rho + k for k in rest] + out_bra
    if cpm.is_purified or cpm.has_purification():
        v = cpm.leg_tensor()
        env = base + 2 * n_out
        t = einsum(rho.tensor(), rho_sub, v, in_ket + out_ket + [env], v.conj(), in_bra + out_bra + [env], final)
    else:
        c = cpm.choi_matrix.reshape(tuple(s.dim for s in cpm.systems) * 2)
        t = einsum(rho.tensor(), rho_sub, c, in_ket + out_ket + in_bra + out_bra, final)
    systems = [rho.systems[k] for k in rest] + list(cpm.outputs)
    d = _prod(s.dim for s in systems)
    return LabeledOperator(systems, np.asarray(t).reshape(d, d))


# ---------------------------------------------------------------------------
# Contraction of several CPMs through loop compositions


Leg = tuple[int, str]


def compose(parts: Sequence[CPM], links: Iterable[tuple[Leg, Leg]],
            names: Mapping[Leg, str] | None = None, *, dense: bool | None = None) -> CPM:
    """Tensor ``parts`` together and loop-compose every ``(output leg, input leg)`` link.

    Legs are ``(part index, system name)``. Free legs keep their system name
    unless ``names`` renames them. The contraction is done in one go, so the
    result does not depend on any ordering of the links.
    """
    parts = list(parts)
    links = list(links)
    names = dict(names or {})
    used: dict[Leg, Leg] = {}
    for src, dst in links:
        s = parts[src[0]].output(src[1])
        t = parts[dst[0]].input(dst[1])
        if s.dim != t.dim:
            raise DimensionError(f"cannot compose {src} (dim {s.dim}) into {dst} (dim {t.dim})")
        for leg in (src, dst):
            if leg in used:
                raise LabelError(f"leg {leg} used by more than one composition")
        used[src] = dst
        used[dst] = src

    free_in: list[tuple[Leg, SystemLabel]] = []
    free_out: list[tuple[Leg, SystemLabel]] = []
    for p, cpm in enumerate(parts):
        for s in cpm.inputs:
            if (p, s.name) not in used:
                free_in.append(((p, s.name), SystemLabel(names.get((p, s.name), s.name), s.dim)))
        for s in cpm.outputs:
            if (p, s.name) not in used:
                free_out.append(((p, s.name), SystemLabel(names.get((p, s.name), s.name), s.dim)))
    result_in = [s for _, s in free_in]
    result_out = [s for _, s in free_out]
    _check_distinct(result_in + result_out)

    counter = iter(range(10**9))
    ket_sym: dict[Leg, int] = {}
    for p, cpm in enumerate(parts):
        for s in cpm.systems:
            leg = (p, s.name)
            if leg in ket_sym:
                continue
            sym = next(counter)
            ket_sym[leg] = sym
            if leg in used:
                ket_sym[used[leg]] = sym

    if dense is None:
        dense = not all(c.has_purification() for c in parts)
    free_legs = [leg for leg, _ in free_in] + [leg for leg, _ in free_out]
    din = _prod(s.dim for s in result_in)
    dout = _prod(s.dim for s in result_out)

    if not dense:
        args = []
        env_syms = []
        env_dims = []
        for p, cpm in enumerate(parts):
            v = cpm.leg_tensor()
            e = next(counter)
            env_syms.append(e)
            env_dims.append(v.shape[-1])
            args += [v, [ket_sym[(p, s.name)] for s in cpm.systems] + [e]]
        out = [ket_sym[leg] for leg in free_legs] + env_syms
        t = np.asarray(einsum(*args, out))
        vec = t.reshape(din * dout, _prod(env_dims))
        return CPM(result_in, result_out, purification=_compress(vec))

    bra_sym = {}
    for leg, sym in ket_sym.items():
        if sym not in bra_sym:
            bra_sym[sym] = next(counter)
    args = []
    for p, cpm in enumerate(parts):
        kets = [ket_sym[(p, s.name)] for s in cpm.systems]
        bras = [bra_sym[k] for k in kets]
        if cpm.is_purified:
            v = cpm.leg_tensor()
            e = next(counter)
            args += [v, kets + [e], v.conj(), bras + [e]]
        else:
            c = cpm.choi_matrix.reshape(tuple(s.dim for s in cpm.systems) * 2)
            args += [c, kets + bras]
    out_k = [ket_sym[leg] for leg in free_legs]
    out = out_k + [bra_sym[k] for k in out_k]
    t = np.asarray(einsum(*args, out))
    d = din * dout
    return CPM(result_in, result_out, t.reshape(d, d))


def _compress(vec: np.ndarray) -> np.ndarray:
    """Reduce the number of purification columns when it exceeds the row count."""
    d, r = vec.shape
    if r <= max(d, 1) or d > MAX_DENSE_DIM:
        return vec
    c = vec @ vec.conj().T
    w, u = np.linalg.eigh((c + c.conj().T) / 2)
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    keep = w > 1e-14 * scale
    if not np.any(keep):
        return np.zeros((d, 1), dtype=complex)
    return u[:, keep] * np.sqrt(w[keep])


def loop_compose(cpm: CPM, out_sys: SystemRef, in_sys: SystemRef) -> CPM:
    """Feed output ``out_sys`` back into input ``in_sys`` (sum_ij <i| M(rho (x) |i><j|) |j>)."""
    o, i = cpm.output(out_sys), cpm.input(in_sys)
    if o.dim != i.dim:
        raise DimensionError(f"loop {o.name} -> {i.name}: dimensions {o.dim} and {i.dim} differ")
    return compose([cpm], [((0, o.name), (0, i.name))])


def cpm_tensor(a: CPM, b: CPM) -> CPM:
    return compose([a, b], [])


def sequential(second: CPM, first: CPM) -> CPM:
    """``second o first``, linking outputs of ``first`` to equally named inputs of ``second``."""
    links = []
    for s in first.outputs:
        for t in second.inputs:
            if t.name == s.name:
                links.append(((1, s.name), (0, t.name)))
    if not links:
        raise LabelError("no shared system names between the maps")
    return compose([second, first], links)


def marginal(cpm: CPM, keep_outputs: Iterable[SystemRef]) -> CPM:
    """Tr_{Out \\ keep} o M."""
    keep = {_name(k) for k in keep_outputs}
    for k in keep:
        cpm.output(k)
    outs = [s for s in cpm.outputs if s.name in keep]
    if cpm.has_purification():
        v = cpm.leg_tensor()
        n_in = len(cpm.inputs)
        order = list(range(n_in)) + [n_in + k for k, s in enumerate(cpm.outputs) if s.name in keep]
        order += [n_in + k for k, s in enumerate(cpm.outputs) if s.name not in keep] + [v.ndim - 1]
        rows = cpm.din * _prod(s.dim for s in outs)
        return CPM(cpm.inputs, outs, purification=v.transpose(order).reshape(rows, -1))
    red = partial_trace(cpm.choi, [s.name for s in cpm.outputs if s.name not in keep])
    return CPM(cpm.inputs, outs, red)
