"""JSON documents for networks, spacetimes, embeddings, processes, realisations and witnesses.

Every file is ``{"kind": ..., "version": 1, "payload": ...}``. Complex arrays are
row-major nested lists with each entry an ``[re, im]`` pair. A payload may
instead name a built-in construction, e.g. ``{"builtin": "qswitch", "d": 2}``,
which keeps the large switch operators out of the files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .embedding import Embedding, Realisation
from .finegraining import FineGrainingWitness, SystemsFineGraining
from .linalg import CPM, LabeledOperator, SystemLabel
from .network import Composition, QuantumNetwork, SubNetwork
from .process import Party, ProcessMatrix, quantum_switch
from .spacetime import Partition, Region, Spacetime, chain, light_cone_order, minkowski_grid

VERSION = 1
KINDS = ("network", "spacetime", "embedding", "process", "realisation", "witness")


class DocumentError(ValueError):
    """Unreadable file, wrong kind/version, or a payload that does not match its schema."""


@dataclass
class Document:
    kind: str
    payload: Any
    version: int = VERSION


# ---------------------------------------------------------------------------
# primitives


def encode_array(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    pairs = np.stack([a.real, a.imag], axis=-1)
    return pairs.tolist()


def decode_array(x, ndim: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"not a complex array: {exc}") from None
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise DocumentError("complex entries must be [re, im] pairs")
    out = arr[..., 0] + 1j * arr[..., 1]
    if ndim is not None and out.ndim != ndim:
        raise DocumentError(f"expected a {ndim}-d array, got shape {out.shape}")
    return out


def _need(obj: Mapping, key: str, typ=None):
    if not isinstance(obj, Mapping) or key not in obj:
        raise DocumentError(f"missing field {key!r}")
    val = obj[key]
    if typ is not None and not isinstance(val, typ):
        raise DocumentError(f"field {key!r} should be {getattr(typ, '__name__', typ)}")
    return val


def encode_label(s: SystemLabel) -> dict:
    return {"name": s.name, "dim": s.dim}


def decode_label(x) -> SystemLabel:
    name, dim = _need(x, "name", str), _need(x, "dim", int)
    try:
        return SystemLabel(name, dim)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None


def _point(p):
    return tuple(p) if isinstance(p, list) else p


def _json_point(p):
    return list(p) if isinstance(p, tuple) else p


def encode_cpm(m: CPM) -> dict:
    out = {"inputs": [encode_label(s) for s in m.inputs], "outputs": [encode_label(s) for s in m.outputs]}
    if m.is_purified:
        out["purification"] = encode_array(m.purification)
    else:
        out["choi"] = encode_array(m.choi_matrix)
    return out


def decode_cpm(x) -> CPM:
    ins = [decode_label(s) for s in _need(x, "inputs", list)]
    outs = [decode_label(s) for s in _need(x, "outputs", list)]
    try:
        if "purification" in x:
            return CPM(ins, outs, purification=decode_array(x["purification"], 2))
        return CPM(ins, outs, decode_array(_need(x, "choi"), 2))
    except ValueError as exc:
        raise DocumentError(f"bad CPM: {exc}") from None


def encode_region(r: Region) -> dict:
    return {"points": [_json_point(p) for p in sorted(r.points, key=repr)], "name": r.name}


def decode_region(x) -> Region:
    pts = [_point(p) for p in _need(x, "points", list)]
    try:
        return Region(pts, x.get("name", ""))
    except ValueError as exc:
        raise DocumentError(str(exc)) from None


# ---------------------------------------------------------------------------
# kinds


def encode_network(net: QuantumNetwork) -> dict:
    return {
        "maps": {mid: encode_cpm(m) for mid, m in sorted(net.maps.items())},
        "comps": [[c.src_map, c.src_sys, c.dst_map, c.dst_sys] for c in sorted(net.comps)],
    }


def decode_network(x) -> QuantumNetwork:
    if "builtin" in x:
        return _builtin(x, "network")
    maps = {mid: decode_cpm(m) for mid, m in _need(x, "maps", dict).items()}
    comps = []
    for c in _need(x, "comps", list):
        if not (isinstance(c, list) and len(c) == 4 and all(isinstance(v, str) for v in c)):
            raise DocumentError(f"composition {c!r} must be [src_map, src_sys, dst_map, dst_sys]")
        comps.append(Composition(*c))
    try:
        return QuantumNetwork(maps, comps)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None


def encode_spacetime(st: Spacetime) -> dict:
    return {"points": [_json_point(p) for p in sorted(st.points, key=repr)],
            "order": sorted([[_json_point(p), _json_point(q)] for p, q in st.order], key=repr)}


def decode_spacetime(x) -> Spacetime:
    if "builtin" in x:
        name = x["builtin"]
        if name == "chain":
            return chain(_need(x, "n", int))
        if name == "minkowski_grid":
            xs, ts = _need(x, "xs", list), _need(x, "ts", list)
            return minkowski_grid(range(*xs), range(*ts))
        if name == "light_cone":
            return light_cone_order([_point(p) for p in _need(x, "points", list)])
        raise DocumentError(f"unknown built-in spacetime {name!r}")
    pts = [_point(p) for p in _need(x, "points", list)]
    order = [(_point(p), _point(q)) for p, q in _need(x, "order", list)]
    return Spacetime(pts, order)


def encode_embedding(e: Embedding) -> dict:
    return {"assign": {s: encode_region(r) for s, r in e.assign.items()},
            "spacetime": None if e.spacetime is None else encode_spacetime(e.spacetime)}


def decode_embedding(x, st: Spacetime | None = None) -> Embedding:
    assign = {s: decode_region(r) for s, r in _need(x, "assign", dict).items()}
    if x.get("spacetime") is not None:
        st = decode_spacetime(x["spacetime"])
    try:
        return Embedding(assign, st)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None


def encode_process(w: ProcessMatrix) -> dict:
    return {
        "parties": [{"name": p.name, "input": encode_label(p.input), "output": encode_label(p.output)}
                    for p in w.parties],
        "systems": [encode_label(s) for s in w.w.systems],
        "w": encode_array(w.w.data[:, 0] if w.is_pure else w.w.data),
    }


def decode_process(x) -> ProcessMatrix:
    if "builtin" in x:
        return _builtin(x, "process")
    parties = [Party(_need(p, "name", str), decode_label(_need(p, "input")), decode_label(_need(p, "output")))
               for p in _need(x, "parties", list)]
    systems = [decode_label(s) for s in _need(x, "systems", list)]
    data = decode_array(_need(x, "w"))
    try:
        return ProcessMatrix(parties, LabeledOperator(systems, data))
    except ValueError as exc:
        raise DocumentError(str(exc)) from None


def encode_sub(sub: SubNetwork) -> dict:
    return {"maps": sorted(sub.maps),
            "comps": [[c.src_map, c.src_sys, c.dst_map, c.dst_sys] for c in sorted(sub.comps)]}


def decode_sub(x) -> SubNetwork:
    return SubNetwork(frozenset(_need(x, "maps", list)), frozenset(Composition(*c) for c in _need(x, "comps", list)))


def encode_witness(w: FineGrainingWitness) -> dict:
    return {"enc": encode_cpm(w.enc), "dec": encode_cpm(w.dec)}


def decode_witness(x) -> FineGrainingWitness:
    return FineGrainingWitness(decode_cpm(_need(x, "enc")), decode_cpm(_need(x, "dec")))


@dataclass
class RealisationBundle:
    """A realisation plus what the audits need: the coarse process and fine-graining witnesses."""

    realisation: Realisation
    process: ProcessMatrix | None = None
    witnesses: Mapping | None = None
    subnetworks: list[SubNetwork] | None = None
    source: Any = None  # the switch bundle when built in


def encode_realisation(r: Realisation, process: ProcessMatrix | None = None,
                       witnesses: Mapping | None = None) -> dict:
    out = {
        "network": encode_network(r.network),
        "embedding": encode_embedding(r.embedding),
        "fine_network": encode_network(r.fine_net),
        "fine_map": {s: sorted(v) for s, v in r.fine_map.assign.items()},
        "partitions": [{"parent": encode_region(p), "parts": [encode_region(q) for q in part.parts]}
                       for p, part in sorted(r.partitions.items(), key=lambda kv: kv[0].sort_key())],
        "fine_embedding": encode_embedding(r.fine_embedding),
        "spacetime": encode_spacetime(r.spacetime),
    }
    if process is not None:
        out["process"] = encode_process(process)
    if witnesses is not None:
        out["witnesses"] = [{"sub": encode_sub(s), "sub_f": encode_sub(witnesses[s][0]),
                             "witness": encode_witness(witnesses[s][1])} for s in witnesses]
    return out


def decode_realisation(x) -> RealisationBundle:
    if "builtin" in x:
        return _builtin(x, "realisation")
    st = decode_spacetime(_need(x, "spacetime"))
    net = decode_network(_need(x, "network"))
    fine = decode_network(_need(x, "fine_network"))
    f = SystemsFineGraining({s: frozenset(v) for s, v in _need(x, "fine_map", dict).items()})
    parts = {}
    for item in x.get("partitions", []):
        parent = decode_region(_need(item, "parent"))
        try:
            parts[parent] = Partition(parent, [decode_region(q) for q in _need(item, "parts", list)])
        except ValueError as exc:
            raise DocumentError(str(exc)) from None
    r = Realisation(net, decode_embedding(_need(x, "embedding"), st), fine, f, parts,
                    decode_embedding(_need(x, "fine_embedding"), st), st)
    process = decode_process(x["process"]) if x.get("process") is not None else None
    witnesses = None
    subs = None
    wit = x.get("witnesses")
    if wit == "identity":
        from .analysis import identity_witnesses
        witnesses = identity_witnesses(net)
        subs = list(witnesses)
    elif isinstance(wit, list):
        witnesses = {decode_sub(w["sub"]): (decode_sub(w["sub_f"]), decode_witness(w["witness"])) for w in wit}
        subs = list(witnesses)
    elif wit is not None:
        raise DocumentError("witnesses must be a list or \"identity\"")
    return RealisationBundle(r, process, witnesses, subs)


# ---------------------------------------------------------------------------
# built-ins


def _builtin(x, kind: str):
    from .switch import fine_grained_switch, switch_realisation
    name = x["builtin"]
    d = x.get("d", 2)
    if not isinstance(d, int) or d < 2:
        raise DocumentError("built-in switch needs an integer d >= 2")
    if name != "qswitch":
        raise DocumentError(f"unknown built-in {kind} {name!r}")
    if kind == "process":
        return quantum_switch(d)
    b = fine_grained_switch(d, seed=x.get("seed", 0))
    if kind == "network":
        return b.fine_net if x.get("fine") else b.coarse_net
    layout = x.get("embedding", "systems")
    if layout not in ("systems", "per_party"):
        raise DocumentError(f"unknown switch embedding {layout!r}")
    r = b.realisation if layout == "systems" else switch_realisation(b.coarse_net, b.fine_net, d, per_party=True)
    return RealisationBundle(r, b.coarse_process, b.witnesses, b.subnetworks, b)


_DECODERS = {
    "network": decode_network,
    "spacetime": decode_spacetime,
    "embedding": decode_embedding,
    "process": decode_process,
    "realisation": decode_realisation,
    "witness": decode_witness,
}

_ENCODERS = {
    QuantumNetwork: ("network", encode_network),
    Spacetime: ("spacetime", encode_spacetime),
    Embedding: ("embedding", encode_embedding),
    ProcessMatrix: ("process", encode_process),
    Realisation: ("realisation", encode_realisation),
    FineGrainingWitness: ("witness", encode_witness),
}


def dumps(doc: Document) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps({"kind": doc.kind, "version": doc.version, "payload": doc.payload},
                      sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def parse(text: str) -> Document:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not JSON: {exc}") from None
    kind = _need(raw, "kind", str)
    if kind not in KINDS:
        raise DocumentError(f"unknown kind {kind!r}")
    version = _need(raw, "version", int)
    if version != VERSION:
        raise DocumentError(f"unsupported version {version}")
    payload = _need(raw, "payload", dict)
    return Document(kind, payload, version)


def read_document(path) -> Document:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from None
    return parse(text)


def decode(doc: Document):
    try:
        return _DECODERS[doc.kind](doc.payload)
    except DocumentError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DocumentError(f"bad {doc.kind} payload: {exc}") from None


def load(path, kind: str | None = None):
    """Read a file and build the object it describes."""
    doc = read_document(path)
    if kind is not None and doc.kind != kind:
        raise DocumentError(f"expected a {kind} document, got {doc.kind}")
    return decode(doc)


def to_document(obj, **extra) -> Document:
    if isinstance(obj, RealisationBundle):
        extra = {"process": obj.process, "witnesses": obj.witnesses, **extra}
        return Document("realisation", encode_realisation(obj.realisation, **extra))
    for cls, (kind, enc) in _ENCODERS.items():
        if isinstance(obj, cls):
            return Document(kind, enc(obj, **extra))
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def save(obj, path=None, **extra) -> str:
    text = dumps(to_document(obj, **extra))
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def data_path(name: str) -> Path:
    """Location of a bundled example file."""
    return Path(str(resources.files("qcausal") / "data" / name))


__all__ = [
    "VERSION", "KINDS", "DocumentError", "Document", "RealisationBundle", "encode_array", "decode_array",
    "dumps", "parse", "read_document", "decode", "load", "save", "to_document", "data_path",
]
