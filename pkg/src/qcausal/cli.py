"""Command-line front end: ``qcausal <command> ...``.

Exit codes: 0 success, 1 domain failure (invalid object, failed check,
precondition violation), 2 unreadable or malformed input and usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import ImplementationFalsified, extract_process, theorem1_audit, theorem2_audit
from .dot import network_to_dot, regions_to_dot, sig_to_dot
from .embedding import Embedding, check_fine_embedding, compatible, relativistic_causality
from .finegraining import FineGrainingWitness
from .linalg import DEFAULT_TOL, trace_out_outputs
from .network import QuantumNetwork, validate
from .process import ProcessError, ProcessMatrix, process_to_map, validate_process
from .signalling import NotTracePreservingError, network_signalling_structure, node_label, signalling_structure
from .spacetime import Spacetime, SpacetimeError, is_acyclic, region_causal_structure, validate_spacetime

OK, FAIL, BAD_INPUT = 0, 1, 2


def _err(msg: str):
    print(msg, file=sys.stderr)


def _sig_of(obj, k, tol):
    if isinstance(obj, ProcessMatrix):
        return signalling_structure(process_to_map(obj), k, tol)
    if isinstance(obj, QuantumNetwork):
        return network_signalling_structure(obj, k, tol)
    raise io.DocumentError("expected a network or process document")


def _write(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise io.DocumentError(f"cannot write {path}: {exc}") from None


def _validate_obj(obj, args) -> list[str]:
    if isinstance(obj, QuantumNetwork):
        return validate(obj)
    if isinstance(obj, Spacetime):
        return validate_spacetime(obj)
    if isinstance(obj, ProcessMatrix):
        rep = validate_process(obj, args.samples, args.seed, args.tol)
        return rep.problems
    if isinstance(obj, Embedding):
        return [] if obj.spacetime is None else validate_spacetime(obj.spacetime)
    if isinstance(obj, FineGrainingWitness):
        dev = float(np.max(np.abs(trace_out_outputs(obj.enc) - np.eye(obj.enc.din)), initial=0.0))
        return [] if dev <= max(args.tol, 1e-9) else [f"Enc is not trace preserving (deviation {dev:.3g})"]
    if isinstance(obj, io.RealisationBundle):
        r = obj.realisation
        probs = [f"network: {p}" for p in validate(r.network)]
        probs += [f"fine network: {p}" for p in validate(r.fine_net)]
        probs += [f"spacetime: {p}" for p in validate_spacetime(r.spacetime)]
        probs += check_fine_embedding(r)
        return probs
    return [f"nothing to validate for {type(obj).__name__}"]


def cmd_validate(args) -> int:
    obj = io.load(args.path)
    problems = _validate_obj(obj, args)
    for p in problems:
        _err(p)
    if not problems:
        print(f"{args.path}: valid")
    return FAIL if problems else OK


def cmd_signalling(args) -> int:
    obj = io.load(args.path)
    try:
        sig = _sig_of(obj, args.max_set_size, args.tol)
    except NotTracePreservingError as exc:
        _err(str(exc))
        return FAIL
    for line in _edge_lines(sig):
        print(line)
    if args.dot:
        _write(args.dot, sig_to_dot(sig))
    return OK


def _edge_lines(sig):
    return [f"{node_label(a)} -> {node_label(b)}" for a, b in sig.sorted_edges()]


def cmd_compat(args) -> int:
    obj = io.load(args.source)
    emb = io.load(args.embedding, "embedding")
    if emb.spacetime is None:
        raise io.DocumentError("embedding document must carry its spacetime")
    try:
        sig = _sig_of(obj, args.max_set_size, args.tol)
    except NotTracePreservingError as exc:
        _err(str(exc))
        return FAIL
    g = region_causal_structure(emb.spacetime, emb.image())
    rep = compatible(sig, emb, g)
    for line in rep.describe():
        _err(line)
    print(f"compatible: {'yes' if rep.ok else 'no'} ({rep.checked} edges checked, {len(rep.violations)} violations)")
    return OK if rep.ok else FAIL


def cmd_refine(args) -> int:
    bundle = io.load(args.path, "realisation")
    r = bundle.realisation
    try:
        g = r.refined_structure()
    except SpacetimeError as exc:
        _err(f"refinement failed: {exc}")
        return FAIL
    print(f"refined regions: {len(g.regions)}, edges: {len(g.edges)}, acyclic: {'yes' if is_acyclic(g) else 'no'}")
    for i, j in sorted(g.edges):
        print(f"{g.regions[i].label} -> {g.regions[j].label}")
    if args.dot:
        _write(args.dot, regions_to_dot(g))
    rep = relativistic_causality(r, args.max_set_size, args.tol)
    for line in rep.describe():
        _err(line)
    print(f"relativistic causality: {'yes' if rep.ok else 'no'}")
    return OK if rep.ok else FAIL


def cmd_audit(args) -> int:
    bundle = io.load(args.path, "realisation")
    r = bundle.realisation
    if args.theorem == 1:
        w = bundle.process
        if w is None:
            try:
                w = extract_process(r.network)
            except ProcessError as exc:
                _err(f"precondition: {exc}")
                return FAIL
        try:
            v = theorem1_audit(r, w, max_set_size=args.max_set_size, tol=args.tol)
        except ImplementationFalsified as exc:
            _err(str(exc))
            return FAIL
    else:
        if bundle.witnesses is None:
            _err("precondition: the realisation carries no fine-graining witnesses")
            return FAIL
        v = theorem2_audit(bundle.source or r, bundle.witnesses, subs=bundle.subnetworks, tol=args.tol)
    print(v.summary())
    if args.json:
        _write(args.json, json.dumps(v.to_dict(), indent=2, sort_keys=True) + "\n")
    return OK if v.consistent else FAIL


def cmd_demo(args) -> int:
    from .battery import run_battery
    from .process import quantum_switch
    print(f"Tr W_QS = {quantum_switch(args.d).trace:.10g}")
    checks = run_battery(args.d, args.seed, report=lambda c: print(c.line(), flush=True))
    ok = all(c.ok for c in checks)
    print("all checks pass" if ok else "some checks FAILED")
    return OK if ok else FAIL


def cmd_export_dot(args) -> int:
    obj = io.load(args.path)
    what = args.what
    if what == "auto":
        what = {QuantumNetwork: "network", ProcessMatrix: "signalling"}.get(type(obj), "regions")
    if what == "network" and isinstance(obj, QuantumNetwork):
        text = network_to_dot(obj)
    elif what == "signalling" and isinstance(obj, (QuantumNetwork, ProcessMatrix)):
        try:
            text = sig_to_dot(_sig_of(obj, args.max_set_size, args.tol))
        except NotTracePreservingError as exc:
            _err(str(exc))
            return FAIL
    elif what == "regions" and isinstance(obj, io.RealisationBundle):
        text = regions_to_dot(obj.realisation.refined_structure())
    elif what == "regions" and isinstance(obj, Embedding) and obj.spacetime is not None:
        text = regions_to_dot(region_causal_structure(obj.spacetime, obj.image()))
    else:
        _err(f"cannot export {what} from a {type(obj).__name__}")
        return FAIL
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return OK


def _d_arg(text: str) -> int:
    try:
        d = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if d < 2:
        raise argparse.ArgumentTypeError("the switch needs d >= 2")
    return d


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="numerical tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p = argparse.ArgumentParser(prog="qcausal", description="Quantum networks, signalling and spacetime audits.",
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="validate a network, spacetime, process, ... document")
    s.add_argument("path")
    s.add_argument("--samples", type=int, default=100, help="random instruments for process validation")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("signalling", parents=[common], help="signalling structure of a network or process")
    s.add_argument("path")
    s.add_argument("--max-set-size", type=int, default=1)
    s.add_argument("--dot", help="also write the graph as DOT")
    s.set_defaults(func=cmd_signalling)

    s = sub.add_parser("compat", parents=[common], help="check compatibility with an embedding")
    s.add_argument("source", help="network or process document")
    s.add_argument("embedding", help="embedding document with its spacetime")
    s.add_argument("--max-set-size", type=int, default=1)
    s.set_defaults(func=cmd_compat)

    s = sub.add_parser("refine", parents=[common], help="refined region structure and relativistic causality")
    s.add_argument("path")
    s.add_argument("--max-set-size", type=int, default=1)
    s.add_argument("--dot")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("audit", parents=[common], help="audit a realisation against Theorem 1 or 2")
    s.add_argument("path")
    s.add_argument("--theorem", type=int, choices=(1, 2), required=True)
    s.add_argument("--max-set-size", type=int, default=1)
    s.add_argument("--json", help="write the machine-readable verdict here")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("demo-qswitch", parents=[common], help="build the switch and run the acceptance battery")
    s.add_argument("--d", type=_d_arg, default=2)
    s.set_defaults(func=cmd_demo)

    s = sub.add_parser("export-dot", parents=[common], help="write DOT for a network, signalling graph or regions")
    s.add_argument("path")
    s.add_argument("--what", choices=("auto", "network", "signalling", "regions"), default="auto")
    s.add_argument("--max-set-size", type=int, default=1)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except io.DocumentError as exc:
        _err(f"error: {exc}")
        return BAD_INPUT
    except (ValueError, SpacetimeError) as exc:
        _err(f"error: {exc}")
        return FAIL


if __name__ == "__main__":
    sys.exit(main())
