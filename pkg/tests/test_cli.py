import json

import pydot
import pytest

from qcausal import io
from qcausal.analysis import chain_embedding
from qcausal.cli import main
from qcausal.network import Composition, QuantumNetwork, chain_network

DATA = io.data_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", DATA("qswitch.json"), "--samples", 10)
    assert code == 0 and "valid" in out
    assert run(capsys, "validate", DATA("chain.json"))[0] == 0


def test_validate_reused_endpoint(tmp_path, capsys):
    net = chain_network([2, 2, 2])
    m = net.maps["m0"]
    bad = QuantumNetwork({"m0": m, "m1": net.maps["m1"], "m2": m},
                         [Composition("m0", "S1", "m1", "S1"), Composition("m2", "S1", "m1", "S1")])
    path = tmp_path / "bad.json"
    io.save(bad, path)
    code, _, err = run(capsys, "validate", path)
    assert code == 1 and "m1.S1" in err


def test_bad_input_exit_2(tmp_path, capsys):
    path = tmp_path / "junk.json"
    path.write_text("{", encoding="utf-8")
    assert run(capsys, "validate", path)[0] == 2
    assert run(capsys, "validate", tmp_path / "missing.json")[0] == 2
    assert run(capsys, "compat", DATA("chain.json"), DATA("chain.json"))[0] == 2


def test_signalling_switch(tmp_path, capsys):
    dot = tmp_path / "sig.dot"
    code, out, _ = run(capsys, "signalling", DATA("qswitch.json"), "--dot", dot)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 7
    assert "{A^O} -> {B^I}" in lines and "{B^O} -> {A^I}" in lines
    assert len(pydot.graph_from_dot_data(dot.read_text())[0].get_edges()) == 7


def test_compat(tmp_path, capsys):
    assert run(capsys, "compat", DATA("chain.json"), DATA("chain_embedding.json"))[0] == 0
    emb, _ = chain_embedding(["S0", "S1", "S2", "S3"], {"S0": 3, "S1": 2, "S2": 1, "S3": 0})
    path = tmp_path / "rev.json"
    io.save(emb, path)
    code, out, err = run(capsys, "compat", DATA("chain.json"), path)
    assert code == 1 and "compatible: no" in out and "no matching path" in err


def test_refine(capsys):
    code, out, _ = run(capsys, "refine", DATA("qswitch_realisation.json"))
    assert code == 0 and "acyclic: yes" in out and "relativistic causality: yes" in out


def test_audit_theorem1_localized(tmp_path, capsys):
    js = tmp_path / "v.json"
    code, out, _ = run(capsys, "audit", DATA("qswitch_localized.json"), "--theorem", 1, "--json", js)
    assert code == 0
    assert "forced cycle: A -> B" in out
    assert json.loads(js.read_text())["cycle_certificate"] == ["A", "B"]


def test_audit_theorem2(capsys):
    code, out, _ = run(capsys, "audit", DATA("qswitch_realisation.json"), "--theorem", 2)
    assert code == 0
    assert "640/640 sub-networks pass" in out
    assert "C < A1 < B1 < A2 < B2 < D" in out


def test_demo_rejects_d1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["demo-qswitch", "--d", "1"])
    assert exc.value.code == 2


def test_export_dot(tmp_path, capsys):
    code, out, _ = run(capsys, "export-dot", DATA("chain.json"))
    assert code == 0 and out.startswith('digraph "network"')
    out_path = tmp_path / "r.dot"
    assert run(capsys, "export-dot", DATA("chain_embedding.json"), "-o", out_path)[0] == 0
    assert pydot.graph_from_dot_data(out_path.read_text())
    assert run(capsys, "export-dot", DATA("chain.json"), "--what", "regions")[0] == 1
