import pydot

from qcausal.dot import network_to_dot, quote, regions_to_dot, sig_to_dot
from qcausal.network import chain_network, network_systems
from qcausal.process import process_to_map, quantum_switch
from qcausal.signalling import signalling_structure
from qcausal.spacetime import Region, chain, region_causal_structure


def parse(text):
    graphs = pydot.graph_from_dot_data(text)
    assert graphs and len(graphs) == 1
    return graphs[0]


def test_quote_escapes():
    assert quote('a"b\\') == '"a\\"b\\\\"'


def test_signalling_dot_parses_and_is_stable():
    sig = signalling_structure(process_to_map(quantum_switch(2)), 2)
    text = sig_to_dot(sig)
    assert text == sig_to_dot(sig)
    g = parse(text)
    assert len(g.get_edges()) == len(sig)
    assert '"{A^O,C^O}"' in text


def test_region_and_network_dot():
    g = region_causal_structure(chain(3), [Region([0], "x"), Region([2], "y")])
    assert parse(regions_to_dot(g)).get_edges()[0].get_source() == '"x"'
    text = network_to_dot(chain_network([2, 2, 2]))
    edges = parse(text).get_edges()
    assert [(e.get_source(), e.get_destination()) for e in edges] == [('"m0"', '"m1"')]
    assert 'label="S1"' in text
