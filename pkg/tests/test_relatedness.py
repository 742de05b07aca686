from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from builders import make_graph, random_citation_graph
from topicgran.relatedness import (
    RelatednessNetwork,
    build_relatedness,
    count_cocitation_relations,
    count_coupling_relations,
    write_relatedness,
)


def weights(net):
    return {(a, b): w for a, b, w in net.weighted_edges()}


def test_two_references_split_evenly():
    net = build_relatedness(make_graph([("i", "j"), ("i", "k")]))
    assert weights(net) == {("i", "j"): 0.5, ("i", "k"): 0.5}


def test_mutual_citation_adds_up():
    # i cites j and k; j cites only i
    net = build_relatedness(make_graph([("i", "j"), ("i", "k"), ("j", "i")]))
    w = weights(net)
    assert w[("i", "j")] == 1.5
    assert w[("i", "k")] == 0.5
    g = make_graph([("i", "j"), ("i", "k"), ("j", "i"), ("j", "x"), ("j", "y"), ("j", "z")])
    assert weights(build_relatedness(g))[("i", "j")] == pytest.approx(0.75, abs=1e-15)


def test_no_self_pairs_and_isolated_nodes_kept():
    g = make_graph([("a", "b")], pubs=["c"])
    net = build_relatedness(g)
    assert net.nodes == ("a", "b", "c")
    assert net.n_edges == 1
    assert np.all(net.source < net.target)


@pytest.mark.parametrize("seed", range(3))
def test_outgoing_weight_sums_to_one(seed):
    rng = random.Random(seed)
    g = random_citation_graph(rng, 30, 0.1)
    net = build_relatedness(g)
    # recompute directed weights independently and check each citing node distributes exactly 1
    directed = {}
    for a in g.publications:
        refs = g.out_refs(a)
        for b in refs:
            directed[a, b] = 1.0 / len(refs)
    for a in g.publications:
        if g.out_refs(a):
            assert sum(w for (x, _), w in directed.items() if x == a) == pytest.approx(1.0, abs=1e-12)
    w = weights(net)
    for a, b in itertools.combinations(sorted(g.publications), 2):
        expected = directed.get((a, b), 0.0) + directed.get((b, a), 0.0)
        assert w.get((a, b), 0.0) == pytest.approx(expected, abs=1e-15)
    assert sum(w.values()) == pytest.approx(sum(1 for p in g.publications if g.out_refs(p)), abs=1e-9)


def test_scaled_and_from_edges():
    net = RelatednessNetwork.from_edges(["b", "a", "c"], [("a", "b", 1.0), ("b", "a", 2.0), ("c", "a", 0.5)])
    assert weights(net) == {("a", "b"): 3.0, ("a", "c"): 0.5}
    assert weights(net.scaled(10)) == {("a", "b"): 30.0, ("a", "c"): 5.0}
    with pytest.raises(ValueError):
        RelatednessNetwork.from_edges(["a"], [("a", "a", 1.0)])


def test_coupling_count_from_in_degrees():
    # x cited by 3 publications, y by 2: 3 + 1 coupling relations
    g = make_graph([("a", "x"), ("b", "x"), ("c", "x"), ("a", "y"), ("b", "y")])
    assert count_coupling_relations(g) == 4


@pytest.mark.parametrize("seed", range(4))
def test_relation_counts_match_pair_enumeration(seed):
    g = random_citation_graph(random.Random(seed), 25, 0.15)
    pubs = sorted(g.publications)
    coupling = sum(len(g.out_refs(a) & g.out_refs(b)) for a, b in itertools.combinations(pubs, 2))
    cocitation = sum(len(g.in_cites(a) & g.in_cites(b)) for a, b in itertools.combinations(pubs, 2))
    assert count_coupling_relations(g) == coupling
    assert count_cocitation_relations(g) == cocitation


def test_write_relatedness(tmp_path):
    net = build_relatedness(make_graph([("a", "b"), ("a", "c"), ("a", "d")]))
    write_relatedness(net, tmp_path / "r.tsv")
    lines = (tmp_path / "r.tsv").read_text().splitlines()
    assert lines[0] == "pub_id_a\tpub_id_b\tweight"
    assert lines[1] == "a\tb\t0.333333"
    assert len(lines) == 4
