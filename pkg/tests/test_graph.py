import io
import json

import numpy as np
import pytest
from hypothesis import given, settings

from graphbandit.env import generate_graph
from graphbandit.graph import (
    CapacityError,
    FeedbackGraph,
    GraphError,
    GraphParseError,
    graph_stats,
    independence_number,
    is_dominating,
    is_strongly_independent,
    load_graph,
    mas,
    maximum_independent_set,
    strong_independence_number,
    strong_subgraph,
)

from conftest import brute_independence, brute_mas, graphs


def test_load_adds_self_loops():
    g = load_graph("3\n0 1\n1 2")
    assert g.num_arms == 3
    assert g.out_edges == ((0, 1), (1, 2), (2,))
    assert g.in_edges == ((0,), (0, 1), (1, 2))


def test_load_bandit_graph():
    g = load_graph("2\n")
    assert g.out_edges == ((0,), (1,))


def test_load_two_mutual_pairs():
    g = load_graph("4\n0 1\n1 0\n2 3\n3 2")
    assert g.out_edges == ((0, 1), (0, 1), (2, 3), (2, 3))
    assert g.is_undirected()


def test_load_from_stream_and_json():
    g = load_graph(io.StringIO("3\n0 1\n"))
    assert load_graph(json.dumps({"K": 3, "edges": [[0, 1]]})) == g


def test_parse_error_reports_line_number():
    with pytest.raises(GraphParseError) as err:
        load_graph("3\n0 1\n1 x\n")
    assert err.value.lineno == 3
    with pytest.raises(GraphParseError, match="line 2"):
        load_graph("3\n0 1 2\n")


def test_domain_errors():
    with pytest.raises(GraphError, match="K must be >= 2"):
        load_graph("1\n")
    with pytest.raises(GraphError, match="out of range"):
        load_graph("3\n0 3\n")


def test_strict_mode_rejects_missing_self_loops():
    with pytest.raises(GraphError, match="self-loops"):
        load_graph("2\n0 0\n0 1\n", strict=True)
    assert load_graph("2\n0 0\n1 1\n", strict=True).out_edges == ((0,), (1,))


def test_in_edges_consistent(rng):
    g = FeedbackGraph.from_adjacency(rng.random((7, 7)) < 0.4)
    for i in range(7):
        for j in range(7):
            assert (j in g.out_edges[i]) == (i in g.in_edges[j])


def test_strong_subgraph_examples():
    one_way = FeedbackGraph.from_edges(2, [(0, 1)])
    assert strong_subgraph(one_way).out_edges == ((0,), (1,))
    mutual = FeedbackGraph.from_edges(2, [(0, 1), (1, 0)])
    assert strong_subgraph(mutual).out_edges == ((0, 1), (0, 1))
    complete = generate_graph("complete", {"K": 4})
    assert strong_subgraph(complete) == complete


def test_independence_examples():
    assert independence_number(generate_graph("bandit", {"K": 5})) == 5
    assert independence_number(generate_graph("complete", {"K": 5})) == 1
    assert independence_number(generate_graph("cycle", {"K": 5})) == 2


def test_strong_independence_examples():
    tournament = FeedbackGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert strong_independence_number(tournament) == 3
    assert strong_independence_number(generate_graph("complete", {"K": 4})) == 1
    mixed = FeedbackGraph.from_edges(3, [(0, 1), (1, 0), (1, 2)])
    assert strong_independence_number(mixed) == 2
    assert maximum_independent_set(mixed, strong=True) == [0, 2]


def test_ignore_directions_flag():
    g = FeedbackGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert independence_number(g, ignore_directions=True) == 1
    assert independence_number(g, ignore_directions=False) == strong_independence_number(g)


def test_mas_examples():
    assert mas(generate_graph("bandit", {"K": 4})) == 4
    assert mas(FeedbackGraph.from_edges(2, [(0, 1), (1, 0)])) == 1
    assert mas(FeedbackGraph.from_edges(3, [(0, 1), (1, 2)])) == 3


def test_dominating_examples():
    g = generate_graph("bandit", {"K": 4})
    assert is_dominating(g, range(4))
    assert not is_dominating(g, [1, 2, 3])
    assert is_dominating(generate_graph("star", {"K": 6}), [0])
    assert not is_dominating(g, [])


def test_capacity_errors():
    big = generate_graph("bandit", {"K": 21})
    with pytest.raises(CapacityError, match="supply"):
        independence_number(big)
    with pytest.raises(CapacityError):
        mas(generate_graph("bandit", {"K": 11}))
    assert independence_number(generate_graph("bandit", {"K": 20})) == 20


def test_graph_stats():
    stats = graph_stats(generate_graph("cliques", {"m": 2, "s": 3}))
    assert stats.to_dict() == {"alpha": 2, "alpha_strong": 2, "mas": 2, "is_undirected": True}


@settings(max_examples=150, deadline=None)
@given(graphs(max_arms=8))
def test_oracles_match_brute_force(g):
    adj = g.adjacency
    a, a_s, m = independence_number(g), strong_independence_number(g), mas(g)
    assert a == brute_independence(adj)
    assert a_s == brute_independence(adj, mutual_only=True)
    assert m == brute_mas(adj)
    assert 1 <= a <= a_s <= g.num_arms
    assert m <= a_s


@settings(max_examples=80, deadline=None)
@given(graphs(max_arms=9, undirected=True))
def test_undirected_properties(g):
    assert independence_number(g) == strong_independence_number(g)
    assert strong_subgraph(g) == g
    assert strong_subgraph(strong_subgraph(g)) == strong_subgraph(g)


@settings(max_examples=80, deadline=None)
@given(graphs(max_arms=9))
def test_serialisation_round_trip(g):
    assert load_graph(g.to_edge_list()) == g
    assert load_graph(json.dumps(g.to_dict())) == g
    assert load_graph(g.to_edge_list(), strict=True) == g


@settings(max_examples=60, deadline=None)
@given(graphs(max_arms=8))
def test_maximum_sets_are_valid(g):
    s = maximum_independent_set(g, strong=True)
    assert len(s) == strong_independence_number(g)
    assert is_strongly_independent(g, s)


def test_graph_is_immutable():
    g = generate_graph("cycle", {"K": 4})
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = False
    assert np.array_equal(g.adjacency, g.adjacency.T)
