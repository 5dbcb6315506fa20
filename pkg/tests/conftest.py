import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import strategies as st

from graphbandit.graph import FeedbackGraph


def brute_independence(adj, mutual_only=False):
    """Largest vertex set with no (mutual, if asked) edge inside, by plain enumeration."""
    K = adj.shape[0]
    conflict = (adj & adj.T) if mutual_only else (adj | adj.T)
    for size in range(K, 0, -1):
        for s in itertools.combinations(range(K), size):
            if not any(conflict[i, j] for i, j in itertools.combinations(s, 2)):
                return size
    return 0


def brute_mas(adj):
    """Largest vertex set inducing a DAG, checked with networkx."""
    K = adj.shape[0]
    for size in range(K, 0, -1):
        for s in itertools.combinations(range(K), size):
            d = nx.DiGraph()
            d.add_nodes_from(s)
            d.add_edges_from((i, j) for i in s for j in s if i != j and adj[i, j])
            if nx.is_directed_acyclic_graph(d):
                return size
    return 0


@st.composite
def graphs(draw, min_arms=2, max_arms=8, undirected=None):
    K = draw(st.integers(min_arms, max_arms))
    bits = draw(st.lists(st.booleans(), min_size=K * K, max_size=K * K))
    adj = np.array(bits, dtype=bool).reshape(K, K)
    if undirected is None:
        undirected = draw(st.booleans())
    if undirected:
        adj = np.triu(adj, 1)
        adj = adj | adj.T
    return FeedbackGraph.from_adjacency(adj)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
