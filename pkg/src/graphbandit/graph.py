"""Directed feedback graphs with self-loops and exact combinatorial oracles.

Arms are integers ``0 .. K-1``.  Playing arm ``i`` reveals the losses of every
arm in ``out_edges[i]``; every arm observes itself, so self-loops are always
present.  The oracles (independence numbers, maximum acyclic subgraph) are
exhaustive and therefore capped to small ``K``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

INDEPENDENCE_CAP = 20
MAS_CAP = 10


class GraphError(ValueError):
    """Invalid graph content (bad K, out-of-range index, missing self-loop)."""


class GraphParseError(GraphError):
    def __init__(self, lineno: int, line: str, reason: str = "expected 'u v'"):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class CapacityError(RuntimeError):
    """Raised when an exhaustive oracle is asked about a graph that is too large."""


@dataclass(frozen=True)
class FeedbackGraph:
    """Directed graph on ``num_arms`` arms.

    ``out_edges[i]`` is the sorted tuple of arms whose loss is revealed when
    ``i`` is played.  Build instances with :meth:`from_edges` rather than the
    raw constructor so that self-loops are normalised.
    """

    num_arms: int
    out_edges: tuple[tuple[int, ...], ...]
    in_edges: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    adjacency: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        K = self.num_arms
        if K < 1 or len(self.out_edges) != K:
            raise GraphError(f"need {K} out-neighbourhoods, got {len(self.out_edges)}")
        adj = np.zeros((K, K), dtype=bool)
        for i, nbrs in enumerate(self.out_edges):
            for j in nbrs:
                if not 0 <= j < K:
                    raise GraphError(f"edge {i}->{j} out of range for K={K}")
                adj[i, j] = True
        if not adj.diagonal().all():
            missing = np.flatnonzero(~adj.diagonal()).tolist()
            raise GraphError(f"missing self-loops on arms {missing}")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(
            self, "in_edges", tuple(tuple(np.flatnonzero(adj[:, i]).tolist()) for i in range(K))
        )

    @classmethod
    def from_edges(
        cls, num_arms: int, edges: Iterable[Sequence[int]], strict: bool = False
    ) -> "FeedbackGraph":
        """Build a graph from ``(u, v)`` pairs.

        Self-loops are added unless ``strict`` is set, in which case a missing
        self-loop is an error.
        """
        if num_arms < 2:
            raise GraphError(f"K must be >= 2, got {num_arms}")
        out = [set() for _ in range(num_arms)]
        for u, v in edges:
            if not (0 <= u < num_arms and 0 <= v < num_arms):
                raise GraphError(f"edge {u}->{v} out of range for K={num_arms}")
            out[u].add(v)
        if not strict:
            for i in range(num_arms):
                out[i].add(i)
        return cls(num_arms, tuple(tuple(sorted(s)) for s in out))

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> "FeedbackGraph":
        adj = np.asarray(adj, dtype=bool)
        us, vs = np.nonzero(adj)
        return cls.from_edges(adj.shape[0], zip(us.tolist(), vs.tolist()))

    @property
    def K(self) -> int:
        return self.num_arms

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, nbrs in enumerate(self.out_edges) for j in nbrs]

    def is_undirected(self) -> bool:
        return bool((self.adjacency == self.adjacency.T).all())

    def to_dict(self) -> dict:
        return {"K": self.num_arms, "edges": [list(e) for e in self.edges()]}

    def to_edge_list(self) -> str:
        lines = [str(self.num_arms)] + [f"{u} {v}" for u, v in self.edges()]
        return "\n".join(lines) + "\n"


def _parse_edge_list(lines: Sequence[str], strict: bool) -> FeedbackGraph:
    rows = [(n, ln.strip()) for n, ln in enumerate(lines, start=1)]
    rows = [(n, ln) for n, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise GraphParseError(1, "", "empty graph file")
    n0, head = rows[0]
    try:
        K = int(head)
    except ValueError:
        raise GraphParseError(n0, head, "first line must be the number of arms") from None
    if K < 2:
        raise GraphError(f"K must be >= 2, got {K}")
    edges = []
    for n, ln in rows[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphParseError(n, ln)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(n, ln) from None
        if not (0 <= u < K and 0 <= v < K):
            raise GraphError(f"line {n}: edge {u}->{v} out of range for K={K}")
        edges.append((u, v))
    return FeedbackGraph.from_edges(K, edges, strict=strict)


def graph_from_dict(obj: dict, strict: bool = False) -> FeedbackGraph:
    try:
        K = int(obj["K"])
        edges = [(int(u), int(v)) for u, v in obj.get("edges", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"bad graph object: {exc}") from None
    return FeedbackGraph.from_edges(K, edges, strict=strict)


def load_graph(source: str | TextIO, strict: bool = False) -> FeedbackGraph:
    """Parse a graph from an edge-list or JSON text (or open text stream).

    The edge-list format is ``K`` on the first line followed by ``u v`` lines.
    JSON input is ``{"K": int, "edges": [[u, v], ...]}``.
    """
    text = source if isinstance(source, str) else source.read()
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphParseError(exc.lineno, text.splitlines()[exc.lineno - 1], exc.msg) from None
        return graph_from_dict(obj, strict=strict)
    return _parse_edge_list(text.splitlines(), strict)


def read_graph(path, strict: bool = False) -> FeedbackGraph:
    with open(path) as fh:
        return load_graph(fh, strict=strict)


def strong_subgraph(g: FeedbackGraph) -> FeedbackGraph:
    """Keep an edge ``i -> j`` only when ``j -> i`` is also present."""
    return FeedbackGraph.from_adjacency(g.adjacency & g.adjacency.T)


def _conflict_masks(adj: np.ndarray) -> list[int]:
    # bitmask of the arms each arm conflicts with, self excluded
    K = adj.shape[0]
    masks = []
    for i in range(K):
        row = adj[i].copy()
        row[i] = False
        masks.append(sum(1 << j for j in np.flatnonzero(row).tolist()))
    return masks


def _max_independent(masks: list[int]) -> tuple[int, int]:
    """Branch and bound over bitmasks; returns (size, members bitmask)."""
    K = len(masks)
    best = [0, 0]

    def expand(chosen: int, size: int, candidates: int):
        if candidates == 0:
            if size > best[0]:
                best[0], best[1] = size, chosen
            return
        if size + bin(candidates).count("1") <= best[0]:
            return
        v = (candidates & -candidates).bit_length() - 1
        rest = candidates & ~(1 << v)
        expand(chosen | (1 << v), size + 1, rest & ~masks[v])
        expand(chosen, size, rest)

    expand(0, 0, (1 << K) - 1)
    return best[0], best[1]


def _check_cap(g: FeedbackGraph, cap: int, what: str):
    if g.num_arms > cap:
        raise CapacityError(
            f"{what} is exhaustive and capped at K={cap} (got K={g.num_arms}); "
            "supply the value manually (e.g. alpha_tilde / lambda in the learner config)"
        )


def independence_number(
    g: FeedbackGraph, ignore_directions: bool = True, cap: int = INDEPENDENCE_CAP
) -> int:
    """Exact independence number.

    With ``ignore_directions`` an edge in either direction makes two arms
    dependent (the usual ``alpha``).  Without it only mutual edges count,
    which gives the strong independence number.
    """
    _check_cap(g, cap, "independence_number")
    adj = g.adjacency
    conflict = (adj | adj.T) if ignore_directions else (adj & adj.T)
    return _max_independent(_conflict_masks(conflict))[0]


def strong_independence_number(g: FeedbackGraph, cap: int = INDEPENDENCE_CAP) -> int:
    return independence_number(strong_subgraph(g), ignore_directions=True, cap=cap)


def maximum_independent_set(g: FeedbackGraph, strong: bool = False, cap: int = INDEPENDENCE_CAP) -> list[int]:
    _check_cap(g, cap, "maximum_independent_set")
    adj = g.adjacency
    conflict = (adj & adj.T) if strong else (adj | adj.T)
    _, members = _max_independent(_conflict_masks(conflict))
    return [i for i in range(g.num_arms) if members >> i & 1]


def is_acyclic(adj: np.ndarray, nodes: Sequence[int]) -> bool:
    """Kahn's algorithm on the subgraph induced by ``nodes``; self-loops ignored."""
    nodes = list(nodes)
    sub = adj[np.ix_(nodes, nodes)].copy()
    np.fill_diagonal(sub, False)
    indeg = sub.sum(axis=0)
    ready = [k for k in range(len(nodes)) if indeg[k] == 0]
    seen = 0
    while ready:
        k = ready.pop()
        seen += 1
        for m in np.flatnonzero(sub[k]):
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return seen == len(nodes)


def mas(g: FeedbackGraph, cap: int = MAS_CAP) -> int:
    """Size of the largest vertex subset inducing an acyclic subgraph."""
    _check_cap(g, cap, "mas")
    K = g.num_arms
    for size in range(K, 0, -1):
        for nodes in itertools.combinations(range(K), size):
            if is_acyclic(g.adjacency, nodes):
                return size
    return 0


def is_dominating(g: FeedbackGraph, s: Iterable[int]) -> bool:
    s = list(s)
    if not s:
        return False
    return bool(g.adjacency[s].any(axis=0).all())


def is_strongly_independent(g: FeedbackGraph, s: Iterable[int]) -> bool:
    """No two distinct members of ``s`` are joined in both directions."""
    s = list(s)
    mutual = g.adjacency & g.adjacency.T
    return not any(mutual[i, j] for i, j in itertools.combinations(s, 2))


@dataclass(frozen=True)
class GraphStats:
    alpha: int
    alpha_strong: int
    mas: int | None
    is_undirected: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "alpha_strong": self.alpha_strong,
            "mas": self.mas,
            "is_undirected": self.is_undirected,
        }


def graph_stats(g: FeedbackGraph) -> GraphStats:
    return GraphStats(
        alpha=independence_number(g),
        alpha_strong=strong_independence_number(g),
        mas=mas(g) if g.num_arms <= MAS_CAP else None,
        is_undirected=g.is_undirected(),
    )
