"""Exploration sets and exploration rates.

The exploration set is built greedily: visit arms by ascending estimated gap
(ties by arm index), keep the arm, and strike its whole out-neighbourhood from
the remaining list.  The result dominates the graph, is strongly independent,
and every arm is observed by a kept arm whose gap estimate is no larger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import FeedbackGraph


def gap_order(delta_hat: np.ndarray) -> np.ndarray:
    """Arms sorted by ascending gap, ties broken by arm index."""
    return np.argsort(delta_hat, axis=-1, kind="stable")


def build_exploration_set(g: FeedbackGraph, delta_hat) -> list[int]:
    remaining = [int(i) for i in gap_order(np.asarray(delta_hat, dtype=float))]
    chosen = []
    while remaining:
        i = remaining[0]
        chosen.append(i)
        covered = set(g.out_edges[i])
        remaining = [j for j in remaining if j not in covered]
    return chosen


def build_exploration_masks(adjacency: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Vectorised greedy construction for a batch of orders on one graph.

    ``order`` has shape ``(R, K)``; returns a boolean membership mask of the
    same shape.  Row ``r`` equals ``build_exploration_set`` on ``order[r]``.
    """
    R, K = order.shape
    rows = np.arange(R)
    removed = np.zeros((R, K), dtype=bool)
    member = np.zeros((R, K), dtype=bool)
    for pos in range(K):
        arm = order[:, pos]
        take = ~removed[rows, arm]
        member[rows, arm] = take
        removed |= take[:, None] & adjacency[arm]
    return member


def _common_rates(t: int, lam: float, num_arms: int) -> tuple[float, float]:
    if num_arms < 2:
        raise ValueError("need at least two arms (ln K must be positive)")
    cap = 1.0 / (2 * num_arms)
    adv = 0.5 * math.sqrt(lam * math.log(num_arms) / (t * num_arms**2))
    return cap, adv


def _gap_term(delta_hat: np.ndarray, t: int, beta: float) -> np.ndarray:
    # zero gap -> +inf so the other two terms bind
    with np.errstate(divide="ignore"):
        return np.where(delta_hat > 0, beta * math.log(t) / (t * np.square(delta_hat)), np.inf)


def exploration_rates(
    in_set: np.ndarray, delta_hat: np.ndarray, t: int, lam: float, beta: float, num_arms: int
) -> np.ndarray:
    """Per-arm exploration rate.

    ``min(1/(2K), sqrt(lam ln K / (t K^2)) / 2, xi)`` where ``xi`` is
    ``beta ln t / (t gap^2)`` for members of the exploration set and ``4/t^2``
    for everyone else.
    """
    cap, adv = _common_rates(t, lam, num_arms)
    xi = np.where(in_set, _gap_term(np.asarray(delta_hat, dtype=float), t, beta), 4.0 / t**2)
    return np.minimum(min(cap, adv), xi)


def observation_lower_bound(delta_hat: np.ndarray, t: int, lam: float, beta: float, num_arms: int) -> np.ndarray:
    """Guaranteed probability of observing each arm; the gap term applies to all arms."""
    cap, adv = _common_rates(t, lam, num_arms)
    return np.minimum(min(cap, adv), _gap_term(np.asarray(delta_hat, dtype=float), t, beta))


@dataclass(frozen=True)
class ExplorationPlan:
    in_set: np.ndarray  # (R, K) membership of the exploration set
    epsilon: np.ndarray
    o_lower: np.ndarray
    lam: float
    beta: float
    t: int
    sorted_order: np.ndarray

    def exploration_set(self, run: int = 0) -> list[int]:
        """Members of run ``run``'s set, in the order they were picked."""
        return [int(i) for i in self.sorted_order[run] if self.in_set[run, i]]


class ExplorationCache:
    """Rebuilds exploration sets only for runs whose gap order (or graph) changed."""

    def __init__(self, force_rebuild: bool = False):
        self.force_rebuild = force_rebuild
        self.order = None
        self.in_set = None
        self.graph = None
        self.rebuilds = 0

    def lookup(self, g: FeedbackGraph, order: np.ndarray) -> np.ndarray:
        if self.force_rebuild or self.order is None or g is not self.graph and g != self.graph:
            self.in_set = build_exploration_masks(g.adjacency, order)
            self.rebuilds += order.shape[0]
        else:
            stale = (order != self.order).any(axis=1)
            if stale.any():
                self.in_set = self.in_set.copy()
                self.in_set[stale] = build_exploration_masks(g.adjacency, order[stale])
                self.rebuilds += int(stale.sum())
        self.order = order
        self.graph = g
        return self.in_set


def plan_round(
    g: FeedbackGraph,
    delta_hat: np.ndarray,
    t: int,
    lam: float,
    beta: float,
    cache: ExplorationCache | None = None,
) -> ExplorationPlan:
    delta_hat = np.atleast_2d(delta_hat)
    order = gap_order(delta_hat)
    if cache is None:
        in_set = build_exploration_masks(g.adjacency, order)
    else:
        in_set = cache.lookup(g, order)
    K = g.num_arms
    return ExplorationPlan(
        in_set=in_set,
        epsilon=exploration_rates(in_set, delta_hat, t, lam, beta, K),
        o_lower=observation_lower_bound(delta_hat, t, lam, beta, K),
        lam=lam,
        beta=beta,
        t=t,
        sorted_order=order,
    )
