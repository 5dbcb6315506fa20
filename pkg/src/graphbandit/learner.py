"""EXP3.G++ and a plain EXP3 baseline.

Both learners advance ``n_runs`` independent runs in lock-step; every array is
``(n_runs, K)``.  A round is split into :meth:`act` (choose arms, given the
round's feedback graph) and :meth:`observe` (receive losses).  The first ``K``
rounds play arms ``0 .. K-1`` in order to seed the gap estimator; exponential
weights and exploration start at round ``K + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .estimator import GapEstimator, GapSnapshot
from .explore import ExplorationCache, ExplorationPlan, plan_round
from .graph import FeedbackGraph, strong_independence_number

FIXED_GRAPH = "fixed_graph"
TIME_VARYING = "time_varying"


@dataclass
class LearnerConfig:
    """Hyper-parameters of EXP3.G++.

    ``lam`` defaults to ``alpha_tilde`` in fixed-graph mode and to 1 in
    time-varying mode.  ``alpha_tilde`` is computed from the graph when left
    unset (only possible for small graphs).
    """

    gamma: float = 4.0
    beta: float = 320.0
    lam: float | None = None
    eta_mode: str = FIXED_GRAPH
    alpha_tilde: int | None = None
    seed: int = 0
    force_rebuild_S: bool = False

    def validate(self, num_arms: int):
        if self.gamma < 3:
            raise ValueError(f"gamma must be >= 3, got {self.gamma}")
        if self.beta < 64 * (self.gamma + 1):
            raise ValueError(f"beta must be >= 64 (gamma + 1) = {64 * (self.gamma + 1)}, got {self.beta}")
        if self.eta_mode not in (FIXED_GRAPH, TIME_VARYING):
            raise ValueError(f"unknown eta_mode {self.eta_mode!r}")
        if self.lam is not None and not 1 <= self.lam <= num_arms:
            raise ValueError(f"lambda must lie in [1, {num_arms}], got {self.lam}")
        if self.alpha_tilde is not None and not 1 <= self.alpha_tilde <= num_arms:
            raise ValueError(f"alpha_tilde must lie in [1, {num_arms}], got {self.alpha_tilde}")


def compute_q(tilde_L: np.ndarray, eta) -> np.ndarray:
    """Exponential weights ``exp(-eta L) / sum``, shifted by the row minimum."""
    tilde_L = np.asarray(tilde_L, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if eta.ndim:
        eta = eta[..., None]
    w = np.exp(-eta * (tilde_L - tilde_L.min(axis=-1, keepdims=True)))
    return w / w.sum(axis=-1, keepdims=True)


def mix(q: np.ndarray, epsilon: np.ndarray) -> np.ndarray:
    return (1.0 - epsilon.sum(axis=-1, keepdims=True)) * q + epsilon


def eta_fixed_graph(t: int, num_arms: int, alpha_tilde: float) -> float:
    return math.sqrt(math.log(num_arms) / (2.0 * alpha_tilde * t))


def eta_time_varying(num_arms: int, theta_cumsum):
    return np.sqrt(math.log(num_arms) / (2.0 * np.asarray(theta_cumsum, dtype=float)))


def eta_schedule(mode: str, t: int, num_arms: int, alpha_tilde=None, theta_cumsum=None):
    if mode == FIXED_GRAPH:
        return eta_fixed_graph(t, num_arms, alpha_tilde)
    if mode == TIME_VARYING:
        return eta_time_varying(num_arms, theta_cumsum)
    raise ValueError(f"unknown eta_mode {mode!r}")


def observation_probs(p: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """``P_i = sum of p_j over the in-neighbours j of i``.

    Accumulated arm by arm rather than through a matrix product so every run's
    result is independent of how many runs share the batch.
    """
    P = np.zeros_like(p)
    for j in range(adjacency.shape[0]):
        P += p[..., j : j + 1] * adjacency[j]
    return P


def importance_weighted(losses: np.ndarray, observed: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Unbiased estimate ``loss * 1[observed] / P`` (zero where unobserved)."""
    return np.where(observed, losses / P, 0.0)


def sample_arms(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling over arm index order, one uniform per run."""
    cdf = np.cumsum(p, axis=-1)
    arms = (cdf <= u[:, None]).sum(axis=-1)
    return np.minimum(arms, p.shape[-1] - 1)


def _checked(losses, observed) -> np.ndarray:
    losses = np.asarray(losses, dtype=float)
    seen = np.where(observed, losses, 0.5)
    if seen.min() < 0.0 or seen.max() > 1.0:
        raise ValueError("environment returned an observed loss outside [0, 1]")
    return losses


@dataclass
class RoundInfo:
    """Everything the learner computed in its last exponential-weights round."""

    t: int
    eta: np.ndarray
    snapshot: GapSnapshot
    plan: ExplorationPlan
    q: np.ndarray
    p: np.ndarray
    arms: np.ndarray
    P: np.ndarray | None = None
    theta: np.ndarray | None = None


class Exp3GPP:
    """EXP3.G++ for (possibly time-varying) directed feedback graphs.

    Parameters
    ----------
    num_arms : int
    config : LearnerConfig
    n_runs : int
        Number of independent runs advanced together.
    run_ids : sequence of int, optional
        Replicate indices used to key each run's random stream; defaults to
        ``range(n_runs)``.
    graph : FeedbackGraph, optional
        Needed in fixed-graph mode when ``config.alpha_tilde`` is unset.
    stream_key : tuple of int
        Prefix of each run's stream key; lets several learners in one
        experiment draw independent streams.
    """

    name = "exp3g++"

    def __init__(self, num_arms, config=None, n_runs=1, run_ids=None, graph=None, stream_key=(rng.LEARNER, 0)):
        config = config or LearnerConfig()
        config.validate(num_arms)
        run_ids = list(range(n_runs)) if run_ids is None else list(run_ids)
        if len(run_ids) != n_runs:
            raise ValueError("run_ids must have one entry per run")
        self.num_arms = K = num_arms
        self.config = config
        self.n_runs = n_runs
        self.alpha_tilde = config.alpha_tilde
        if config.eta_mode == FIXED_GRAPH and self.alpha_tilde is None:
            if graph is None:
                raise ValueError("fixed-graph mode needs alpha_tilde or the graph to compute it")
            self.alpha_tilde = strong_independence_number(graph)
        if config.lam is not None:
            self.lam = float(config.lam)
        else:
            self.lam = float(self.alpha_tilde) if config.eta_mode == FIXED_GRAPH else 1.0
        self.estimator = GapEstimator(K, config.gamma, n_runs)
        self.tilde_L = np.zeros((n_runs, K))
        self.theta_cumsum = np.full(n_runs, float(K))
        self.t = 1
        self.cache = ExplorationCache(force_rebuild=config.force_rebuild_S)
        self.stream = rng.UniformStream(config.seed, stream_key, run_ids)
        self.last: RoundInfo | None = None
        self._pending = None

    @property
    def initial_actions(self) -> list[int]:
        return list(range(self.num_arms))

    def eta(self):
        if self.config.eta_mode == FIXED_GRAPH:
            return np.full(self.n_runs, eta_fixed_graph(self.t, self.num_arms, self.alpha_tilde))
        return eta_time_varying(self.num_arms, self.theta_cumsum)

    def act(self, graph: FeedbackGraph) -> np.ndarray:
        """Choose one arm per run for round ``self.t`` on ``graph``."""
        if graph.num_arms != self.num_arms:
            raise ValueError("graph size does not match the learner")
        if self._pending is not None:
            raise RuntimeError("act() called twice without observe()")
        t, K = self.t, self.num_arms
        if t <= K:
            arms = np.full(self.n_runs, t - 1)
            self._pending = (graph, arms, None)
            return arms
        snap = self.estimator.snapshot(t)
        plan = plan_round(graph, snap.delta_hat, t, self.lam, self.config.beta, self.cache)
        eta = self.eta()
        q = compute_q(self.tilde_L, eta)
        p = mix(q, plan.epsilon)
        arms = sample_arms(p, self.stream.draw())
        self.last = RoundInfo(t=t, eta=eta, snapshot=snap, plan=plan, q=q, p=p, arms=arms)
        self._pending = (graph, arms, p)
        return arms

    def observe(self, losses: np.ndarray) -> np.ndarray:
        """Feed the round's losses; only entries in the played arms' out-neighbourhoods are read.

        Returns the loss each run incurred.
        """
        if self._pending is None:
            raise RuntimeError("observe() called before act()")
        graph, arms, p = self._pending
        self._pending = None
        losses = np.broadcast_to(np.asarray(losses, dtype=float), (self.n_runs, self.num_arms))
        observed = graph.adjacency[arms]
        losses = _checked(losses, observed)
        if p is not None:
            P = observation_probs(p, graph.adjacency)
            if not (P > 0).all():
                raise FloatingPointError("zero observation probability despite self-loops")
            self.tilde_L += importance_weighted(losses, observed, P)
            self.last.P = P
            if self.config.eta_mode == TIME_VARYING:
                theta = (p / P).sum(axis=-1)
                self.theta_cumsum += theta
                self.last.theta = theta
        self.estimator.record(observed, losses, check=False)
        self.t += 1
        return losses[np.arange(self.n_runs), arms]

    def step(self, graph: FeedbackGraph, losses: np.ndarray) -> np.ndarray:
        arms = self.act(graph)
        self.observe(losses)
        return arms


class Exp3:
    """Bandit-feedback EXP3 with ``eta_t = sqrt(ln K / (t K))``.

    Ignores the feedback graph: only the played arm's loss is used.  It plays
    the same ``K`` initial rounds as EXP3.G++ so the two are comparable round
    for round.
    """

    name = "exp3"

    def __init__(self, num_arms, config=None, n_runs=1, run_ids=None, graph=None, stream_key=(rng.LEARNER, 0)):
        config = config or LearnerConfig()
        run_ids = list(range(n_runs)) if run_ids is None else list(run_ids)
        self.num_arms = num_arms
        self.config = config
        self.n_runs = n_runs
        self.tilde_L = np.zeros((n_runs, num_arms))
        self.t = 1
        self.stream = rng.UniformStream(config.seed, stream_key, run_ids)
        self.last = None
        self._pending = None

    @property
    def initial_actions(self) -> list[int]:
        return list(range(self.num_arms))

    def eta(self) -> float:
        return math.sqrt(math.log(self.num_arms) / (self.t * self.num_arms))

    def act(self, graph: FeedbackGraph | None = None) -> np.ndarray:
        if self._pending is not None:
            raise RuntimeError("act() called twice without observe()")
        if self.t <= self.num_arms:
            arms = np.full(self.n_runs, self.t - 1)
            self._pending = (arms, None)
            return arms
        q = compute_q(self.tilde_L, self.eta())
        arms = sample_arms(q, self.stream.draw())
        self.last = {"t": self.t, "q": q, "arms": arms}
        self._pending = (arms, q)
        return arms

    def observe(self, losses: np.ndarray) -> np.ndarray:
        if self._pending is None:
            raise RuntimeError("observe() called before act()")
        arms, q = self._pending
        self._pending = None
        losses = np.broadcast_to(np.asarray(losses, dtype=float), (self.n_runs, self.num_arms))
        rows = np.arange(self.n_runs)
        observed = np.zeros(losses.shape, dtype=bool)
        observed[rows, arms] = True
        losses = _checked(losses, observed)
        if q is not None:
            # bandit graph: P_i = q_i
            self.tilde_L += importance_weighted(losses, observed, q)
        self.t += 1
        return losses[rows, arms]

    def step(self, graph, losses):
        arms = self.act(graph)
        self.observe(losses)
        return arms


LEARNERS = {Exp3GPP.name: Exp3GPP, Exp3.name: Exp3}
