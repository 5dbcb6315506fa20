"""Property checks over random instances; drives ``graphbandit verify``.

Each ``check_*`` function returns a :class:`CheckResult`.  The pieces under
test (exploration-set builder, loss estimator) are parameters so that a
deliberately broken variant can be shown to fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import rng
from .env import AdversarialEnv, StochasticEnv
from .explore import build_exploration_masks, build_exploration_set, gap_order
from .graph import (
    FeedbackGraph,
    graph_from_dict,
    independence_number,
    is_dominating,
    is_strongly_independent,
    mas,
    strong_independence_number,
)
from .learner import Exp3GPP, LearnerConfig, importance_weighted, observation_probs

VERIFY_SEED = 20221


class InvariantError(AssertionError):
    pass


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_graph(gen: np.random.Generator, K: int) -> FeedbackGraph:
    """Mix of directed and undirected Erdos-Renyi graphs with random density."""
    p = gen.uniform(0.0, 0.9)
    draw = gen.random((K, K)) < p
    if gen.random() < 0.4:
        draw = np.triu(draw, 1)
        draw |= draw.T
    elif gen.random() < 0.3:
        # partly mutual: symmetrise a random subset of edges
        sym = np.triu(gen.random((K, K)) < 0.5, 1)
        draw |= (draw.T & (sym | sym.T))
    return FeedbackGraph.from_adjacency(draw)


def random_gaps(gen: np.random.Generator, K: int) -> np.ndarray:
    """Gap vectors with frequent ties and zeros."""
    kind = gen.integers(3)
    if kind == 0:
        return gen.random(K)
    if kind == 1:
        return np.round(gen.random(K) * 4) / 4
    gaps = gen.random(K)
    gaps[gen.random(K) < 0.5] = 0.0
    return gaps


def random_distribution(gen: np.random.Generator, K: int) -> np.ndarray:
    return gen.dirichlet(np.full(K, gen.choice([0.2, 1.0, 5.0])))


def exploration_set_violations(g: FeedbackGraph, gaps, s) -> list[str]:
    s = list(s)
    bad = []
    if not is_dominating(g, s):
        bad.append("not dominating")
    if not is_strongly_independent(g, s):
        bad.append("not strongly independent")
    for i in range(g.num_arms):
        if not any(i in g.out_edges[j] and gaps[j] <= gaps[i] for j in s):
            bad.append(f"arm {i} has no observer with a smaller gap")
            break
    return bad


@_timed
def check_exploration_sets(n_instances=500, k_range=(2, 12), seed=VERIFY_SEED, builder=build_exploration_set) -> CheckResult:
    """Exploration sets dominate, are strongly independent, and cover each arm from below."""
    gen = rng.generator(seed, 11)
    failures = []
    for n in range(n_instances):
        K = int(gen.integers(k_range[0], k_range[1] + 1))
        g = random_graph(gen, K)
        gaps = random_gaps(gen, K)
        s = builder(g, gaps)
        bad = exploration_set_violations(g, gaps, s)
        batched = build_exploration_masks(g.adjacency, gap_order(gaps)[None])[0]
        if builder is build_exploration_set and sorted(s) != np.flatnonzero(batched).tolist():
            bad.append("vectorised builder disagrees")
        if bad:
            failures.append(f"instance {n} (K={K}): {', '.join(bad)}")
    return CheckResult(
        "exploration_sets", not failures,
        f"{n_instances - len(failures)}/{n_instances} instances ok" + (f"; first: {failures[0]}" if failures else ""),
    )


def check_round(learner, tol: float = 1e-12):
    """Raise :class:`InvariantError` if the learner's last round broke a distribution invariant."""
    info = learner.last
    if not isinstance(learner, Exp3GPP) or info is None:
        return
    p, q, eps = info.p, info.q, info.plan.epsilon
    t = info.t
    if np.abs(p.sum(axis=-1) - 1).max() > tol:
        raise InvariantError(f"t={t}: sum(p) deviates from 1")
    if (p < 0).any():
        raise InvariantError(f"t={t}: negative probability")
    if eps.sum(axis=-1).max() > 0.5 + tol:
        raise InvariantError(f"t={t}: total exploration above 1/2")
    if (eps > 1.0 / (2 * learner.num_arms) + tol).any():
        raise InvariantError(f"t={t}: exploration rate above 1/(2K)")
    if (p < q / 2 - tol).any():
        raise InvariantError(f"t={t}: p < q/2")
    if (p < eps - tol).any():
        raise InvariantError(f"t={t}: p < epsilon")
    if info.P is not None and (info.P < info.plan.o_lower * (1 - tol)).any():
        raise InvariantError(f"t={t}: observation probability below its lower bound")


def run_with_checks(learner, schedule_at, losses, horizon: int) -> int:
    """Play ``horizon`` rounds, checking invariants every round; returns rounds checked."""
    checked = 0
    for t in range(1, horizon + 1):
        learner.act(schedule_at(t))
        learner.observe(losses.at(t))
        if learner.last is not None and learner.last.t == t:
            check_round(learner)
            checked += 1
    return checked


@_timed
def check_run_invariants(horizon=10_000, num_arms=10, n_runs=4, seed=VERIFY_SEED) -> CheckResult:
    """Distribution/mixing invariants every round, stochastic and adversarial losses."""
    gen = rng.generator(seed, 12)
    g = random_graph(gen, num_arms)
    means = np.linspace(0.2, 0.8, num_arms)
    envs = [
        ("stochastic", StochasticEnv(means, seed=seed)),
        ("adversarial", AdversarialEnv(generator="uniform", params={"K": num_arms}, seed=seed)),
    ]
    checked = 0
    try:
        for _, env in envs:
            learner = Exp3GPP(num_arms, LearnerConfig(seed=seed), n_runs=n_runs, graph=g)
            checked += run_with_checks(learner, lambda t: g, env.stream(range(n_runs)), horizon) * n_runs
    except InvariantError as exc:
        return CheckResult("run_invariants", False, str(exc))
    return CheckResult("run_invariants", True, f"{checked} run-rounds ok (T={horizon}, K={num_arms})")


def expected_estimate(g: FeedbackGraph, p, losses, estimator=importance_weighted) -> np.ndarray:
    """``E[estimate]`` by enumerating every arm the learner could sample."""
    p = np.asarray(p, dtype=float)[None]
    P = observation_probs(p, g.adjacency)
    total = np.zeros(g.num_arms)
    for k in range(g.num_arms):
        observed = g.adjacency[k][None]
        total += p[0, k] * estimator(np.asarray(losses)[None], observed, P)[0]
    return total


@_timed
def check_unbiasedness(n_instances=100, seed=VERIFY_SEED, tol=1e-12, estimator=importance_weighted) -> CheckResult:
    """Exact enumeration: the expected loss estimate equals the true loss."""
    gen = rng.generator(seed, 13)
    worst = 0.0
    for _ in range(n_instances):
        K = int(gen.integers(2, 13))
        g = random_graph(gen, K)
        p = random_distribution(gen, K)
        losses = gen.random(K)
        worst = max(worst, float(np.abs(expected_estimate(g, p, losses, estimator) - losses).max()))
    return CheckResult("unbiasedness", worst <= tol, f"max |E[estimate] - loss| = {worst:.2e} (tol {tol:g})")


def theta(g: FeedbackGraph, p) -> float:
    p = np.asarray(p, dtype=float)
    return float((p / observation_probs(p[None], g.adjacency)[0]).sum())


@_timed
def check_combinatorial_chain(n_instances=200, max_arms=8, seed=VERIFY_SEED) -> CheckResult:
    """theta <= mas <= strong independence number <= K, and alpha <= strong alpha."""
    gen = rng.generator(seed, 14)
    failures = []
    for n in range(n_instances):
        K = int(gen.integers(2, max_arms + 1))
        g = random_graph(gen, K)
        a, a_s, m = independence_number(g), strong_independence_number(g), mas(g)
        th = max(theta(g, random_distribution(gen, K)) for _ in range(5))
        if not (th <= m + 1e-9 and m <= a_s <= K and 1 <= a <= a_s):
            failures.append(f"instance {n}: theta={th:.3f} mas={m} alpha={a} alpha_strong={a_s} K={K}")
    return CheckResult(
        "combinatorial_chain", not failures,
        f"{n_instances - len(failures)}/{n_instances} graphs ok" + (f"; first: {failures[0]}" if failures else ""),
    )


@_timed
def check_cache_equivalence(horizon=3000, num_arms=8, n_runs=4, seed=VERIFY_SEED) -> CheckResult:
    """Caching the exploration set gives the same play as rebuilding it every round."""
    gen = rng.generator(seed, 15)
    g = random_graph(gen, num_arms)
    env = StochasticEnv(np.linspace(0.1, 0.9, num_arms), seed=seed)
    arms = []
    for force in (False, True):
        learner = Exp3GPP(num_arms, LearnerConfig(seed=seed, force_rebuild_S=force), n_runs=n_runs, graph=g)
        stream = env.stream(range(n_runs))
        sets, seq = [], []
        for t in range(1, horizon + 1):
            seq.append(learner.step(g, stream.at(t)))
            if learner.last is not None and learner.last.t == t:
                sets.append(learner.last.plan.in_set.copy())
        arms.append((np.array(seq), np.array(sets)))
    same = np.array_equal(arms[0][0], arms[1][0]) and np.array_equal(arms[0][1], arms[1][1])
    return CheckResult("cache_equivalence", same, f"{horizon} rounds x {n_runs} runs identical" if same else "sequences differ")


def concentration_frequencies(
    g: FeedbackGraph, means, checkpoints=(200, 1000), n_runs=2000, seed=VERIFY_SEED, gamma=4.0, beta=320.0
) -> dict[int, np.ndarray]:
    """Per-arm frequency of ``delta_hat >= delta_bar`` across ``n_runs`` runs at each checkpoint."""
    env = StochasticEnv(np.asarray(means, dtype=float), seed=seed)
    learner = Exp3GPP(g.num_arms, LearnerConfig(gamma=gamma, beta=beta, seed=seed), n_runs=n_runs, graph=g)
    stream = env.stream(range(n_runs))
    wanted = set(checkpoints)
    freq = {}
    for t in range(1, max(checkpoints) + 1):
        learner.act(g)
        if t in wanted:
            freq[t] = (learner.last.snapshot.delta_hat >= env.delta_bar).mean(axis=0)
        learner.observe(stream.at(t))
    return freq


def concentration_threshold(t: int, num_arms: int, n_runs: int, gamma: float = 4.0) -> float:
    bound = 1.0 / (num_arms * t ** (gamma - 1))
    return bound + 3 * math.sqrt(bound * (1 - bound) / n_runs)


CONCENTRATION_GRAPH = {"K": 5, "edges": [[0, 1], [1, 0], [1, 2], [3, 4], [4, 2], [2, 3]]}
CONCENTRATION_MEANS = (0.2, 0.35, 0.45, 0.6, 0.8)


@_timed
def check_concentration(n_runs=2000, checkpoints=(200, 1000), seed=VERIFY_SEED) -> CheckResult:
    """Upper-tail frequency of the gap estimates stays under ``1/(K t^(gamma-1))`` plus 3 s.e."""
    g = graph_from_dict(CONCENTRATION_GRAPH)
    freq = concentration_frequencies(g, CONCENTRATION_MEANS, checkpoints, n_runs, seed)
    parts, ok = [], True
    for t, f in freq.items():
        thr = concentration_threshold(t, g.num_arms, n_runs)
        ok &= bool((f <= thr).all())
        parts.append(f"t={t}: max freq {f.max():.2e} <= {thr:.2e}")
    return CheckResult("concentration", ok, "; ".join(parts))


def verify(level: str = "fast") -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError(f"unknown verify level {level!r}")
    full = level == "full"
    results = [
        check_exploration_sets(),
        check_run_invariants(horizon=10_000 if full else 2000),
        check_unbiasedness(),
        check_combinatorial_chain(),
        check_cache_equivalence(),
    ]
    if full:
        results.append(check_concentration())
    return results
