"""Loss environments, graph generators and graph schedules.

Loss sequences are random-access: the losses of round ``t`` for replicate
``r`` depend only on ``(seed, r, t)``, so they are fixed before any learner
acts (oblivious) and identical whichever learner is replayed against them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .graph import FeedbackGraph, GraphError, graph_from_dict

STOCHASTIC = "stochastic"
ADVERSARIAL = "adversarial"


# --------------------------------------------------------------------------
# graph generators


def _require(params: dict, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise GraphError(f"missing graph parameters: {', '.join(missing)}")


def generate_graph(family: str, params: dict | None = None, seed: int = 0) -> FeedbackGraph:
    """Generate a self-looped graph from a named family.

    Families: ``bandit``, ``complete``, ``erdos_renyi`` (``p``, ``directed``),
    ``star`` (centre 0, ``directed``), ``cliques`` (``m`` cliques of size ``s``)
    and ``cycle`` (``directed``).  All but ``cliques`` take ``K``.
    """
    params = dict(params or {})
    if family == "cliques":
        _require(params, "m", "s")
        m, s = int(params["m"]), int(params["s"])
        if m < 1 or s < 1 or m * s < 2:
            raise GraphError(f"cliques needs m, s >= 1 and m*s >= 2, got m={m}, s={s}")
        edges = [
            (c * s + a, c * s + b) for c in range(m) for a in range(s) for b in range(s)
        ]
        return FeedbackGraph.from_edges(m * s, edges)

    _require(params, "K")
    K = int(params["K"])
    if K < 2:
        raise GraphError(f"K must be >= 2, got {K}")
    directed = bool(params.get("directed", family == "erdos_renyi"))

    if family == "bandit":
        edges = []
    elif family == "complete":
        edges = [(i, j) for i in range(K) for j in range(K)]
    elif family == "erdos_renyi":
        _require(params, "p")
        p = float(params["p"])
        if not 0.0 <= p <= 1.0:
            raise GraphError(f"edge probability must be in [0, 1], got {p}")
        draw = rng.generator(seed, rng.GRAPH).random((K, K)) < p
        if not directed:
            draw = np.triu(draw, 1)
            draw = draw | draw.T
        return FeedbackGraph.from_adjacency(draw)
    elif family == "star":
        edges = [(0, j) for j in range(1, K)]
        if not directed:
            edges += [(j, 0) for j in range(1, K)]
    elif family == "cycle":
        edges = [(i, (i + 1) % K) for i in range(K)]
        if not directed:
            edges += [((i + 1) % K, i) for i in range(K)]
    else:
        raise GraphError(f"unknown graph family {family!r}")
    return FeedbackGraph.from_edges(K, edges)


# --------------------------------------------------------------------------
# graph schedules


class GraphSchedule:
    fixed = False

    def graph_at(self, t: int) -> FeedbackGraph:
        raise NotImplementedError

    @property
    def num_arms(self) -> int:
        return self.graph_at(1).num_arms


@dataclass(eq=False)
class FixedSchedule(GraphSchedule):
    graph: FeedbackGraph
    fixed = True

    def graph_at(self, t):
        return self.graph


@dataclass(eq=False)
class PeriodicSchedule(GraphSchedule):
    """Cycle through ``graphs``, holding each for ``period`` rounds."""

    graphs: list
    period: int = 1

    def __post_init__(self):
        if not self.graphs:
            raise GraphError("empty graph schedule")
        if self.period < 1:
            raise GraphError("period must be >= 1")
        if len({g.num_arms for g in self.graphs}) != 1:
            raise GraphError("all graphs in a schedule must have the same K")

    def graph_at(self, t):
        return self.graphs[((t - 1) // self.period) % len(self.graphs)]


@dataclass(eq=False)
class RandomSchedule(GraphSchedule):
    """A freshly generated graph every ``period`` rounds, keyed by ``(seed, epoch)``."""

    family: str
    params: dict
    seed: int = 0
    period: int = 1
    _cache: tuple = field(default=(None, None), repr=False)

    def graph_at(self, t):
        epoch = (t - 1) // self.period
        if self._cache[0] != epoch:
            seed = int(np.random.SeedSequence(self.seed, spawn_key=(rng.GRAPH, epoch)).generate_state(1)[0])
            self._cache = (epoch, generate_graph(self.family, self.params, seed))
        return self._cache[1]


def schedule_from_obj(obj, seed: int = 0) -> GraphSchedule:
    """Build a schedule from its JSON form.

    Accepts a graph object ``{"K", "edges"}``, a family spec
    ``{"family", "params"}`` (optionally with ``"period"`` for a per-epoch
    random schedule, or ``"seed"``), a list of graph objects, or
    ``{"graphs": [...], "period": n}``.
    """
    if isinstance(obj, FeedbackGraph):
        return FixedSchedule(obj)
    if isinstance(obj, list):
        return PeriodicSchedule([_graph_obj(o, seed) for o in obj])
    if not isinstance(obj, dict):
        raise GraphError(f"cannot build a graph schedule from {type(obj).__name__}")
    if "graphs" in obj:
        return PeriodicSchedule([_graph_obj(o, seed) for o in obj["graphs"]], int(obj.get("period", 1)))
    if "family" in obj and "period" in obj:
        return RandomSchedule(obj["family"], obj.get("params", {}), int(obj.get("seed", seed)), int(obj["period"]))
    return FixedSchedule(_graph_obj(obj, seed))


def _graph_obj(obj, seed):
    if isinstance(obj, FeedbackGraph):
        return obj
    if "family" in obj:
        return generate_graph(obj["family"], obj.get("params", {}), int(obj.get("seed", seed)))
    return graph_from_dict(obj)


# --------------------------------------------------------------------------
# loss environments


class _BlockedLosses:
    """Per-replicate loss rows generated in fixed-size blocks of rounds."""

    def __init__(self, env, run_ids, block=rng.BLOCK):
        self.env = env
        self.run_ids = list(run_ids)
        self.block = block
        self._b = None
        self._rows = None

    def at(self, t: int) -> np.ndarray:
        b = (t - 1) // self.block
        if b != self._b:
            start = b * self.block + 1
            self._rows = np.stack(
                [self.env._block(rng.generator(self.env.seed, rng.ENV, r, b), start, self.block) for r in self.run_ids],
                axis=1,
            )
            self._b = b
        return self._rows[(t - 1) - b * self.block]


@dataclass
class StochasticEnv:
    """I.i.d. losses with fixed per-arm means.

    ``noise`` is ``"bernoulli"`` (default) or ``"uniform_band"``, which draws
    uniformly on ``[mean - width/2, mean + width/2]``.
    """

    means: np.ndarray
    noise: str = "bernoulli"
    width: float = 0.0
    seed: int = 0
    kind = STOCHASTIC

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        if self.means.ndim != 1 or self.means.size < 2:
            raise ValueError("means must be a vector with at least two arms")
        if self.means.min() < 0 or self.means.max() > 1:
            raise ValueError("means must lie in [0, 1]")
        if self.noise == "uniform_band":
            half = self.width / 2
            if self.width <= 0 or self.means.min() - half < 0 or self.means.max() + half > 1:
                raise ValueError("uniform band must have positive width and stay inside [0, 1]")
        elif self.noise != "bernoulli":
            raise ValueError(f"unknown noise {self.noise!r}")

    @property
    def num_arms(self) -> int:
        return self.means.size

    @property
    def best_arm(self) -> int:
        return int(np.argmin(self.means))

    @property
    def gaps(self) -> np.ndarray:
        return self.means - self.means.min()

    @property
    def delta_min(self) -> float:
        pos = self.gaps[self.gaps > 0]
        return float(pos.min()) if pos.size else 0.0

    @property
    def delta_bar(self) -> np.ndarray:
        return np.maximum(self.delta_min, self.gaps)

    def _block(self, gen, start, n):
        u = gen.random((n, self.num_arms))
        if self.noise == "bernoulli":
            return (u < self.means).astype(float)
        return self.means + self.width * (u - 0.5)

    def stream(self, run_ids=(0,)) -> _BlockedLosses:
        return _BlockedLosses(self, run_ids)

    def losses_at(self, t: int, run_ids=(0,)) -> np.ndarray:
        if t < 1:
            raise ValueError("rounds start at 1")
        return self.stream(run_ids).at(t)


ADVERSARIAL_GENERATORS = ("uniform", "bernoulli", "flip")


@dataclass
class AdversarialEnv:
    """Oblivious loss sequence from a CSV file or a named generator.

    A file sequence is shared by every replicate.  Generated sequences are
    drawn per replicate from ``(seed, replicate)``.  Generators:

    ``uniform``
        i.i.d. uniform losses on ``[0, 1]`` (``K`` in params).
    ``bernoulli``
        i.i.d. Bernoulli losses with the given ``means``.
    ``flip``
        Bernoulli ``means`` for the first ``horizon // 2`` rounds, then the
        means reversed (best and worst arms swap).
    """

    sequence: np.ndarray | None = None
    generator: str | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    kind = ADVERSARIAL

    def __post_init__(self):
        if (self.sequence is None) == (self.generator is None):
            raise ValueError("give exactly one of a loss sequence or a generator name")
        if self.sequence is not None:
            self.sequence = np.asarray(self.sequence, dtype=float)
            if self.sequence.ndim != 2 or self.sequence.shape[1] < 2:
                raise ValueError("loss sequence must be a (T, K) array with K >= 2")
            if self.sequence.min() < 0 or self.sequence.max() > 1:
                raise ValueError("adversarial losses must lie in [0, 1]")
        elif self.generator not in ADVERSARIAL_GENERATORS:
            raise ValueError(f"unknown loss generator {self.generator!r}")
        elif self.generator == "uniform":
            if int(self.params.get("K", 0)) < 2:
                raise ValueError("uniform generator needs K >= 2")
        else:
            means = np.asarray(self.params.get("means", []), dtype=float)
            if means.size < 2 or means.min() < 0 or means.max() > 1:
                raise ValueError("bernoulli/flip generators need means in [0, 1] for K >= 2 arms")
            if self.generator == "flip" and "horizon" not in self.params:
                raise ValueError("flip generator needs the horizon")

    @classmethod
    def from_file(cls, path, horizon: int | None = None) -> "AdversarialEnv":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        try:
            seq = np.array([[float(x) for x in r] for r in rows], dtype=float)
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None
        if horizon is not None and len(seq) < horizon:
            raise ValueError(f"{path}: {len(seq)} rows but horizon is {horizon}")
        return cls(sequence=seq)

    @property
    def num_arms(self) -> int:
        if self.sequence is not None:
            return self.sequence.shape[1]
        if self.generator == "uniform":
            return int(self.params["K"])
        return len(self.params["means"])

    def check_horizon(self, horizon: int):
        if self.sequence is not None and len(self.sequence) < horizon:
            raise ValueError(f"loss sequence has {len(self.sequence)} rounds, horizon is {horizon}")

    def _block(self, gen, start, n):
        K = self.num_arms
        u = gen.random((n, K))
        if self.generator == "uniform":
            return u
        means = np.asarray(self.params["means"], dtype=float)
        if self.generator == "bernoulli":
            return (u < means).astype(float)
        t = np.arange(start, start + n)[:, None]
        flipped = t > int(self.params["horizon"]) // 2
        return (u < np.where(flipped, means[::-1], means)).astype(float)

    def stream(self, run_ids=(0,)):
        if self.sequence is not None:
            return _SharedSequence(self.sequence, len(list(run_ids)))
        return _BlockedLosses(self, run_ids)

    def losses_at(self, t: int, run_ids=(0,)) -> np.ndarray:
        if t < 1:
            raise ValueError("rounds start at 1")
        return self.stream(run_ids).at(t)


class _SharedSequence:
    def __init__(self, sequence, n_runs):
        self.sequence = sequence
        self.n_runs = n_runs

    def at(self, t):
        if t > len(self.sequence):
            raise ValueError(f"loss sequence exhausted at round {t}")
        return np.broadcast_to(self.sequence[t - 1], (self.n_runs, self.sequence.shape[1]))


def environment_from_obj(obj: dict, seed: int = 0, horizon: int | None = None):
    kind = obj.get("type", STOCHASTIC)
    if kind == STOCHASTIC:
        return StochasticEnv(obj["means"], obj.get("noise", "bernoulli"), float(obj.get("width", 0.0)), seed)
    if kind == ADVERSARIAL:
        if "file" in obj:
            return AdversarialEnv.from_file(obj["file"], horizon)
        params = dict(obj.get("params", {}))
        if obj.get("generator") == "flip" and "horizon" not in params and horizon is not None:
            params["horizon"] = horizon
        return AdversarialEnv(generator=obj.get("generator"), params=params, seed=seed)
    raise ValueError(f"unknown environment type {kind!r}")


# --------------------------------------------------------------------------
# regret


def pseudo_regret(arms: np.ndarray, env, losses: np.ndarray | None = None) -> np.ndarray:
    """Cumulative regret after each round, per run.

    ``arms`` is ``(R, T)``.  In the stochastic case this is the running sum of
    the gaps of the played arms.  In the adversarial case ``losses`` must hold
    the ``(R, T, K)`` loss tensor and the regret is the learner's cumulative
    loss minus the best single arm's cumulative loss up to each round; it can
    be negative for an individual run.
    """
    arms = np.atleast_2d(arms)
    if env.kind == STOCHASTIC:
        return np.cumsum(env.gaps[arms], axis=1)
    if losses is None:
        raise ValueError("adversarial regret needs the loss tensor")
    losses = np.asarray(losses, dtype=float)
    if losses.ndim == 2:
        losses = np.broadcast_to(losses, (arms.shape[0],) + losses.shape)
    incurred = np.take_along_axis(losses, arms[..., None], axis=2)[..., 0]
    return np.cumsum(incurred, axis=1) - np.cumsum(losses, axis=1).min(axis=2)


def regret_bound_adversarial(alpha_tilde: float, horizon: int, num_arms: int) -> float:
    return 4 * math.sqrt(alpha_tilde * horizon * math.log(num_arms)) + num_arms


def regret_bound_time_varying(alpha_sum: float, horizon: int, num_arms: int) -> float:
    K = num_arms
    return 9 * math.sqrt(math.log(K)) * math.sqrt(math.log(K * horizon)) * math.sqrt(alpha_sum) + 2 * K
