"""Experiment orchestration: seeded replicates, regret traces, CSV/JSON output."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .env import ADVERSARIAL, STOCHASTIC, environment_from_obj, schedule_from_obj
from .graph import CapacityError, graph_stats
from .learner import FIXED_GRAPH, LEARNERS, TIME_VARYING, Exp3GPP, LearnerConfig
from .verify import InvariantError, check_round

log = logging.getLogger(__name__)

THREADS_ENV = "GRAPHBANDIT_THREADS"
DEFAULT_STRIDE_ABOVE = 10_000


@dataclass
class LearnerSpec:
    name: str
    algorithm: str
    config: LearnerConfig
    raw: dict = field(default_factory=dict)


@dataclass
class ExperimentSpec:
    """A full experiment.  Build it from JSON with :func:`spec_from_obj`."""

    graph_schedule: object
    environment: object
    learners: list
    horizon: int
    replicates: int = 1
    seed: int = 0
    output_dir: str | None = None
    record_stride: int | None = None
    check_invariants: bool = True
    debug: bool = False
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        K = self.graph_schedule.num_arms
        if self.environment.num_arms != K:
            raise ValueError(f"environment has {self.environment.num_arms} arms but the graph has {K}")
        if self.horizon < K + 1:
            raise ValueError(f"horizon must be >= K + 1 = {K + 1}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.record_stride is None:
            self.record_stride = 10 if self.horizon > DEFAULT_STRIDE_ABOVE else 1
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not self.learners:
            raise ValueError("at least one learner is required")
        names = [ls.name for ls in self.learners]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate learner names: {names}")
        if hasattr(self.environment, "check_horizon"):
            self.environment.check_horizon(self.horizon)

    @property
    def num_arms(self) -> int:
        return self.graph_schedule.num_arms

    def config_hash(self, learner: LearnerSpec | None = None) -> str:
        payload = {"spec": self.raw}
        if learner is not None:
            payload["learner"] = learner.raw
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _learner_spec(obj: dict, fixed_graph: bool, seed: int) -> LearnerSpec:
    algorithm = obj.get("algorithm", Exp3GPP.name)
    if algorithm not in LEARNERS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(LEARNERS)}")
    cfg = LearnerConfig(
        gamma=float(obj.get("gamma", 4.0)),
        beta=float(obj.get("beta", 320.0)),
        lam=obj.get("lambda"),
        eta_mode=obj.get("eta_mode", FIXED_GRAPH if fixed_graph else TIME_VARYING),
        alpha_tilde=obj.get("alpha_tilde"),
        seed=seed,
        force_rebuild_S=bool(obj.get("force_rebuild_S", False)),
    )
    return LearnerSpec(name=obj.get("name", algorithm), algorithm=algorithm, config=cfg, raw=obj)


def spec_from_obj(obj: dict, base_dir: str | Path = ".") -> ExperimentSpec:
    """Parse the JSON experiment format.

    Required: ``graph`` (or ``graph_schedule``), ``environment``, ``horizon``.
    Defaults: one EXP3.G++ learner with gamma=4, beta=320, lambda = alpha_tilde
    on a fixed graph or 1 on a time-varying schedule; ``replicates`` 1;
    ``seed`` 0; ``record_stride`` 1, or 10 above 10^4 rounds.
    """
    obj = dict(obj)
    base_dir = Path(base_dir)
    seed = int(obj.get("seed", 0))
    horizon = int(obj["horizon"])
    sched_obj = obj.get("graph_schedule", obj.get("graph"))
    if sched_obj is None:
        raise ValueError("experiment needs a 'graph' or 'graph_schedule'")
    if isinstance(sched_obj, str):
        with open(base_dir / sched_obj) as fh:
            sched_obj = json.load(fh)
    schedule = schedule_from_obj(sched_obj, seed)
    env_obj = dict(obj["environment"])
    if "file" in env_obj:
        env_obj["file"] = str(base_dir / env_obj["file"])
    environment = environment_from_obj(env_obj, seed, horizon)
    learners = [_learner_spec(lo, schedule.fixed, seed) for lo in obj.get("learners", [{}])]
    out = obj.get("output_dir")
    return ExperimentSpec(
        graph_schedule=schedule,
        environment=environment,
        learners=learners,
        horizon=horizon,
        replicates=int(obj.get("replicates", 1)),
        seed=seed,
        output_dir=str(base_dir / out) if out else None,
        record_stride=obj.get("record_stride"),
        check_invariants=bool(obj.get("check_invariants", True)),
        debug=bool(obj.get("debug", False)),
        raw=obj,
    )


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    with open(path) as fh:
        return spec_from_obj(json.load(fh), path.parent)


def recorded_rounds(horizon: int, stride: int) -> np.ndarray:
    t = np.arange(stride, horizon + 1, stride)
    if t.size == 0 or t[-1] != horizon:
        t = np.append(t, horizon)
    return t


@dataclass
class RunBatch:
    """Recorded traces of several replicates of one learner, shape ``(R, n)``."""

    run_ids: list
    t: np.ndarray
    arm: np.ndarray
    loss: np.ndarray
    cum_loss: np.ndarray
    cum_regret: np.ndarray
    debug_rows: list = field(default_factory=list)


def _make_learner(spec: ExperimentSpec, idx: int, run_ids) -> object:
    ls = spec.learners[idx]
    cls = LEARNERS[ls.algorithm]
    graph = spec.graph_schedule.graph_at(1) if spec.graph_schedule.fixed else None
    return cls(
        spec.num_arms, ls.config, n_runs=len(run_ids), run_ids=run_ids, graph=graph,
        stream_key=(rng.LEARNER, idx),
    )


def run_batch(spec: ExperimentSpec, idx: int, run_ids) -> RunBatch:
    """Run replicates ``run_ids`` of learner ``idx`` in lock-step."""
    run_ids = list(run_ids)
    R, K, T = len(run_ids), spec.num_arms, spec.horizon
    learner = _make_learner(spec, idx, run_ids)
    losses_src = spec.environment.stream(run_ids)
    t_rec = recorded_rounds(T, spec.record_stride)
    n = t_rec.size
    out = RunBatch(
        run_ids=run_ids,
        t=t_rec,
        arm=np.zeros((R, n), dtype=np.int64),
        loss=np.zeros((R, n)),
        cum_loss=np.zeros((R, n)),
        cum_regret=np.zeros((R, n)),
    )
    stochastic = spec.environment.kind == STOCHASTIC
    gaps = spec.environment.gaps if stochastic else None
    cum_loss = np.zeros(R)
    cum_gap = np.zeros(R)
    cum_arm = np.zeros((R, K))
    k = 0
    for t in range(1, T + 1):
        graph = spec.graph_schedule.graph_at(t)
        losses = losses_src.at(t)
        arms = learner.act(graph)
        incurred = learner.observe(losses)
        if spec.check_invariants:
            check_round(learner)
        cum_loss += incurred
        if stochastic:
            cum_gap += gaps[arms]
        else:
            cum_arm += losses
        if spec.debug and isinstance(learner, Exp3GPP) and learner.last is not None and learner.last.t == t:
            _debug_rows(out.debug_rows, learner.last, run_ids)
        if t == t_rec[k]:
            out.arm[:, k] = arms
            out.loss[:, k] = incurred
            out.cum_loss[:, k] = cum_loss
            out.cum_regret[:, k] = cum_gap if stochastic else cum_loss - cum_arm.min(axis=1)
            k += 1
    return out


def _debug_rows(rows, info, run_ids):
    for r, rid in enumerate(run_ids):
        members = ";".join(str(i) for i in info.plan.sorted_order[r] if info.plan.in_set[r, i])
        rows.append(
            [info.t, rid, members]
            + [";".join(repr(float(x)) for x in arr[r]) for arr in
               (info.plan.epsilon, info.snapshot.ucb, info.snapshot.lcb, info.snapshot.delta_hat)]
        )


def _chunks(run_ids, n):
    n = max(1, min(n, len(run_ids)))
    size = math.ceil(len(run_ids) / n)
    return [run_ids[i : i + size] for i in range(0, len(run_ids), size)]


def _merge(batches: list[RunBatch]) -> RunBatch:
    first = batches[0]
    return RunBatch(
        run_ids=[r for b in batches for r in b.run_ids],
        t=first.t,
        arm=np.concatenate([b.arm for b in batches]),
        loss=np.concatenate([b.loss for b in batches]),
        cum_loss=np.concatenate([b.cum_loss for b in batches]),
        cum_regret=np.concatenate([b.cum_regret for b in batches]),
        debug_rows=[row for b in batches for row in b.debug_rows],
    )


def _run_chunk(args):
    spec, idx, run_ids = args
    return run_batch(spec, idx, run_ids)


def worker_count(flag: int | None = None) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


@dataclass
class LearnerResult:
    name: str
    t: np.ndarray
    mean_regret: np.ndarray
    stderr: np.ndarray
    runs: RunBatch
    config_hash: str


def aggregate(batch: RunBatch) -> tuple[np.ndarray, np.ndarray]:
    reg = batch.cum_regret
    mean = reg.mean(axis=0)
    if reg.shape[0] > 1:
        stderr = reg.std(axis=0, ddof=1) / math.sqrt(reg.shape[0])
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> dict[str, LearnerResult]:
    """Run every learner for ``spec.replicates`` replicates and write outputs.

    Results are identical for any worker count: a replicate's randomness is
    keyed by ``(seed, replicate)`` only.
    """
    workers = worker_count(workers)
    run_ids = list(range(spec.replicates))
    results = {}
    for idx, ls in enumerate(spec.learners):
        chunks = _chunks(run_ids, workers)
        if len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
                batches = list(pool.map(_run_chunk, [(spec, idx, c) for c in chunks]))
        else:
            batches = [run_batch(spec, idx, run_ids)]
        batch = _merge(batches)
        mean, stderr = aggregate(batch)
        results[ls.name] = LearnerResult(ls.name, batch.t, mean, stderr, batch, spec.config_hash(ls))
        log.info("%s: mean regret at T=%d is %.2f", ls.name, spec.horizon, mean[-1])
    if spec.output_dir:
        write_outputs(spec, results)
    return results


def _fmt(x) -> str:
    return repr(float(x))


def write_outputs(spec: ExperimentSpec, results: dict[str, LearnerResult]):
    out = Path(spec.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, res in results.items():
            run_dir = out / "runs" / _safe(name)
            run_dir.mkdir(parents=True, exist_ok=True)
            b = res.runs
            for r, rid in enumerate(b.run_ids):
                write_trace(run_dir / f"run_{rid:04d}.csv", b, r)
            if b.debug_rows:
                with open(out / f"debug_{_safe(name)}.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["t", "replicate", "exploration_set", "epsilon", "ucb", "lcb", "delta_hat"])
                    w.writerows(b.debug_rows)
        write_aggregate(out / "aggregate.csv", results)
        with open(out / "metadata.json", "w") as fh:
            json.dump(metadata(spec, results), fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing experiment output under {out}: {exc}") from exc


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def write_trace(path, batch: RunBatch, r: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "arm", "loss", "cum_loss", "cum_regret"])
        for k, t in enumerate(batch.t):
            w.writerow([int(t), int(batch.arm[r, k]), _fmt(batch.loss[r, k]),
                        _fmt(batch.cum_loss[r, k]), _fmt(batch.cum_regret[r, k])])


def write_aggregate(path, results: dict[str, LearnerResult]):
    names = list(results)
    t = results[names[0]].t
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{n}_{col}" for n in names for col in ("mean_regret", "stderr")])
        for k, tk in enumerate(t):
            row = [int(tk)]
            for n in names:
                row += [_fmt(results[n].mean_regret[k]), _fmt(results[n].stderr[k])]
            w.writerow(row)


def read_trace(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def metadata(spec: ExperimentSpec, results) -> dict:
    sched = spec.graph_schedule
    stats = None
    if sched.fixed:
        try:
            stats = graph_stats(sched.graph).to_dict()
        except CapacityError:
            stats = None
    return {
        "seed": spec.seed,
        "horizon": spec.horizon,
        "replicates": spec.replicates,
        "record_stride": spec.record_stride,
        "num_arms": spec.num_arms,
        "environment": spec.environment.kind,
        "graph_stats": stats,
        "spec_hash": spec.config_hash(),
        "learners": {
            name: {"algorithm": ls.algorithm, "config_hash": results[name].config_hash,
                   "config": vars(ls.config)}
            for ls in spec.learners for name in [ls.name]
        },
        "spec": spec.raw,
    }


__all__ = [
    "ADVERSARIAL",
    "ExperimentSpec",
    "InvariantError",
    "LearnerResult",
    "load_spec",
    "run_experiment",
    "spec_from_obj",
]
