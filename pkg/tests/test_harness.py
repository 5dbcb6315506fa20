import json

import numpy as np
import pytest

from graphbandit.harness import load_spec, read_trace, recorded_rounds, run_experiment, spec_from_obj
from graphbandit.verify import InvariantError


def _obj(tmp_path, **kw):
    obj = {
        "graph": {"family": "cliques", "params": {"m": 2, "s": 3}},
        "environment": {"type": "stochastic", "means": [0.2, 0.4, 0.4, 0.5, 0.6, 0.7]},
        "learners": [{"algorithm": "exp3g++"}, {"algorithm": "exp3"}],
        "horizon": 400,
        "replicates": 3,
        "seed": 5,
        "output_dir": str(tmp_path / "out"),
    }
    obj.update(kw)
    return obj


def test_boundary_horizon(tmp_path):
    spec = spec_from_obj(_obj(tmp_path, horizon=7, replicates=1))
    res = run_experiment(spec)
    trace = read_trace(tmp_path / "out" / "runs" / "exp3g__" / "run_0000.csv")
    assert trace["t"].tolist() == list(range(1, 8))
    assert trace["arm"][:6].tolist() == [0, 1, 2, 3, 4, 5]
    assert res["exp3"].t.tolist() == list(range(1, 8))


def test_same_seed_gives_identical_files(tmp_path):
    run_experiment(spec_from_obj(_obj(tmp_path / "a")))
    run_experiment(spec_from_obj(_obj(tmp_path / "b")))
    for rel in ["aggregate.csv", "runs/exp3g__/run_0002.csv", "runs/exp3/run_0000.csv"]:
        assert (tmp_path / "a" / "out" / rel).read_bytes() == (tmp_path / "b" / "out" / rel).read_bytes()


def test_worker_count_does_not_change_results(tmp_path):
    run_experiment(spec_from_obj(_obj(tmp_path / "a")), workers=1)
    run_experiment(spec_from_obj(_obj(tmp_path / "b")), workers=2)
    assert (tmp_path / "a/out/aggregate.csv").read_bytes() == (tmp_path / "b/out/aggregate.csv").read_bytes()


def test_zero_gap_environment(tmp_path):
    res = run_experiment(spec_from_obj(_obj(tmp_path, environment={"means": [0.4] * 6})))
    for r in res.values():
        assert (r.mean_regret == 0).all()


def test_aggregate_equals_mean_of_traces(tmp_path):
    run_experiment(spec_from_obj(_obj(tmp_path)))
    out = tmp_path / "out"
    rows = (out / "aggregate.csv").read_text().splitlines()
    header = rows[0].split(",")
    agg = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    for name, d in [("exp3g++", "exp3g__"), ("exp3", "exp3")]:
        runs = np.array([read_trace(out / "runs" / d / f"run_{i:04d}.csv")["cum_regret"] for i in range(3)])
        col = header.index(f"{name}_mean_regret")
        assert np.array_equal(agg[:, col], runs.mean(axis=0))
        se = runs.std(axis=0, ddof=1) / np.sqrt(3)
        assert agg[:, header.index(f"{name}_stderr")] == pytest.approx(se, rel=1e-12, abs=1e-15)


def test_trace_fields_consistent(tmp_path):
    run_experiment(spec_from_obj(_obj(tmp_path)))
    tr = read_trace(tmp_path / "out/runs/exp3g__/run_0001.csv")
    assert np.all(np.diff(tr["t"]) > 0)
    assert np.all(np.diff(tr["cum_regret"]) >= 0)
    assert tr["cum_loss"] == pytest.approx(np.cumsum(tr["loss"]))
    gaps = np.array([0.2, 0.4, 0.4, 0.5, 0.6, 0.7]) - 0.2
    assert tr["cum_regret"] == pytest.approx(np.cumsum(gaps[tr["arm"].astype(int)]))


def test_adversarial_file_run(tmp_path):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "losses.csv", rng.random((50, 3)), delimiter=",")
    obj = {
        "graph": {"K": 3, "edges": [[0, 1], [1, 2]]},
        "environment": {"type": "adversarial", "file": "losses.csv"},
        "horizon": 50,
        "replicates": 2,
        "output_dir": "out",
    }
    (tmp_path / "spec.json").write_text(json.dumps(obj))
    res = run_experiment(load_spec(tmp_path / "spec.json"))
    assert (tmp_path / "out/aggregate.csv").exists()
    assert res["exp3g++"].mean_regret.shape == (50,)
    obj["horizon"] = 51
    with pytest.raises(ValueError):
        spec_from_obj(obj, tmp_path)


def test_config_hash_tracks_every_field(tmp_path):
    base = spec_from_obj(_obj(tmp_path))
    h = base.config_hash()
    for change in [{"seed": 6}, {"horizon": 401}, {"replicates": 4}, {"record_stride": 2},
                   {"environment": {"means": [0.2, 0.4, 0.4, 0.5, 0.6, 0.8]}}]:
        assert spec_from_obj(_obj(tmp_path, **change)).config_hash() != h
    a = base.config_hash(base.learners[0])
    b = spec_from_obj(_obj(tmp_path, learners=[{"algorithm": "exp3g++", "beta": 400}])).config_hash(base.learners[0])
    assert a != b
    meta_h = spec_from_obj(_obj(tmp_path, learners=[{"gamma": 5}]))
    assert meta_h.config_hash(meta_h.learners[0]) != a


def test_metadata(tmp_path):
    run_experiment(spec_from_obj(_obj(tmp_path)))
    meta = json.loads((tmp_path / "out/metadata.json").read_text())
    assert meta["graph_stats"] == {"alpha": 2, "alpha_strong": 2, "mas": 2, "is_undirected": True}
    assert meta["learners"]["exp3g++"]["config"]["gamma"] == 4.0
    assert len(meta["spec_hash"]) == 16


def test_stride(tmp_path):
    assert recorded_rounds(25, 10).tolist() == [10, 20, 25]
    assert spec_from_obj(_obj(tmp_path, horizon=20_000)).record_stride == 10
    assert spec_from_obj(_obj(tmp_path, horizon=10_000)).record_stride == 1
    res = run_experiment(spec_from_obj(_obj(tmp_path, record_stride=7)))
    full = run_experiment(spec_from_obj(_obj(tmp_path / "f", record_stride=1)))
    t = res["exp3g++"].t
    assert t.tolist() == recorded_rounds(400, 7).tolist()
    assert np.array_equal(res["exp3g++"].mean_regret, full["exp3g++"].mean_regret[t - 1])


def test_debug_sidecar(tmp_path):
    run_experiment(spec_from_obj(_obj(tmp_path, debug=True, horizon=30, replicates=1)))
    lines = (tmp_path / "out/debug_exp3g__.csv").read_text().splitlines()
    assert lines[0].startswith("t,replicate,exploration_set")
    assert len(lines) == 1 + 30 - 6


def test_invalid_specs(tmp_path):
    with pytest.raises(ValueError, match="horizon"):
        spec_from_obj(_obj(tmp_path, horizon=6))
    with pytest.raises(ValueError, match="arms"):
        spec_from_obj(_obj(tmp_path, environment={"means": [0.1, 0.2]}))
    with pytest.raises(ValueError, match="algorithm"):
        spec_from_obj(_obj(tmp_path, learners=[{"algorithm": "ucb"}]))
    with pytest.raises(ValueError, match="duplicate"):
        spec_from_obj(_obj(tmp_path, learners=[{}, {}]))
    with pytest.raises(ValueError, match="replicates"):
        spec_from_obj(_obj(tmp_path, replicates=0))


def test_invariant_violation_fails_experiment(tmp_path, monkeypatch):
    import graphbandit.learner as learner

    monkeypatch.setattr(learner, "mix", lambda q, eps: q)
    with pytest.raises(InvariantError):
        run_experiment(spec_from_obj(_obj(tmp_path, output_dir=None)))


def test_threads_env(monkeypatch):
    from graphbandit.harness import worker_count

    monkeypatch.setenv("GRAPHBANDIT_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
