import csv
import io
import json
import math

import pytest

import decpf

SMALL = {
    "learner": {"episodes": 60, "eval_interval": 20, "grid_resolution": 5},
    "evaluation": {"rollouts": 20},
    "variants": ["exact", "particle:20"],
    "runs": 3,
    "seed": 7,
}


def test_reward_examples():
    assert decpf.smartgrid_reward([0, 1], [0, 0]) == 0.0
    assert decpf.smartgrid_reward([0, 0], [0, 0]) == pytest.approx(-math.log(2.0), abs=1e-15)
    assert decpf.smartgrid_reward([0, 1], [1, 2]) == pytest.approx(-0.2, abs=1e-15)


def test_exact_update_matches_hand_bayes():
    kernels = [[[0.9, 0.1], [0.2, 0.8]], [[0.5, 0.5], [0.3, 0.7]]]
    pi, gamma, a = [0.3, 0.7], [0, 1], 1
    # Only state 1 plays action 1, so the posterior is the kernel row of state 1.
    assert decpf.exact_update(pi, gamma, a, kernels) == pytest.approx([0.3, 0.7], abs=1e-15)
    # Both states play action 0: plain propagation.
    want = [0.3 * 0.9 + 0.7 * 0.2, 0.3 * 0.1 + 0.7 * 0.8]
    assert decpf.exact_update(pi, [0, 0], 0, kernels) == pytest.approx(want, abs=1e-15)


def test_particle_update_approaches_exact():
    kernels = [[[0.9, 0.1], [0.2, 0.8]], [[0.5, 0.5], [0.3, 0.7]]]
    want = decpf.exact_update([0.4, 0.6], [0, 0], 0, kernels)
    got = decpf.particle_update([0.4, 0.6], [0, 0], 0, kernels, 20000, 3)
    assert sum(abs(g - w) for g, w in zip(got, want)) / 2 < 0.02
    assert got == decpf.particle_update([0.4, 0.6], [0, 0], 0, kernels, 20000, 3)


def test_hoeffding_example():
    zeta, conf = decpf.hoeffding(100, 0.1, 1.0)
    assert zeta == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert conf == pytest.approx(1.0 - math.exp(-2.0), rel=1e-14)


def test_accumulated_error_series_form():
    K, eps, dR, d, T, t, beta = 200, 0.05, 1.0, 0.8, 7, 2, 0.1
    eta = decpf.eta_error(K, eps, dR, d, T, t, beta)
    series = eta + sum(d**k * (eta + beta) for k in range(1, T - t))
    assert decpf.accumulated_error(K, eps, dR, d, T, t, beta) == pytest.approx(series, rel=1e-13)


def test_bad_arguments_raise_value_error():
    with pytest.raises(ValueError):
        decpf.hoeffding(0, 0.1, 1.0)
    with pytest.raises(ValueError):
        decpf.resolve_config('{"learner": {"alpha": 2}}')
    with pytest.raises(ValueError):
        decpf.resolve_config('{"no_such_key": 1}')


def test_resolve_config_fills_defaults():
    cfg = json.loads(decpf.resolve_config("{}"))
    assert cfg["runs"] == 10
    assert cfg["learner"]["episodes"] == 5000


def test_baseline_value():
    value, cell = decpf.solve_baseline()
    assert value == pytest.approx(-1.5717326122799729, abs=1e-12)
    assert isinstance(cell, int)


def test_returns_csv_schema():
    text = decpf.returns_csv(json.dumps(SMALL))
    lines = text.splitlines()
    assert lines[0] == decpf.RETURNS_HEADER == "episode,variant,mean_return,stderr,baseline"
    rows = list(csv.DictReader(io.StringIO(text)))
    baseline, _ = decpf.solve_baseline(json.dumps(SMALL))
    episodes = [20, 40, 60]
    assert len(rows) == len(episodes) * 2
    assert {r["variant"] for r in rows} == {"exact", "pf_K20"}
    for variant in ("exact", "pf_K20"):
        got = [int(r["episode"]) for r in rows if r["variant"] == variant]
        assert got == episodes
    lo = -(0.2 + math.log(2.0)) / (1 - 0.9)
    for r in rows:
        assert lo - 1e-9 <= float(r["mean_return"]) <= 1e-12
        assert float(r["stderr"]) >= 0.0
        assert float(r["baseline"]) == baseline
    assert text == decpf.returns_csv(json.dumps(SMALL))


def test_returns_csv_zero_episodes_reports_initial_policy():
    cfg = json.loads(json.dumps(SMALL))
    cfg["learner"]["episodes"] = 0
    rows = list(csv.DictReader(io.StringIO(decpf.returns_csv(json.dumps(cfg)))))
    assert [(r["episode"], r["variant"]) for r in rows] == [("0", "exact"), ("0", "pf_K20")]


def test_run_experiment_writes_artifacts(tmp_path):
    cfg = dict(SMALL, output=str(tmp_path / "out"))
    decpf.run_experiment(json.dumps(cfg), "full")
    out = tmp_path / "out"
    for name in ("config.resolved.json", "baseline.txt", "returns.csv", "bounds.csv",
                 "q_table.csv", "v_table.csv", "policy.csv"):
        assert (out / name).is_file(), name
    assert (out / "returns.csv").read_text() == decpf.returns_csv(json.dumps(SMALL))
    with pytest.raises(ValueError):
        decpf.run_experiment(json.dumps(cfg), "nope")


def test_run_seed_distinct():
    seeds = {decpf.run_seed(0, v, r) for v in range(4) for r in range(10)}
    assert len(seeds) == 40
