import csv
import hashlib
import json

import numpy as np
import pytest

from ftconsensus import defaults
from ftconsensus.cli import main, read_config
from ftconsensus.harness import (ConfigError, ExperimentConfig, cmd_single, cmd_sweep, config_for,
                                 summarize, trial_seed)


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def header(path):
    return path.read_text().splitlines()[0]


def test_default_grids():
    assert len(config_for("sweep").node_sizes) * len(config_for("sweep").tau_bars) == 36
    dc = config_for("dc-scale")
    assert len(dc.node_sizes) * len(dc.tau_bars) == 25
    assert len(config_for("dc-scale", large=True).node_sizes) * 5 == 30
    assert config_for("sweep").trials == 10 and config_for("dc-scale").trials == 5
    assert config_for("single").epsilon == 1e-5 and config_for("single").max_iterations == 4000


def test_invalid_config_names_field():
    with pytest.raises(ConfigError, match="trials"):
        config_for("sweep", trials=0)
    with pytest.raises(ConfigError, match="tau_bar"):
        config_for("sweep", tau_bars=[])
    with pytest.raises(ConfigError, match="mode"):
        ExperimentConfig(mode="nope").validate()


def test_trial_seed_independent_of_grid():
    assert trial_seed(0, 20, 5, 3) == trial_seed(0, 20, 5, 3)
    assert len({trial_seed(0, 20, 5, k) for k in range(10)}) == 10
    assert trial_seed(0, 20, 5, 3) != trial_seed(1, 20, 5, 3)


def test_single_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["single", "--out", str(a)]) == 0
    assert main(["single", "--out", str(b)]) == 0
    assert header(a / "stats.csv") == "trial_id,n,tau_bar,trial,diameter,rounds,ticks,converged,min,max,mean,window"
    assert header(a / "trace.csv") == "tick,node,y,z,mu,M,m,flag"
    assert header(a / "timing.csv") == "trial_id,n,tau_bar,trial,wall_time"
    assert (a / "graph.dot").read_text().startswith("digraph G {\n  0 -> 1;")
    for name in ("trace.csv", "stats.csv", "graph.dot", "manifest.json"):
        assert digest(a / name) == digest(b / name)
    stats = rows(a / "stats.csv")[0]
    assert int(stats["rounds"]) >= 2 and int(stats["ticks"]) % 24 == 0
    assert "out" not in json.loads((a / "manifest.json").read_text())["config"]


def test_single_large_epsilon_stops_after_one_full_round(tmp_path):
    res = cmd_single(config_for("single", epsilon=1.0, out=str(tmp_path)))
    # the first informative check is at the second boundary; a wide initial
    # spread on the ring can push the pass to the third
    assert res.rows[0]["rounds"] in (2, 3)


def test_cap_exit_code(tmp_path):
    assert main(["single", "--max-iters", "30", "--out", str(tmp_path)]) == 2
    assert rows(tmp_path / "stats.csv")[0]["converged"] == "0"


def test_usage_error_exit_code(tmp_path, capsys):
    assert main(["sweep", "--trials", "0", "--out", str(tmp_path)]) == 1
    assert "trials" in capsys.readouterr().err


def test_config_overrides_flags(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[experiment]\ntau_bar = 2\nnodes = 5\nepsilon = 1e-3\n")
    assert read_config(ini) == {"tau_bars": [2], "node_sizes": [5], "epsilon": 1e-3}
    out = tmp_path / "o"
    assert main(["single", "--tau-bar", "7", "--seed", "4", "--config", str(ini), "--out", str(out)]) == 0
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["tau_bars"] == [2] and cfg["seed"] == 4 and cfg["epsilon"] == 1e-3
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\ncolour = red\n")
    assert main(["single", "--config", str(bad), "--out", str(out)]) == 1


def test_sweep_reproducible_and_schema(tmp_path):
    args = ["sweep", "--nodes", "20,30", "--tau-bar", "1,4", "--trials", "3", "--seed", "11"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trials.csv", "summary.csv", "manifest.json"):
        assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / name)
    assert header(tmp_path / "a" / "summary.csv") == "n,tau_bar,trials,converged,diameter,rounds,ticks,min,max,mean,window"
    summary = rows(tmp_path / "a" / "summary.csv")
    assert len(summary) == 4 and all(r["trials"] == "3" for r in summary)
    trials = rows(tmp_path / "a" / "trials.csv")
    for s in summary:
        mine = [float(r["rounds"]) for r in trials if (r["n"], r["tau_bar"]) == (s["n"], s["tau_bar"])]
        assert float(s["rounds"]) == pytest.approx(np.mean(mine))


def test_workers_do_not_change_results(tmp_path):
    base = dict(node_sizes=[20], tau_bars=[1, 3], trials=2, seed=5)
    a = cmd_sweep(config_for("sweep", out=str(tmp_path / "a"), **base))
    b = cmd_sweep(config_for("sweep", out=str(tmp_path / "b"), workers=2, **base))
    assert a.rows == b.rows
    assert digest(tmp_path / "a" / "trials.csv") == digest(tmp_path / "b" / "trials.csv")


def test_single_trial_average_equals_trial(tmp_path):
    res = cmd_sweep(config_for("sweep", node_sizes=[20], tau_bars=[2], trials=1, out=str(tmp_path)))
    assert float(res.summary[0]["rounds"]) == res.rows[0]["rounds"]
    assert summarize(res.rows) == res.summary


def test_violations_outputs(tmp_path):
    assert main(["violations", "--trials", "4", "--out", str(tmp_path)]) == 0
    assert header(tmp_path / "violations.csv") == "n,tau_bar,trial,node,tick,direction,value,window_extremum"
    assert header(tmp_path / "summary.csv") == "n,tau_bar,horizon,trial,seed,diameter,ticks,above_max,below_min"
    summary = rows(tmp_path / "summary.csv")
    assert len(summary) == 4 and all(r["diameter"] == str(defaults.VIOLATION_DIAMETER) for r in summary)
    assert all(int(r["above_max"]) >= 0 and int(r["below_min"]) >= 0 for r in summary)


def test_violations_tau_zero_max_series_clean(tmp_path):
    out = tmp_path / "v"
    assert main(["violations", "--tau-bar", "0", "--trials", "3", "--series", "M", "--out", str(out)]) == 0
    assert all(int(r["above_max"]) == 0 for r in rows(out / "summary.csv"))


def test_unreachable_diameter_pair_is_skipped(tmp_path):
    assert main(["violations", "--trials", "1", "--diameter", "1", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert len(manifest["skipped"]) == 1 and "diameter 1" in manifest["skipped"][0]
    assert len(rows(tmp_path / "summary.csv")) == 0


def test_downsample_keeps_boundaries(tmp_path):
    main(["sweep", "--nodes", "20", "--tau-bar", "1", "--trials", "1", "--keep-traces", "--downsample",
          "--out", str(tmp_path)])
    ticks = {int(r["tick"]) for r in rows(tmp_path / "trace_0.csv")}
    stats = rows(tmp_path / "trials.csv")[0]
    L = 2 * int(stats["diameter"])
    assert ticks == {0} | set(range(L, int(stats["ticks"]) + 1, L))


def test_schedule_subcommand(tmp_path, capsys):
    p = tmp_path / "inst.ini"
    p.write_text("[node.0]\nclock = 100\noccupied = 10\njobs = 1:60\n[node.1]\nclock = 300\noccupied = 30\n")
    assert main(["schedule", str(p)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "node,capacity,u,w_star,utilization_fraction"
    assert [float(x) for x in out[2].split(",")[3:]] == pytest.approx([45.0, 0.25])


def test_short_horizon_is_configurable(tmp_path):
    assert main(["violations", "--trials", "2", "--horizon", "0", "--out", str(tmp_path)]) == 0
    summary = rows(tmp_path / "summary.csv")
    assert all(r["horizon"] == "0" for r in summary)
    assert sum(int(r["above_max"]) + int(r["below_min"]) for r in summary) > 0


def test_bundled_five_node_config(tmp_path, monkeypatch):
    import pathlib
    monkeypatch.chdir(pathlib.Path(__file__).resolve().parents[1])
    out = tmp_path / "five"
    assert main(["single", "--config", "demos/five_node.ini", "--out", str(out)]) == 0
    stats = rows(out / "stats.csv")[0]
    assert int(stats["rounds"]) >= 2 and int(stats["diameter"]) == 4 and int(stats["ticks"]) % 24 == 0
