"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py``.
"""

import hashlib
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from ftconsensus import defaults
from ftconsensus.consensus import (TerminationConfig, max_consensus_async, max_consensus_sync,
                                   run_async_finite_time, run_sync_finite_time)
from ftconsensus.delays import DelayModel
from ftconsensus.graph import diameter, five_node_example, generate_random_digraph
from ftconsensus.harness import cmd_dc_scale, cmd_single, cmd_sweep, cmd_violations, config_for
from ftconsensus.scheduler import (InfeasibleBalanceWarning, NodeResources, availability, local_cost,
                                   optimal_fraction, optimal_workloads)
from ftconsensus.simkernel import detect_violations

RESULTS: dict[int, tuple[bool, str]] = {}

RAMP = np.arange(1, 6, dtype=float)


def graph_set():
    """The 100 random strongly connected digraphs (n <= 50) shared by criteria 3 and 4."""
    rng = np.random.default_rng(2024)
    out = []
    for k in range(100):
        n = int(rng.integers(5, 51))
        dens = float(rng.uniform(0.05, 0.3))
        out.append(generate_random_digraph(n, dens, seed=k))
    return out


def five_node_ticks(tau_bar, seeds):
    g = five_node_example()
    cfg = TerminationConfig.asynchronous(4, tau_bar, defaults.EPSILON)
    runs = [run_async_finite_time(g, RAMP, np.ones(5), DelayModel(tau_bar, seed=s), cfg, trace_mode="none")
            for s in seeds]
    return runs


def criterion_1():
    t0 = time.perf_counter()
    runs = five_node_ticks(5, range(10))
    wall = (time.perf_counter() - t0) / len(runs)
    bad = []
    for s, r in enumerate(runs):
        if not (r.converged and r.termination_tick % 24 == 0):
            bad.append(f"seed {s}: tick {r.termination_tick}")
        elif len(set(r.trace.flag_tick.tolist())) != 1:
            bad.append(f"seed {s}: staggered flags")
        elif np.ptp(r.ratios) >= 1e-5 or np.max(np.abs(r.ratios - 3.0)) >= 1e-4:
            bad.append(f"seed {s}: ratios {r.ratios}")
    ok = not bad and wall < 1.0
    ticks = sorted({r.termination_tick for r in runs})
    return ok, f"ticks {ticks}, max|mu-3| {max(np.max(np.abs(r.ratios - 3)) for r in runs):.1e}, " \
               f"{wall:.2f}s/trial" + (f"; {bad}" if bad else "")


def criterion_2():
    t0 = time.perf_counter()
    seeds = range(20)
    t5 = np.mean([r.termination_tick for r in five_node_ticks(5, seeds)])
    t10 = np.mean([r.termination_tick for r in five_node_ticks(10, seeds)])
    wall = time.perf_counter() - t0
    ratio = t10 / t5
    return 1.2 <= ratio <= 2.5 and wall < 10, f"mean ticks {t5:.1f} -> {t10:.1f}, ratio {ratio:.2f}, {wall:.1f}s"


def criterion_3():
    t0 = time.perf_counter()
    bad = []
    for k, g in enumerate(graph_set()):
        D = diameter(g)
        rng = np.random.default_rng(k)
        y, z = rng.random(g.n) * 10, rng.uniform(0.5, 2.0, g.n)
        r = run_sync_finite_time(g, y, z, TerminationConfig.synchronous(D, 1e-8), trace_mode="none")
        target = y.sum() / z.sum()
        if not r.converged or r.termination_tick % D:
            bad.append(k)
        elif len(set(r.trace.flag_tick.tolist())) != 1 or np.ptp(r.ratios) >= 1e-8:
            bad.append(k)
        elif np.max(np.abs(r.ratios - target)) >= 1e-6:
            bad.append(k)
    wall = time.perf_counter() - t0
    return not bad and wall < 30, f"100 graphs, failures {bad}, {wall:.1f}s"


def criterion_4():
    worst = 0.0
    count = 0
    for k, g in enumerate(graph_set()):
        D = diameter(g)
        rng = np.random.default_rng(k)
        y, z = rng.random(g.n) * 10, rng.uniform(0.5, 2.0, g.n)
        for tau in (1, 5, 20):
            cfg = TerminationConfig.asynchronous(D, tau, defaults.EPSILON, defaults.MAX_ITERATIONS)
            t = run_async_finite_time(g, y, z, DelayModel(tau, seed=k), cfg, trace_mode="none").trace
            worst = max(worst, np.max(np.abs(t.mass_y / y.sum() - 1)), np.max(np.abs(t.mass_z / z.sum() - 1)))
            count += 1
    return worst < 1e-9, f"{count} runs, worst relative drift {worst:.1e}"


def criterion_5():
    late_sync = late_async = 0
    for k in range(100):
        rng = np.random.default_rng(k)
        g = generate_random_digraph(int(rng.integers(5, 60)), float(rng.uniform(0.03, 0.3)), seed=k)
        D = diameter(g)
        x = rng.normal(size=g.n)
        hs = max_consensus_sync(g, x, D)
        late_sync += not np.all(hs[-1] == x.max())
        tau = int(rng.integers(1, 21))
        ha = max_consensus_async(g, x, DelayModel(tau, seed=k), (1 + tau) * D, start_tick=int(rng.integers(0, 1000)))
        late_async += not np.all(ha[-1] == x.max())
    return late_sync == 0 and late_async == 0, \
        f"100 trials each, late sync {late_sync}, late async {late_async}"


def criterion_6():
    with tempfile.TemporaryDirectory() as d:
        res = cmd_dc_scale(config_for("dc-scale", node_sizes=[1000], tau_bars=[1], out=d))
    rounds = [r["rounds"] for r in res.rows]
    windows = [r["window"] for r in res.rows]
    diam = [r["diameter"] for r in res.rows]
    slow = max(res.mean_wall_time.values())
    ok = (len(res.rows) == 5 and all(r["converged"] for r in res.rows) and max(rounds) <= 3
          and sum(w == 0 for w in windows) >= 4 and max(diam) <= 2 and slow < 300)
    return ok, f"rounds {rounds}, windows {windows}, D {diam}, {slow:.1f}s/trial"


def criterion_7():
    with tempfile.TemporaryDirectory() as d:
        res = cmd_sweep(config_for("sweep", node_sizes=[20, 600], tau_bars=[10], out=d))
    mean = {r["n"]: float(r["rounds"]) for r in res.summary}
    counts = {r["n"]: r["trials"] for r in res.summary}
    return mean[600] <= mean[20] and counts == {20: 10, 600: 10}, \
        f"mean rounds n=20 {mean[20]:.1f}, n=600 {mean[600]:.1f}"


def criterion_8():
    rng = np.random.default_rng(8)
    worst_z = worst_bal = worst_sum = worst_fill = 0.0
    clamped = 0
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        cap = rng.uniform(0.1, 100.0, n)
        res = [NodeResources(c, occupied=f * c) for c, f in zip(cap, rng.uniform(0, 1, n))]
        rho_i = rng.dirichlet(np.ones(n)) * rng.uniform(0, 1) * sum(availability(r) for r in res)
        rho = rho_i.sum()
        z = optimal_fraction(res, rho_i)
        f = lambda x: sum(local_cost(x, r, p) for r, p in zip(res, rho_i))
        zg = minimize_scalar(f, bracket=(-1.0, 2.0), method="golden", tol=1e-12).x
        worst_z = max(worst_z, abs(z - zg))
        # closed-form workloads over every node
        pi = np.array([r.capacity for r in res])
        u = np.array([r.occupied for r in res])
        w = z * pi - u
        worst_bal = max(worst_bal, float(np.ptp((w + u) / pi)))
        worst_sum = max(worst_sum, abs(w.sum() - rho) / rho)
        # the water-filled variant must still hand out exactly rho
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InfeasibleBalanceWarning)
            sol = optimal_workloads(z, res)
        clamped += bool(sol.clamped)
        worst_fill = max(worst_fill, abs(sol.workloads.sum() - rho) / rho)
    ok = worst_z < 1e-6 and worst_bal < 1e-9 and worst_sum < 1e-9 and worst_fill < 1e-9
    return ok, f"|z-z_golden| {worst_z:.1e}, balance spread {worst_bal:.1e}, " \
               f"sum rel err {worst_sum:.1e}, water-filled sum rel err {worst_fill:.1e} ({clamped} clamped)"


def criterion_9():
    planted = np.array([[5, 1, 0]] * 3 + [[-1, 1, 0]] * 2 + [[-1, 6, 0]] * 3, dtype=float)
    got = [(v.node, v.tick, v.direction) for v in detect_violations(planted, tau_bar=1)]
    exact = got == [(0, 3, "below-min"), (1, 5, "above-max")]
    with tempfile.TemporaryDirectory() as d:
        scan = cmd_violations(config_for("violations", out=d))
        has_summary = (Path(d) / "summary.csv").exists()
    counts = [r["above_max"] + r["below_min"] for r in scan.summary]
    ok = exact and has_summary and len(scan.summary) + len(scan.skipped) == defaults.VIOLATION_TRIALS
    return ok, f"planted records {got}; scan of {len(counts)} seeds (D={defaults.VIOLATION_DIAMETER}), " \
               f"{sum(c > 0 for c in counts)} with violations, {sum(counts)} records"


def criterion_10():
    digests = []
    with tempfile.TemporaryDirectory() as d:
        for rep in ("a", "b"):
            out = Path(d) / rep
            cmd_single(config_for("single", seed=3, out=str(out)))
            sweep = out / "sweep"
            cmd_sweep(config_for("sweep", node_sizes=[30], tau_bars=[5], trials=2, seed=3,
                                 keep_traces=True, out=str(sweep)))
            files = [out / "trace.csv", out / "stats.csv", sweep / "trials.csv", sweep / "trace_0.csv",
                     sweep / "trace_1.csv"]
            digests.append([hashlib.sha256(f.read_bytes()).hexdigest() for f in files])
    return digests[0] == digests[1], f"{len(digests[0])} files, sha256 equal: {digests[0] == digests[1]}"


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 11)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = CRITERIA[number]()
    RESULTS[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for k, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    raise SystemExit(1 if failed else 0)
