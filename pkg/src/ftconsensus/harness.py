"""Experiment runners: the five-node example, random-graph sweeps, the
data-centre scale grid and the monotonicity-violation scan.

Every runner writes into one output directory with fixed file names, so a
rerun with the same seeds reproduces every file except ``timing.csv``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import defaults
from .consensus import TerminationConfig, run_async_finite_time
from .delays import DelayModel
from .graph import (Digraph, GraphGenerationError, diameter, five_node_example,
                    generate_random_digraph, is_strongly_connected, read_edge_list, write_dot)
from .simkernel import converge_stats, detect_violations, violations_csv
from .trace import write_trace_csv

logger = logging.getLogger(__name__)

MODES = ("single", "sweep", "dc-scale", "violations")
INIT_KINDS = ("ramp", "uniform", "spike")

STATS_HEADER = ("trial_id", "n", "tau_bar", "trial", "diameter", "rounds", "ticks",
                "converged", "min", "max", "mean", "window")
SUMMARY_HEADER = ("n", "tau_bar", "trials", "converged", "diameter", "rounds", "ticks",
                  "min", "max", "mean", "window")
TIMING_HEADER = ("trial_id", "n", "tau_bar", "trial", "wall_time")
VIOLATION_SUMMARY_HEADER = ("n", "tau_bar", "horizon", "trial", "seed", "diameter", "ticks",
                            "above_max", "below_min")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str = "single"
    node_sizes: list[int] = field(default_factory=lambda: [defaults.SINGLE_NODES])
    tau_bars: list[int] = field(default_factory=lambda: [defaults.SINGLE_TAU_BAR])
    trials: int = 1
    epsilon: float = defaults.EPSILON
    max_iterations: int = defaults.MAX_ITERATIONS
    seed: int = 0
    out: str = "out"
    density: float | None = None
    degree: float | None = None
    max_diameter: int | None = None
    diameter: int | None = None
    downsample: bool = False
    init: str = defaults.SWEEP_INIT
    loads: list[float] | None = None
    delay_distribution: str = "uniform"
    edges: str | None = None
    workers: int = 1
    keep_traces: bool = False
    series: str = "mu"
    horizon: int | None = None
    large: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        if not self.node_sizes or any(n < 2 for n in self.node_sizes):
            raise ConfigError("nodes: need a non-empty list of sizes >= 2")
        if not self.tau_bars or any(t < 0 for t in self.tau_bars):
            raise ConfigError("tau_bar: need a non-empty list of nonnegative integers")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon: must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iters: must be positive")
        if self.density is not None and not 0 < self.density <= 1:
            raise ConfigError("density: must lie in (0, 1]")
        if self.degree is not None and not self.degree > 0:
            raise ConfigError("degree: must be positive")
        if self.init not in INIT_KINDS:
            raise ConfigError(f"init: expected one of {INIT_KINDS}, got {self.init!r}")
        if self.loads is not None and len(self.node_sizes) == 1 and len(self.loads) != self.node_sizes[0]:
            raise ConfigError(f"loads: need {self.node_sizes[0]} values, got {len(self.loads)}")
        if self.series not in ("mu", "M", "m", "y", "z"):
            raise ConfigError(f"series: expected mu, M, m, y or z, got {self.series!r}")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError("horizon: must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        return self


def config_for(mode: str, **overrides) -> ExperimentConfig:
    """Mode defaults with ``overrides`` applied (``None`` values are ignored)."""
    base = {
        "single": dict(node_sizes=[defaults.SINGLE_NODES], tau_bars=[defaults.SINGLE_TAU_BAR],
                       trials=1),
        "sweep": dict(node_sizes=list(defaults.SWEEP_NODES), tau_bars=list(defaults.SWEEP_TAU_BARS),
                      trials=defaults.SWEEP_TRIALS, density=defaults.SWEEP_DENSITY,
                      init=defaults.SWEEP_INIT),
        "dc-scale": dict(node_sizes=list(defaults.DC_NODES), tau_bars=list(defaults.DC_TAU_BARS),
                         trials=defaults.DC_TRIALS, degree=defaults.DC_DEGREE,
                         max_diameter=defaults.DC_MAX_DIAMETER, init=defaults.DC_INIT),
        "violations": dict(node_sizes=list(defaults.VIOLATION_NODES),
                           tau_bars=list(defaults.VIOLATION_TAU_BARS),
                           trials=defaults.VIOLATION_TRIALS, density=defaults.VIOLATION_DENSITY,
                           diameter=defaults.VIOLATION_DIAMETER),
    }
    if mode not in base:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
    params = dict(base[mode], mode=mode)
    params.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**params)
    if mode == "dc-scale" and cfg.large and defaults.DC_NODES_LARGE not in cfg.node_sizes:
        cfg.node_sizes = list(cfg.node_sizes) + [defaults.DC_NODES_LARGE]
    return cfg.validate()


def trial_seed(master: int, n: int, tau_bar: int, trial: int) -> int:
    """Seed for one grid cell trial; independent of grid order and worker count."""
    return int(np.random.SeedSequence([master, n, tau_bar, trial]).generate_state(1, np.uint64)[0])


def _sub_seeds(seed: int) -> tuple[int, int, int]:
    g, d, x = np.random.SeedSequence(seed).generate_state(3, np.uint64)
    return int(g), int(d), int(x)


def _density(cfg: ExperimentConfig, n: int) -> float:
    if cfg.degree is not None:
        return min(1.0, cfg.degree / (n - 1))
    return cfg.density if cfg.density is not None else defaults.SWEEP_DENSITY


def make_graph(cfg: ExperimentConfig, n: int, seed: int) -> Digraph:
    if cfg.edges:
        g = read_edge_list(cfg.edges)
        if g.n != n:
            raise ConfigError(f"edges: file has {g.n} nodes but nodes={n}")
        if not is_strongly_connected(g):
            raise ConfigError("edges: graph is not strongly connected")
        return g
    if cfg.mode == "single" and n == 5 and cfg.density is None and cfg.degree is None:
        return five_node_example()
    return generate_random_digraph(n, _density(cfg, n), cfg.max_diameter, seed=seed)


def make_graph_with_diameter(cfg: ExperimentConfig, n: int, seed: int, target: int,
                             attempts: int = 200) -> Digraph:
    """Redraw until the diameter equals ``target`` exactly."""
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(attempts):
        g = generate_random_digraph(n, _density(cfg, n), seed=int(child.generate_state(1, np.uint64)[0]))
        if diameter(g) == target:
            return g
    raise GraphGenerationError(f"no graph with n={n} and diameter {target} in {attempts} draws")


def initial_loads(cfg: ExperimentConfig, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-node workload ``y0`` with equal unit capacities ``z0``.

    ``ramp`` is ``1, 2, ..., n``; ``uniform`` draws utilisation fractions in
    ``[0, 1)``; ``spike`` puts half the total capacity as work on node 0.
    """
    if cfg.loads is not None:
        y = np.asarray(cfg.loads, dtype=float)
    elif cfg.init == "ramp":
        y = np.arange(1, n + 1, dtype=float)
    elif cfg.init == "uniform":
        y = np.random.default_rng(seed).random(n)
    else:
        y = np.zeros(n)
        y[0] = 0.5 * n
    return y, np.ones(n)


def _trace_mode(cfg: ExperimentConfig, n: int, wanted: bool) -> str:
    if not wanted:
        return "none"
    if cfg.downsample:
        return "boundary"
    if 5 * 8 * n * (cfg.max_iterations + 1) > defaults.TRACE_MEMORY_BUDGET:
        logger.warning("full trace for n=%d would exceed the memory budget; keeping round "
                       "boundaries only", n)
        return "boundary"
    return "full"


@dataclass
class TrialOutcome:
    row: dict
    wall_time: float
    trace: object = None
    graph: Digraph | None = None
    violations: list = field(default_factory=list)
    error: str | None = None


def run_cell_trial(cfg: ExperimentConfig, n: int, tau_bar: int, trial: int,
                   want_trace: bool = False) -> TrialOutcome:
    seed = trial_seed(cfg.seed, n, tau_bar, trial)
    gseed, dseed, xseed = _sub_seeds(seed)
    t0 = time.perf_counter()
    try:
        if cfg.mode == "violations" and cfg.diameter is not None and not cfg.edges:
            g = make_graph_with_diameter(cfg, n, gseed, cfg.diameter)
        else:
            g = make_graph(cfg, n, gseed)
    except GraphGenerationError as exc:
        return TrialOutcome({}, 0.0, error=str(exc))
    D = diameter(g)
    y0, z0 = initial_loads(cfg, n, xseed)
    delays = DelayModel(tau_bar, cfg.delay_distribution, dseed)
    tc = TerminationConfig.asynchronous(D, tau_bar, cfg.epsilon, cfg.max_iterations)
    mode = _trace_mode(cfg, n, want_trace or cfg.mode == "violations")
    if cfg.mode == "violations":
        mode = "full"
    res = run_async_finite_time(g, y0, z0, delays, tc, trace_mode=mode)
    wall = time.perf_counter() - t0
    stats = converge_stats(res.trace)
    row = dict(n=n, tau_bar=tau_bar, trial=trial, diameter=D, rounds=res.rounds,
               ticks=res.trace.last_tick, converged=int(res.converged),
               min="" if stats is None else stats.min, max="" if stats is None else stats.max,
               mean="" if stats is None else repr(stats.mean),
               window="" if stats is None else stats.window)
    out = TrialOutcome(row, wall, graph=g)
    if cfg.mode == "violations":
        horizon = tau_bar if cfg.horizon is None else cfg.horizon
        out.violations = detect_violations(res.trace, horizon, series=cfg.series)
        row["seed"] = seed
    if mode != "none":
        out.trace = res.trace
    return out


def _grid(cfg: ExperimentConfig) -> list[tuple[int, int, int]]:
    return [(n, t, k) for n in cfg.node_sizes for t in cfg.tau_bars for k in range(cfg.trials)]


def _run_grid(cfg: ExperimentConfig, want_traces: bool = False) -> dict[tuple[int, int, int], TrialOutcome]:
    cells = _grid(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            futs = {c: pool.submit(run_cell_trial, cfg, *c, want_traces) for c in cells}
            return {c: f.result() for c, f in futs.items()}
    results = {}
    for c in cells:
        results[c] = run_cell_trial(cfg, *c, want_traces)
        r = results[c]
        if r.error is None:
            logger.info("n=%d tau=%d trial=%d D=%d rounds=%d ticks=%d (%.2fs)", *c,
                        r.row["diameter"], r.row["rounds"], r.row["ticks"], r.wall_time)
    return results


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r.get(h, "") if isinstance(r, dict) else r[i] for i, h in enumerate(header)])
    return buf.getvalue()


def _write_manifest(cfg: ExperimentConfig, out: Path, extra: dict | None = None) -> None:
    # the output path is where the manifest lives, not a parameter of the run
    data = {"config": {k: v for k, v in asdict(cfg).items() if k != "out"}}
    if extra:
        data.update(extra)
    (out / "manifest.json").write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def _stats_rows(results) -> list[dict]:
    rows = []
    for tid, (cell, r) in enumerate(sorted(results.items())):
        if r.error is None:
            rows.append(dict(r.row, trial_id=tid))
    return rows


def _timing_rows(results) -> list[dict]:
    return [dict(trial_id=tid, n=c[0], tau_bar=c[1], trial=c[2], wall_time=repr(r.wall_time))
            for tid, (c, r) in enumerate(sorted(results.items()))]


@dataclass
class SweepResult:
    rows: list[dict]
    summary: list[dict]
    mean_wall_time: dict[tuple[int, int], float]
    skipped: list[str]
    all_converged: bool


def summarize(rows: list[dict]) -> list[dict]:
    """Average every numeric column per ``(n, tau_bar)`` pair."""
    pairs: dict[tuple[int, int], list[dict]] = {}
    for r in rows:
        pairs.setdefault((r["n"], r["tau_bar"]), []).append(r)
    out = []
    for (n, t), group in sorted(pairs.items()):
        s = dict(n=n, tau_bar=t, trials=len(group), converged=sum(r["converged"] for r in group))
        for col in ("diameter", "rounds", "ticks", "min", "max", "mean", "window"):
            vals = [float(r[col]) for r in group if r[col] != ""]
            s[col] = repr(float(np.mean(vals))) if vals else ""
        out.append(s)
    return out


def _sweep_like(cfg: ExperimentConfig) -> SweepResult:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = _run_grid(cfg, want_traces=cfg.keep_traces)
    skipped = [f"n={c[0]} tau_bar={c[1]} trial={c[2]}: {r.error}"
               for c, r in sorted(results.items()) if r.error is not None]
    for s in skipped:
        logger.warning("skipped %s", s)
    rows = _stats_rows(results)
    summary = summarize(rows)
    walls: dict[tuple[int, int], list[float]] = {}
    for c, r in results.items():
        if r.error is None:
            walls.setdefault(c[:2], []).append(r.wall_time)
    if cfg.keep_traces:
        for tid, (c, r) in enumerate(sorted(results.items())):
            if r.trace is not None:
                write_trace_csv(r.trace, out / f"trace_{tid}.csv")
    (out / "trials.csv").write_text(_csv(STATS_HEADER, rows))
    (out / "summary.csv").write_text(_csv(SUMMARY_HEADER, summary))
    (out / "timing.csv").write_text(_csv(TIMING_HEADER, _timing_rows(results)))
    _write_manifest(cfg, out, {"skipped": skipped})
    ok = all(r["converged"] for r in rows)
    return SweepResult(rows, summary, {k: float(np.mean(v)) for k, v in walls.items()}, skipped, ok)


def cmd_single(cfg: ExperimentConfig) -> SweepResult:
    """One trial per ``(n, tau_bar)``: trace, stats, graph and timing files."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for c in _grid(cfg):
        results[c] = run_cell_trial(cfg, *c, want_trace=True)
        if results[c].error is not None:
            raise ConfigError(results[c].error)
    rows = _stats_rows(results)
    multi = len(results) > 1
    for tid, (c, r) in enumerate(sorted(results.items())):
        suffix = f"_{tid}" if multi else ""
        write_trace_csv(r.trace, out / f"trace{suffix}.csv")
        write_dot(r.graph, out / f"graph{suffix}.dot")
    (out / "stats.csv").write_text(_csv(STATS_HEADER, rows))
    (out / "timing.csv").write_text(_csv(TIMING_HEADER, _timing_rows(results)))
    _write_manifest(cfg, out)
    return SweepResult(rows, summarize(rows), {c[:2]: r.wall_time for c, r in results.items()}, [],
                       all(r["converged"] for r in rows))


def cmd_sweep(cfg: ExperimentConfig) -> SweepResult:
    return _sweep_like(cfg)


def cmd_dc_scale(cfg: ExperimentConfig) -> SweepResult:
    return _sweep_like(cfg)


@dataclass
class ViolationScan:
    records: list[tuple[int, int, int, object]]
    summary: list[dict]
    skipped: list[str]
    all_converged: bool


def cmd_violations(cfg: ExperimentConfig) -> ViolationScan:
    """Run seeded trials and report every escape from the delayed-horizon extremum."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = _run_grid(cfg)
    records, summary, skipped = [], [], []
    for c, r in sorted(results.items()):
        if r.error is not None:
            skipped.append(f"n={c[0]} tau_bar={c[1]} trial={c[2]}: {r.error}")
            continue
        up = sum(v.direction == "above-max" for v in r.violations)
        summary.append(dict(n=c[0], tau_bar=c[1], horizon=c[1] if cfg.horizon is None else cfg.horizon,
                            trial=c[2], seed=r.row["seed"],
                            diameter=r.row["diameter"], ticks=r.row["ticks"],
                            above_max=up, below_min=len(r.violations) - up))
        records += [(c[0], c[1], c[2], v) for v in r.violations]
    body = violations_csv([v for *_, v in records]).splitlines()
    lines = ["n,tau_bar,trial," + body[0]]
    lines += [f"{n},{t},{k},{line}" for (n, t, k, _), line in zip(records, body[1:])]
    (out / "violations.csv").write_text("\n".join(lines) + "\n")
    (out / "summary.csv").write_text(_csv(VIOLATION_SUMMARY_HEADER, summary))
    (out / "timing.csv").write_text(_csv(TIMING_HEADER, _timing_rows(results)))
    _write_manifest(cfg, out, {"skipped": skipped})
    ok = all(results[c].row.get("converged", 1) for c in results if results[c].error is None)
    return ViolationScan(records, summary, skipped, ok)


COMMANDS = {"single": cmd_single, "sweep": cmd_sweep, "dc-scale": cmd_dc_scale,
            "violations": cmd_violations}
