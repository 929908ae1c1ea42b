"""Per-tick protocol traces and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TRACE_MODES = ("full", "boundary", "none")
TRACE_HEADER = ("tick", "node", "y", "z", "mu", "M", "m", "flag")


@dataclass
class SimTrace:
    """Everything recorded during one finite-time consensus run.

    Snapshot rows hold the state entering tick ``ticks[r]`` after that tick's
    round-boundary handling, so at a boundary ``M == m == mu`` (re-seeded) and
    ``flag`` already reflects the check.  The certificate values examined at
    each boundary are kept separately in ``boundary_M``/``boundary_m``.
    Sentinel ``M``/``m`` (before the first boundary) are stored as ``+inf`` and
    ``-inf`` and never enter arithmetic.
    """

    n: int
    round_length: int
    epsilon: float
    tau_bar: int = 0
    mode: str = "full"
    ticks: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    y: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    z: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    M: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    m: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    flag: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))
    mass_y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass_z: np.ndarray = field(default_factory=lambda: np.zeros(0))
    boundary_ticks: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    boundary_M: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    boundary_m: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    flag_tick: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    final_ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))
    termination_tick: int | None = None
    last_tick: int = 0
    converged: bool = False

    @property
    def mu(self) -> np.ndarray:
        return self.y / self.z

    @property
    def rounds(self) -> int:
        if self.termination_tick is None:
            return self.last_tick // self.round_length
        return self.termination_tick // self.round_length


class _Recorder:
    """Accumulates snapshots according to the trace mode."""

    def __init__(self, mode: str):
        if mode not in TRACE_MODES:
            raise ValueError(f"trace mode must be one of {TRACE_MODES}, got {mode!r}")
        self.mode = mode
        self.rows: list[tuple] = []
        self.bounds: list[tuple] = []
        self.mass: list[tuple[float, float]] = []

    def snapshot(self, k, y, z, M, m, flag, boundary: bool, force: bool = False):
        if self.mode == "full" or (self.mode == "boundary" and (boundary or force or k == 0)):
            self.rows.append((k, y.copy(), z.copy(), M.copy(), m.copy(), flag.copy()))

    def boundary(self, k, M, m):
        self.bounds.append((k, M.copy(), m.copy()))

    def finish(self, trace: SimTrace, n: int) -> SimTrace:
        if self.rows:
            trace.ticks = np.array([r[0] for r in self.rows], dtype=np.int64)
            for pos, name in enumerate(("y", "z", "M", "m", "flag"), start=1):
                setattr(trace, name, np.stack([r[pos] for r in self.rows]))
        else:
            trace.y = trace.z = trace.M = trace.m = np.zeros((0, n))
            trace.flag = np.zeros((0, n), dtype=bool)
        if self.bounds:
            trace.boundary_ticks = np.array([b[0] for b in self.bounds], dtype=np.int64)
            trace.boundary_M = np.stack([b[1] for b in self.bounds])
            trace.boundary_m = np.stack([b[2] for b in self.bounds])
        else:
            trace.boundary_M = trace.boundary_m = np.zeros((0, n))
        mass = np.array(self.mass, dtype=float).reshape(-1, 2)
        trace.mass_y, trace.mass_z = mass[:, 0].copy(), mass[:, 1].copy()
        trace.mode = self.mode
        return trace


def _fmt(x: float) -> str:
    if x == np.inf:
        return "+inf"
    if x == -np.inf:
        return "-inf"
    return repr(float(x))


def trace_csv(trace: SimTrace) -> str:
    """Render the trace with a fixed header; floats use shortest round-trip repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    mu = trace.mu
    for r, k in enumerate(trace.ticks.tolist()):
        for j in range(trace.n):
            w.writerow((k, j, _fmt(trace.y[r, j]), _fmt(trace.z[r, j]), _fmt(mu[r, j]),
                        _fmt(trace.M[r, j]), _fmt(trace.m[r, j]), int(trace.flag[r, j])))
    return buf.getvalue()


def write_trace_csv(trace: SimTrace, path: str | Path) -> None:
    Path(path).write_text(trace_csv(trace))


def read_trace_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load a trace CSV back into ``(ticks, n)`` arrays keyed by column name."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    n = 1 + max(int(r["node"]) for r in rows)
    ticks = sorted({int(r["tick"]) for r in rows})
    out = {"tick": np.array(ticks)}
    for col in ("y", "z", "mu", "M", "m"):
        out[col] = np.array([float(r[col]) for r in rows]).reshape(len(ticks), n)
    out["flag"] = np.array([r["flag"] == "1" for r in rows]).reshape(len(ticks), n)
    return out
