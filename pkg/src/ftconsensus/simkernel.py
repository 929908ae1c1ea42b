"""Trial driver, convergence statistics and the monotonicity-violation detector."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .consensus import TerminationConfig, run_async_finite_time
from .delays import DelayModel, sample_delay  # noqa: F401  (re-exported)
from .graph import Digraph
from .trace import SimTrace


def run_trial(g: Digraph, init_y, init_z, delays: DelayModel, cfg: TerminationConfig,
              trace_mode: str = "full") -> SimTrace:
    """One asynchronous finite-time run; the trace carries ``converged``.

    A run that hits ``cfg.max_iterations`` returns its partial trace with
    ``converged`` false rather than raising.
    """
    return run_async_finite_time(g, init_y, init_z, delays, cfg, trace_mode).trace


class ConvergeStats(NamedTuple):
    min: int
    max: int
    mean: float
    window: int


def converge_stats(trace: SimTrace) -> ConvergeStats | None:
    """First/last/mean per-node decision tick and their spread.

    Returns ``None`` when not every node decided.
    """
    ticks = trace.flag_tick
    if ticks.size == 0 or np.any(ticks < 0):
        return None
    lo, hi = int(ticks.min()), int(ticks.max())
    return ConvergeStats(lo, hi, float(ticks.mean()), hi - lo)


@dataclass(frozen=True)
class ViolationRecord:
    node: int
    tick: int
    tau_bar: int
    value: float
    window_extremum: float
    direction: str          # "above-max" or "below-min"


VIOLATION_HEADER = ("node", "tick", "direction", "value", "window_extremum")


def _window_extreme(series: np.ndarray, tau_bar: int, op) -> np.ndarray:
    per_tick = op.reduce(series, axis=1)
    out = per_tick.copy()
    for lag in range(1, tau_bar + 1):
        out[lag:] = op(out[lag:], per_tick[:-lag])
    return out


def _one_side(series: np.ndarray, tau_bar: int, above: bool) -> list[ViolationRecord]:
    x = series if above else -series
    horizon = _window_extreme(x, tau_bar, np.maximum)                # (T,)
    premise = x < horizon[:, None]                                   # (T, n)
    thresh = np.where(premise, horizon[:, None], np.inf)
    # strictly earlier premises only
    tightest = np.minimum.accumulate(thresh, axis=0)
    prior = np.vstack([np.full((1, x.shape[1]), np.inf), tightest[:-1]])
    breach = x > prior
    onset = breach & ~np.vstack([np.zeros((1, x.shape[1]), dtype=bool), breach[:-1]])
    sign = 1.0 if above else -1.0
    return [ViolationRecord(int(j), int(k), tau_bar, sign * float(x[k, j]), sign * float(prior[k, j]),
                            "above-max" if above else "below-min")
            for k, j in zip(*np.nonzero(onset))]


def detect_violations(trace: SimTrace | np.ndarray, tau_bar: int | None = None,
                      series: str = "mu", ticks=None) -> list[ViolationRecord]:
    """Find nodes whose value escapes the delayed-horizon extremum.

    For every tick ``k`` let ``H[k]`` be the maximum over all nodes and over
    ticks ``k - tau_bar .. k``.  If node ``i`` satisfies ``x_i[k] < H[k]``, the
    monotonicity claim under test says ``x_i`` never rises above ``H[k]`` later.
    A record is emitted at each tick where node ``i`` starts to exceed the
    tightest such ``H[k]`` from an earlier tick; the min side is the mirror
    image.  ``series`` selects ``"mu"`` (default), ``"M"``, ``"m"``, ``"y"`` or
    ``"z"`` when a trace is given; a plain ``(T, n)`` array is used as is.
    Reported ticks come from ``trace.ticks`` (or ``ticks``).
    """
    if isinstance(trace, SimTrace):
        if trace.mode != "full":
            raise ValueError("violation detection needs a full (dense) trace")
        data = trace.mu if series == "mu" else getattr(trace, series)
        tick_axis = trace.ticks
        tau_bar = trace.tau_bar if tau_bar is None else tau_bar
    else:
        data = np.asarray(trace, dtype=float)
        tick_axis = np.arange(data.shape[0]) if ticks is None else np.asarray(ticks)
        if tau_bar is None:
            raise ValueError("tau_bar is required for a raw array")
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        return []
    found = _one_side(data, tau_bar, True) + _one_side(data, tau_bar, False)
    found = [ViolationRecord(v.node, int(tick_axis[v.tick]), v.tau_bar, v.value, v.window_extremum,
                             v.direction) for v in found]
    return sorted(found, key=lambda v: (v.tick, v.node, v.direction))


def violations_csv(records: list[ViolationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VIOLATION_HEADER)
    for v in records:
        w.writerow((v.node, v.tick, v.direction, repr(v.value), repr(v.window_extremum)))
    return buf.getvalue()
