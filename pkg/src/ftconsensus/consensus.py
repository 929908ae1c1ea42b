"""Ratio consensus with distributed finite-time termination.

Two coupled linear iterations ``y`` and ``z`` driven by a column-stochastic
matrix make every node's ratio ``mu = y / z`` converge to ``sum(y0) / sum(z0)``.
Alongside, max- and min-consensus on auxiliary states ``M``/``m`` let every
node learn the spread of the ratios; the iteration stops once that spread,
measured at a round boundary, is below ``epsilon``.

The module has two layers.  The per-node kernels (:func:`emit`,
:func:`async_ratio_step`, :func:`async_minmax_update`,
:func:`round_boundary_check`) are pure functions over :class:`NodeState` and
:class:`InTransitMessage`; :func:`run_async_reference` drives them message by
message.  The engines :func:`run_sync_finite_time` and
:func:`run_async_finite_time` implement the same protocol over numpy arrays and
are what the experiment harness uses.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .delays import DelayModel
from .graph import Digraph, WeightMatrix, build_weights
from .trace import SimTrace, _Recorder


class ProtocolError(RuntimeError):
    """A driver broke a kernel's calling contract."""


class InternalStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeState:
    """State held by one node.

    ``M``/``m`` are ``None`` until the first round boundary; ``None`` stands for
    the ``+inf``/``-inf`` initial values and absorbs every max/min it meets.
    """

    y: float
    z: float
    M: float | None = None
    m: float | None = None
    flag: bool = False
    round: int = 0

    @property
    def mu(self) -> float:
        return self.y / self.z


@dataclass(frozen=True)
class InTransitMessage:
    sender: int
    receiver: int
    payload_y: float
    payload_z: float
    payload_M: float | None
    payload_m: float | None
    sent_tick: int
    deliver_tick: int
    round: int = 0


@dataclass(frozen=True)
class TerminationConfig:
    epsilon: float
    round_length: int
    max_iterations: int = 4000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.round_length < 1:
            raise ValueError(f"round_length must be >= 1, got {self.round_length}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    @classmethod
    def synchronous(cls, diameter: int, epsilon: float = 1e-5, max_iterations: int = 4000):
        return cls(epsilon, diameter, max_iterations)

    @classmethod
    def asynchronous(cls, diameter: int, tau_bar: int, epsilon: float = 1e-5,
                     max_iterations: int = 4000):
        return cls(epsilon, (1 + tau_bar) * diameter, max_iterations)


class Decision(enum.Enum):
    CONTINUE = "continue"
    TERMINATE = "terminate"


@dataclass
class RunResult:
    ratios: np.ndarray
    termination_tick: int | None
    rounds: int
    trace: SimTrace
    converged: bool


# --------------------------------------------------------------------------
# array kernels


def _check_vectors(n: int, *xs: np.ndarray) -> None:
    for x in xs:
        if np.shape(x) != (n,):
            raise ValueError(f"expected one value per node ({n}), got shape {np.shape(x)}")


def sync_ratio_step(y: np.ndarray, z: np.ndarray, w: WeightMatrix) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous step ``x <- P x`` applied to both ``y`` and ``z``."""
    g = w.graph
    _check_vectors(g.n, y, z)
    out = []
    for x in (np.asarray(y, float), np.asarray(z, float)):
        inflow = np.bincount(g.dst, weights=w.edge_weight * x[g.src], minlength=g.n)
        out.append(w.self_weight * x + inflow)
    return out[0], out[1]


def sync_minmax_step(M: np.ndarray, m: np.ndarray, g: Digraph) -> tuple[np.ndarray, np.ndarray]:
    """Each node takes the max (min) over itself and its in-neighbours."""
    _check_vectors(g.n, M, m)
    M2 = np.array(M, dtype=float)
    m2 = np.array(m, dtype=float)
    np.maximum.at(M2, g.dst, np.asarray(M, float)[g.src])
    np.minimum.at(m2, g.dst, np.asarray(m, float)[g.src])
    return M2, m2


# --------------------------------------------------------------------------
# per-node kernels


def emit(j: int, state: NodeState, w: WeightMatrix, delays: DelayModel, tick: int) -> list[InTransitMessage]:
    """Messages node ``j`` broadcasts at ``tick``: weighted mass plus its M/m."""
    if state.flag:
        return []
    g = w.graph
    out = []
    lo, hi = np.searchsorted(g.src, [j, j + 1])
    if hi == lo:
        return out
    dst = g.dst[lo:hi]
    d = delays.sample(np.full(dst.shape, j), dst, tick)
    for e, l, tau in zip(range(lo, hi), dst.tolist(), d.tolist()):
        p = float(w.edge_weight[e])
        out.append(InTransitMessage(j, l, p * state.y, p * state.z, state.M, state.m,
                                    tick, tick + tau, state.round))
    return out


def _check_delivery(j: int, delivered: Sequence[InTransitMessage], tick: int) -> None:
    for msg in delivered:
        if msg.receiver != j or msg.deliver_tick != tick:
            raise ProtocolError(
                f"node {j} at tick {tick} handed message for node {msg.receiver} "
                f"due at tick {msg.deliver_tick}")


def async_ratio_step(j: int, delivered: Sequence[InTransitMessage], state: NodeState,
                     w: WeightMatrix, tick: int) -> NodeState:
    """Keep the self share of ``y``/``z`` and add every payload that arrived now.

    A node that already terminated keeps all of its mass and still absorbs
    arrivals, so nothing in flight is lost.
    """
    _check_delivery(j, delivered, tick)
    keep = 1.0 if state.flag else float(w.self_weight[j])
    y = keep * state.y + sum(msg.payload_y for msg in delivered)
    z = keep * state.z + sum(msg.payload_z for msg in delivered)
    return replace(state, y=y, z=z)


def async_minmax_update(delivered: Sequence[InTransitMessage], state: NodeState) -> NodeState:
    """Fold delivered M/m of the current round into the node's own."""
    if state.flag or state.M is None or state.m is None:
        return state
    fresh = [msg for msg in delivered if msg.round == state.round]
    if not fresh:
        return state
    M = max([state.M] + [msg.payload_M for msg in fresh])
    m = min([state.m] + [msg.payload_m for msg in fresh])
    return replace(state, M=M, m=m)


def round_boundary_check(state: NodeState, tick: int, cfg: TerminationConfig) -> tuple[Decision, NodeState]:
    """Termination test at a round boundary, followed by re-seeding ``M = m = mu``."""
    L = cfg.round_length
    if tick == 0 or tick % L:
        raise ProtocolError(f"tick {tick} is not a round boundary (round length {L})")
    if state.M is None or state.m is None:
        if tick != L:
            raise InternalStateError(f"M/m still unset at boundary tick {tick}")
        done = False
    else:
        done = abs(state.M - state.m) < cfg.epsilon
    mu = state.mu
    new = replace(state, M=mu, m=mu, round=tick // L, flag=state.flag or done)
    return (Decision.TERMINATE if done else Decision.CONTINUE), new


def run_async_reference(g: Digraph, init_y, init_z, delays: DelayModel,
                        cfg: TerminationConfig) -> RunResult:
    """Message-level driver built only from the per-node kernels.

    Slow; meant for small graphs and for cross-checking the array engine.
    Records a full trace.
    """
    w = build_weights(g)
    states = [NodeState(float(a), float(b)) for a, b in zip(init_y, init_z)]
    _check_vectors(g.n, np.asarray(init_y), np.asarray(init_z))
    queue: dict[int, list[InTransitMessage]] = defaultdict(list)
    rec = _Recorder("full")
    flag_tick = np.full(g.n, -1, dtype=np.int64)
    final = np.full(g.n, np.nan)
    L = cfg.round_length
    term = None
    k = 0
    for k in range(cfg.max_iterations + 1):
        boundary = k > 0 and k % L == 0
        if boundary:
            rec.boundary(k, *_mm_arrays(states))
            for j in range(g.n):
                if states[j].flag:
                    continue
                _, states[j] = round_boundary_check(states[j], k, cfg)
                if states[j].flag:
                    flag_tick[j] = k
                    final[j] = states[j].mu
        ys = np.array([s.y for s in states])
        zs = np.array([s.z for s in states])
        in_flight = [msg for msgs in queue.values() for msg in msgs]
        rec.mass.append((ys.sum() + sum(x.payload_y for x in in_flight),
                         zs.sum() + sum(x.payload_z for x in in_flight)))
        M, m = _mm_arrays(states)
        rec.snapshot(k, ys, zs, M, m, np.array([s.flag for s in states]), boundary)
        if all(s.flag for s in states):
            term = k
            break
        if k == cfg.max_iterations:
            break
        for j in range(g.n):
            for msg in emit(j, states[j], w, delays, k):
                queue[msg.deliver_tick].append(msg)
        arrived = defaultdict(list)
        for msg in queue.pop(k, []):
            arrived[msg.receiver].append(msg)
        for j in range(g.n):
            s = async_ratio_step(j, arrived[j], states[j], w, k)
            states[j] = async_minmax_update(arrived[j], s)
    undecided = np.isnan(final)
    final[undecided] = [states[j].mu for j in np.flatnonzero(undecided)]
    trace = SimTrace(g.n, L, cfg.epsilon, delays.tau_bar)
    rec.finish(trace, g.n)
    trace.flag_tick, trace.final_ratios = flag_tick, final
    trace.termination_tick, trace.last_tick, trace.converged = term, k, term is not None
    return RunResult(final, term, trace.rounds, trace, term is not None)


def _mm_arrays(states: Sequence[NodeState]) -> tuple[np.ndarray, np.ndarray]:
    M = np.array([np.inf if s.M is None else s.M for s in states])
    m = np.array([-np.inf if s.m is None else s.m for s in states])
    return M, m


# --------------------------------------------------------------------------
# array engines


def _prepare(g: Digraph, init_y, init_z):
    y = np.array(init_y, dtype=float)
    z = np.array(init_z, dtype=float)
    _check_vectors(g.n, y, z)
    if np.any(z <= 0):
        raise ValueError("initial z values must be positive")
    return y, z


def run_sync_finite_time(g: Digraph, init_y, init_z, cfg: TerminationConfig,
                         trace_mode: str = "full") -> RunResult:
    """Synchronous finite-time ratio consensus; checks every ``round_length`` steps."""
    return _run(g, init_y, init_z, None, cfg, trace_mode)


def run_async_finite_time(g: Digraph, init_y, init_z, delays: DelayModel, cfg: TerminationConfig,
                          trace_mode: str = "full") -> RunResult:
    """Finite-time ratio consensus under bounded link delays.

    On a shared integer tick axis every node updates once per tick; a message
    broadcast at tick ``k`` over a link with sampled delay ``d`` is folded in at
    tick ``k + d``.  M/m payloads are dropped when they would land in a later
    round than the one they were sent in, while ``y``/``z`` payloads are always
    delivered so no mass is lost.
    """
    return _run(g, init_y, init_z, delays, cfg, trace_mode)


def _run(g, init_y, init_z, delays, cfg, trace_mode) -> RunResult:
    n = g.n
    y, z = _prepare(g, init_y, init_z)
    w = build_weights(g)
    L = cfg.round_length
    tau_bar = 0 if delays is None else delays.tau_bar
    S = tau_bar + 1
    src, dst = g.src, g.dst
    bounds = None
    if delays is not None and delays.distribution == "table":
        bounds = delays.bounds(src, dst)

    ybuf = np.zeros((S, n))
    zbuf = np.zeros((S, n))
    Mbuf = np.full((S, n), -np.inf)
    mbuf = np.full((S, n), np.inf)
    M = np.full(n, np.inf)
    m = np.full(n, -np.inf)
    flagged = np.zeros(n, dtype=bool)
    flag_tick = np.full(n, -1, dtype=np.int64)
    final = np.full(n, np.nan)
    rec = _Recorder(trace_mode)
    term = None
    k = 0
    for k in range(cfg.max_iterations + 1):
        boundary = k > 0 and k % L == 0
        if boundary:
            rec.boundary(k, M, m)
            live = ~flagged
            if k > L:
                newly = live & (np.abs(M - m) < cfg.epsilon)
                flag_tick[newly] = k
                final[newly] = y[newly] / z[newly]
                flagged |= newly
            # nodes deciding now are re-seeded too, as the per-node check does
            M[live] = m[live] = y[live] / z[live]
        rec.mass.append((y.sum() + ybuf.sum(), z.sum() + zbuf.sum()))
        done = bool(flagged.all())
        rec.snapshot(k, y, z, M, m, flagged, boundary, force=done or k == cfg.max_iterations)
        if done:
            term = k
            break
        if k == cfg.max_iterations:
            break

        live_e = ~flagged[src]
        es, ed = src[live_e], dst[live_e]
        ew = w.edge_weight[live_e]
        if delays is None:
            d = np.zeros(es.shape, dtype=np.int64)
        else:
            d = delays.sample(es, ed, k, None if bounds is None else bounds[live_e])
        slot = k % S
        idx = ((k + d) % S) * n + ed
        ybuf.reshape(-1)[:] += np.bincount(idx, weights=ew * y[es], minlength=S * n)
        zbuf.reshape(-1)[:] += np.bincount(idx, weights=ew * z[es], minlength=S * n)
        if k >= L:
            same = (k + d) // L == k // L
            np.maximum.at(Mbuf.reshape(-1), idx[same], M[es[same]])
            np.minimum.at(mbuf.reshape(-1), idx[same], m[es[same]])

        keep = np.where(flagged, 1.0, w.self_weight)
        y = keep * y + ybuf[slot]
        z = keep * z + zbuf[slot]
        if k >= L:
            live = ~flagged
            M[live] = np.maximum(M[live], Mbuf[slot, live])
            m[live] = np.minimum(m[live], mbuf[slot, live])
        ybuf[slot] = 0.0
        zbuf[slot] = 0.0
        Mbuf[slot] = -np.inf
        mbuf[slot] = np.inf

    undecided = np.isnan(final)
    final[undecided] = y[undecided] / z[undecided]
    trace = SimTrace(n, L, cfg.epsilon, tau_bar)
    rec.finish(trace, n)
    trace.flag_tick, trace.final_ratios = flag_tick, final
    trace.termination_tick, trace.last_tick, trace.converged = term, k, term is not None
    return RunResult(final, term, trace.rounds, trace, term is not None)


# --------------------------------------------------------------------------
# plain max-consensus, for checking propagation bounds


def max_consensus_sync(g: Digraph, x, steps: int) -> np.ndarray:
    """History ``(steps + 1, n)`` of synchronous max-consensus from ``x``."""
    M = np.array(x, dtype=float)
    hist = [M]
    for _ in range(steps):
        M, _ = sync_minmax_step(M, M, g)
        hist.append(M)
    return np.stack(hist)


def max_consensus_async(g: Digraph, x, delays: DelayModel, ticks: int, start_tick: int = 0) -> np.ndarray:
    """History ``(ticks + 1, n)`` of max-consensus with delayed deliveries.

    Uses the same tick semantics as :func:`run_async_finite_time`: a value sent
    at tick ``k`` with delay ``d`` is folded in at tick ``k + d``.
    """
    n = g.n
    S = delays.tau_bar + 1
    buf = np.full((S, n), -np.inf)
    M = np.array(x, dtype=float)
    hist = [M.copy()]
    for k in range(start_tick, start_tick + ticks):
        d = delays.sample(g.src, g.dst, k)
        np.maximum.at(buf.reshape(-1), ((k + d) % S) * n + g.dst, M[g.src])
        M = np.maximum(M, buf[k % S])
        buf[k % S] = -np.inf
        hist.append(M.copy())
    return np.stack(hist)
