"""Proportional CPU workload balancing on top of ratio consensus.

Every node ``i`` has capacity ``pi_i = c_i * T_h`` cycles over the horizon, of
which ``u_i`` are already occupied.  Admitted demand ``rho`` is spread so that
all nodes end at the same utilisation fraction

    z* = (rho + sum(u)) / sum(pi),        w_i* = z* pi_i - u_i,

which is the minimiser of ``sum_i 0.5 * pi_i * (z - (rho_i + u_i) / pi_i)**2``
and also the fixed point of ratio consensus started from ``y_i = l_i + u_i``,
``z_i = pi_i``.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .consensus import RunResult, TerminationConfig, run_async_finite_time, run_sync_finite_time
from .delays import DelayModel
from .graph import Digraph

logger = logging.getLogger(__name__)


class SchedulingError(ValueError):
    pass


class InfeasibleBalanceWarning(UserWarning):
    """Some node already sits above the balanced utilisation."""


@dataclass(frozen=True)
class NodeResources:
    clock_sum: float          # cycles / second, summed over cores
    horizon: float = 1.0      # seconds
    occupied: float = 0.0     # cycles already committed over the horizon
    incoming: float = 0.0     # cycles of admitted work arriving at this node

    def __post_init__(self):
        if self.clock_sum < 0 or self.horizon <= 0:
            raise SchedulingError("clock_sum must be >= 0 and horizon > 0")
        if not 0 <= self.occupied <= self.capacity:
            raise SchedulingError(
                f"occupied cycles {self.occupied} outside [0, {self.capacity}]")
        if self.incoming < 0:
            raise SchedulingError("incoming workload must be nonnegative")

    @property
    def capacity(self) -> float:
        return self.clock_sum * self.horizon


@dataclass(frozen=True)
class JobSpec:
    demand: float
    arrival_order: int
    node: int = 0

    def __post_init__(self):
        if not self.demand > 0:
            raise SchedulingError(f"job demand must be positive, got {self.demand}")


@dataclass
class ScheduleSolution:
    z_star: float
    workloads: np.ndarray
    admitted: list[JobSpec] = field(default_factory=list)
    rejected: list[tuple[JobSpec, str]] = field(default_factory=list)
    clamped: tuple[int, ...] = ()

    def utilization(self, resources: Sequence[NodeResources]) -> np.ndarray:
        pi, u = _arrays(resources)
        return (self.workloads + u) / pi


def _arrays(resources: Sequence[NodeResources]) -> tuple[np.ndarray, np.ndarray]:
    pi = np.array([r.capacity for r in resources], dtype=float)
    u = np.array([r.occupied for r in resources], dtype=float)
    return pi, u


def availability(r: NodeResources) -> float:
    return r.capacity - r.occupied


def admit_jobs(jobs: Sequence[JobSpec], total_available: float) -> tuple[list[JobSpec], list[tuple[JobSpec, str]]]:
    """First-come first-scheduled admission.

    Jobs are taken in arrival order; a job is admitted when its demand fits in
    what is left.  A rejected job does not block later, smaller ones.
    """
    admitted, rejected = [], []
    left = float(total_available)
    for job in sorted(jobs, key=lambda j: j.arrival_order):
        if job.demand <= left:
            admitted.append(job)
            left -= job.demand
        else:
            rejected.append((job, f"demand {job.demand:g} exceeds remaining availability {left:g}"))
    return admitted, rejected


def local_cost(z: float, r: NodeResources, rho_i: float) -> float:
    pi = r.capacity
    return 0.5 * pi * (z - (rho_i + r.occupied) / pi) ** 2


def optimal_fraction(resources: Sequence[NodeResources], demand) -> float:
    """Closed-form minimiser of the summed local costs.

    ``demand`` is either the total admitted demand or a per-node sequence.
    """
    pi, u = _arrays(resources)
    total_pi = pi.sum()
    if not total_pi > 0:
        raise SchedulingError("total capacity is zero")
    rho = float(np.sum(demand))
    return (rho + u.sum()) / total_pi


def optimal_workloads(z_star: float, resources: Sequence[NodeResources], clamp: bool = True) -> ScheduleSolution:
    """Per-node workloads ``w_i = z* pi_i - u_i``.

    A node whose occupied cycles already exceed ``z* pi_i`` would need negative
    work.  With ``clamp`` such nodes get zero work and the remaining demand is
    rebalanced across the others (water-filling), which keeps the total
    assigned equal to the demand; the clamped nodes are listed on the solution
    and an :class:`InfeasibleBalanceWarning` is issued.  Without ``clamp`` a
    :class:`SchedulingError` is raised instead.
    """
    pi, u = _arrays(resources)
    w = z_star * pi - u
    negative = np.flatnonzero(w < 0)
    if negative.size == 0:
        return ScheduleSolution(float(z_star), w)
    if not clamp:
        raise SchedulingError(f"balance needs negative work on nodes {negative.tolist()}")

    # water-filling: nodes enter in order of current utilisation until the
    # common level no longer reaches the next one
    rho = max(0.0, float(z_star * pi.sum() - u.sum()))
    util = np.divide(u, pi, out=np.full_like(pi, np.inf), where=pi > 0)
    order = np.argsort(util, kind="stable")
    level = util[order]
    k, z = 1, level[0]
    while True:
        z = (rho + u[order[:k]].sum()) / pi[order[:k]].sum()
        if k == len(pi) or z <= level[k]:
            break
        k += 1
    active = np.zeros(len(pi), dtype=bool)
    active[order[:k]] = True
    w = np.where(active, np.maximum(z * pi - u, 0.0), 0.0)
    clamped = tuple(np.flatnonzero(~active).tolist())
    warnings.warn(f"nodes {list(clamped)} already exceed the balanced utilisation; "
                  f"they receive no work", InfeasibleBalanceWarning, stacklevel=2)
    return ScheduleSolution(float(z), w, clamped=clamped)


def consensus_initial_conditions(resources: Sequence[NodeResources]) -> tuple[np.ndarray, np.ndarray]:
    y = np.array([r.incoming + r.occupied for r in resources], dtype=float)
    z = np.array([r.capacity for r in resources], dtype=float)
    return y, z


# --------------------------------------------------------------------------
# problem instances


@dataclass
class ScheduleProblem:
    resources: list[NodeResources]
    jobs: list[JobSpec] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.resources)

    def admit(self) -> tuple["ScheduleProblem", list[JobSpec], list[tuple[JobSpec, str]]]:
        """Admit jobs against total availability; returns the problem with
        ``incoming`` set from admitted arrivals per node."""
        total = sum(availability(r) for r in self.resources)
        admitted, rejected = admit_jobs(self.jobs, total)
        incoming = np.zeros(self.n)
        for job in admitted:
            incoming[job.node] += job.demand
        res = [NodeResources(r.clock_sum, r.horizon, r.occupied, float(incoming[i]))
               for i, r in enumerate(self.resources)]
        return ScheduleProblem(res, list(self.jobs)), admitted, rejected


def solve_centralized(problem: ScheduleProblem, clamp: bool = True) -> ScheduleSolution:
    admitted_problem, admitted, rejected = problem.admit()
    if rejected:
        logger.info("%d job(s) rejected; they are re-queued for the next optimisation step",
                    len(rejected))
    res = admitted_problem.resources
    z = optimal_fraction(res, [r.incoming for r in res])
    sol = optimal_workloads(z, res, clamp=clamp)
    sol.admitted, sol.rejected = admitted, rejected
    return sol


def workloads_from_ratios(ratios, resources: Sequence[NodeResources]) -> np.ndarray:
    """What each node assigns itself using its own consensus estimate of ``z*``."""
    pi, u = _arrays(resources)
    return np.asarray(ratios) * pi - u


def solve_distributed(problem: ScheduleProblem, graph: Digraph, cfg: TerminationConfig,
                      delays: DelayModel | None = None) -> tuple[ScheduleSolution, RunResult]:
    """Admit jobs, run finite-time ratio consensus, and let each node derive its
    own workload from its terminal ratio.

    Nodes that would need negative work are listed in ``clamped`` and an
    :class:`InfeasibleBalanceWarning` is issued; their workloads are left as
    computed, since redistributing would need global knowledge.
    """
    if graph.n != problem.n:
        raise SchedulingError(f"graph has {graph.n} nodes, problem has {problem.n}")
    admitted_problem, admitted, rejected = problem.admit()
    res = admitted_problem.resources
    y0, z0 = consensus_initial_conditions(res)
    if delays is None:
        result = run_sync_finite_time(graph, y0, z0, cfg, trace_mode="boundary")
    else:
        result = run_async_finite_time(graph, y0, z0, delays, cfg, trace_mode="boundary")
    w = workloads_from_ratios(result.ratios, res)
    # each node only knows its own estimate, so there is no water-filling here
    short = tuple(np.flatnonzero(w < 0).tolist())
    if short:
        warnings.warn(f"nodes {list(short)} already exceed the balanced utilisation; their "
                      f"local workload is negative", InfeasibleBalanceWarning, stacklevel=2)
    sol = ScheduleSolution(float(np.mean(result.ratios)), w, admitted, rejected, short)
    return sol, result


def read_problem(path: str | Path) -> ScheduleProblem:
    """Load an INI-style instance.

    ::

        [problem]
        horizon = 1.0          ; seconds, default for every node

        [node.0]
        clock = 2.0e9          ; cycles / second
        occupied = 3.0e8       ; cycles, default 0
        jobs = 1:30, 4:50      ; arrival_order:demand pairs arriving here

        [node.1]
        clock = 1.0e9
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        cp.read_file(fh)
    horizon = cp.getfloat("problem", "horizon", fallback=1.0)
    sections = [s for s in cp.sections() if s.startswith("node.")]
    indices = sorted(int(s.split(".", 1)[1]) for s in sections)
    if indices != list(range(len(indices))):
        raise SchedulingError(f"{path}: node sections must be numbered 0..n-1, got {indices}")
    resources, jobs = [], []
    for i in indices:
        sec = cp[f"node.{i}"]
        h = sec.getfloat("horizon", fallback=horizon)
        resources.append(NodeResources(sec.getfloat("clock"), h, sec.getfloat("occupied", fallback=0.0)))
        for item in filter(None, (t.strip() for t in sec.get("jobs", "").split(","))):
            order, demand = item.split(":")
            jobs.append(JobSpec(float(demand), int(order), i))
    return ScheduleProblem(resources, jobs)


SOLUTION_HEADER = ("node", "capacity", "u", "w_star", "utilization_fraction")


def solution_csv(sol: ScheduleSolution, resources: Sequence[NodeResources]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SOLUTION_HEADER)
    frac = sol.utilization(resources)
    for i, r in enumerate(resources):
        w.writerow((i, repr(r.capacity), repr(r.occupied), repr(float(sol.workloads[i])),
                    repr(float(frac[i]))))
    return buf.getvalue()
