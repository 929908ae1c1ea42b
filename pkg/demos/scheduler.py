"""
Balancing CPU work
==================

Four servers with different clock rates and some work already committed.
Jobs arrive in order; the ones that fit are admitted and spread so every
server ends at the same utilisation.  The distributed solution comes from
ratio consensus with delays and matches the closed form.
"""

import warnings

import numpy as np

from ftconsensus import (DelayModel, JobSpec, NodeResources, ScheduleProblem, TerminationConfig,
                         diameter, directed_cycle, solve_centralized, solve_distributed)

res = [NodeResources(2.0e9, occupied=0.5e9), NodeResources(1.0e9, occupied=0.1e9),
       NodeResources(3.0e9, occupied=1.2e9), NodeResources(1.5e9)]
jobs = [JobSpec(0.8e9, 0, 0), JobSpec(5.0e9, 1, 2), JobSpec(0.6e9, 2, 3), JobSpec(0.4e9, 3, 1)]
prob = ScheduleProblem(res, jobs)

sol = solve_centralized(prob)
print("admitted:", [j.arrival_order for j in sol.admitted], "rejected:", [j.arrival_order for j, _ in sol.rejected])
print(f"z* = {sol.z_star:.4f}")
print("w* (Gcycles):", np.round(sol.workloads / 1e9, 4))

g = directed_cycle(4)
dist, run = solve_distributed(prob, g, TerminationConfig.asynchronous(diameter(g), 3, 1e-9), DelayModel(3, seed=0))
print(f"distributed: {run.rounds} rounds, max |w - w*| = {np.max(np.abs(dist.workloads - sol.workloads)):.2e} cycles")

# a server that is already busier than the balanced level cannot shed work;
# the centralised solver water-fills around it, the distributed one flags it
busy = ScheduleProblem([NodeResources(1.0e9, occupied=0.9e9), NodeResources(1.0e9), NodeResources(1.0e9)],
                       [JobSpec(0.3e9, 0, 1)])
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    print("water-filled w*:", np.round(solve_centralized(busy).workloads / 1e9, 4))
print("warning:", caught[0].message)
