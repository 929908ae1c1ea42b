"""
Data-centre scale
=================

1000 nodes, diameter at most 2, delays of at most one tick.  Loads are random
utilisation fractions on equal capacities.  The run needs very few rounds and
every node decides at the same tick.
"""

import time

import numpy as np

from ftconsensus import DelayModel, TerminationConfig, converge_stats, diameter, generate_random_digraph
from ftconsensus.consensus import run_async_finite_time

n = 1000
t0 = time.perf_counter()
g = generate_random_digraph(n, 400 / (n - 1), target_diameter_max=2, seed=1)
D = diameter(g)
print(f"{g.edge_count} edges, diameter {D}, built in {time.perf_counter() - t0:.1f}s")

y0 = np.random.default_rng(1).random(n)
cfg = TerminationConfig.asynchronous(D, 1)
t0 = time.perf_counter()
res = run_async_finite_time(g, y0, np.ones(n), DelayModel(1, seed=1), cfg, trace_mode="boundary")
print(f"stopped at tick {res.termination_tick} after {res.rounds} rounds ({time.perf_counter() - t0:.1f}s)")
print("stats:", converge_stats(res.trace))
print(f"max error vs mean load: {np.max(np.abs(res.ratios - y0.mean())):.2e}")
