"""
Five nodes, one delay bound
===========================

Ratio consensus on the directed 5-cycle (diameter 4) with loads 1..5 and
equal capacities.  Every node should settle on 3.0 and stop at the same tick,
which is always a multiple of the round length (1 + tau_bar) * D.
"""

import numpy as np

from ftconsensus import (DelayModel, TerminationConfig, converge_stats, five_node_example,
                         run_async_finite_time, run_sync_finite_time)

g = five_node_example()
print("edges:", g.edges)
y0 = np.arange(1, 6, dtype=float)
z0 = np.ones(5)

# synchronous first: rounds are D = 4 ticks long
r = run_sync_finite_time(g, y0, z0, TerminationConfig.synchronous(4))
print(f"sync: stopped at tick {r.termination_tick} ({r.rounds} rounds), ratios {r.ratios}")

# now with delays of up to 5 and 10 ticks on every link
for tau_bar in (5, 10):
    cfg = TerminationConfig.asynchronous(4, tau_bar)
    ticks = []
    for seed in range(20):
        res = run_async_finite_time(g, y0, z0, DelayModel(tau_bar, seed=seed), cfg)
        ticks.append(res.termination_tick)
    print(f"tau_bar={tau_bar}: round length {cfg.round_length}, "
          f"mean stop tick {np.mean(ticks):.1f}, all multiples: {all(t % cfg.round_length == 0 for t in ticks)}")

# one run in detail: the ratio trajectories and the M/m certificate
res = run_async_finite_time(g, y0, z0, DelayModel(5, seed=0), TerminationConfig.asynchronous(4, 5))
tr = res.trace
for k, M, m in zip(tr.boundary_ticks, tr.boundary_M, tr.boundary_m):
    print(f"  boundary {k:4d}: max spread M-m = {np.max(M - m):.3e}")
print("convergence stats:", converge_stats(tr))
