"""
Random-graph sweep
==================

A reduced version of the size x delay grid.  Each (n, tau_bar) pair gets fresh
random graphs per trial; the summary averages rounds and ticks.  Pass the
default grid to ``ftconsensus sweep`` for the full 36 pairs.
"""

import tempfile

from ftconsensus.harness import cmd_sweep, config_for

with tempfile.TemporaryDirectory() as out:
    res = cmd_sweep(config_for("sweep", node_sizes=[20, 100, 300], tau_bars=[1, 5, 10], trials=3, out=out))

print(f"{'n':>5} {'tau':>4} {'D':>6} {'rounds':>7} {'ticks':>8}")
for row in res.summary:
    print(f"{row['n']:>5} {row['tau_bar']:>4} {float(row['diameter']):6.1f} "
          f"{float(row['rounds']):7.2f} {float(row['ticks']):8.1f}")

# larger graphs have smaller diameters, hence shorter rounds, and need no more of them
