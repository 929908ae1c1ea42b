"""
Searching for escapes from the delayed-horizon maximum
======================================================

For each tick take the largest ratio seen at any node over the last
tau_bar + 1 ticks.  A node strictly below that value is expected to stay
below it.  With the delivery rule used here every update is a convex
combination of values inside that window, so no escape shows up.  Shrinking
the window by one tick is enough to produce many.
"""

import tempfile

from ftconsensus.harness import cmd_violations, config_for

for n, D, tau_bar in ((20, 5, 20), (50, 4, 10), (50, 4, 20)):
    for horizon in (tau_bar, tau_bar - 1):
        with tempfile.TemporaryDirectory() as out:
            scan = cmd_violations(config_for("violations", node_sizes=[n], tau_bars=[tau_bar], diameter=D,
                                             density=0.2 if n == 20 else 0.1, trials=10,
                                             horizon=horizon, out=out))
        hits = [r["above_max"] + r["below_min"] for r in scan.summary]
        print(f"n={n} D={D} tau_bar={tau_bar} horizon={horizon}: "
              f"{sum(h > 0 for h in hits)}/{len(hits)} seeds with escapes, {sum(hits)} records"
              + (f", {len(scan.skipped)} skipped" if scan.skipped else ""))
