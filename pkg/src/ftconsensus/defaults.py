"""Experiment grid constants.  Every CLI flag falls back to these."""

EPSILON = 1e-5
MAX_ITERATIONS = 4000

# five-node example
SINGLE_NODES = 5
SINGLE_TAU_BAR = 5
SINGLE_LOADS = (1.0, 2.0, 3.0, 4.0, 5.0)

# random-graph sweep
SWEEP_NODES = (20, 50, 100, 200, 300, 600)
SWEEP_TAU_BARS = (1, 5, 10, 15, 20, 30)
SWEEP_TRIALS = 10
SWEEP_DENSITY = 0.1
SWEEP_INIT = "ramp"

# data-centre scale; the 10000-node cell is opt-in
DC_NODES = (20, 200, 500, 1000, 5000)
DC_NODES_LARGE = 10000
DC_TAU_BARS = (1, 2, 3, 4, 5)
DC_TRIALS = 5
DC_MAX_DIAMETER = 2
DC_DEGREE = 400
DC_INIT = "uniform"

# monotonicity-violation scan
VIOLATION_NODES = (20,)
VIOLATION_TAU_BARS = (20,)
VIOLATION_DIAMETER = 5
VIOLATION_TRIALS = 50
VIOLATION_DENSITY = 0.2        # about half the draws at n=20 have D=5
VIOLATION_SERIES = "mu"

# full traces above this size are downsampled to round boundaries
TRACE_MEMORY_BUDGET = 512 * 2**20
