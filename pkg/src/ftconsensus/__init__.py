"""Finite-time ratio consensus over directed graphs with bounded delays,
plus a CPU workload balancer and experiment harness built on it."""

from .consensus import (Decision, InTransitMessage, InternalStateError, NodeState, ProtocolError,
                        RunResult, TerminationConfig, async_minmax_update, async_ratio_step, emit,
                        max_consensus_async, max_consensus_sync, round_boundary_check,
                        run_async_finite_time, run_async_reference, run_sync_finite_time,
                        sync_minmax_step, sync_ratio_step)
from .delays import DelayModel, sample_delay
from .graph import (Digraph, GraphError, GraphGenerationError, NotStronglyConnectedError,
                    WeightMatrix, build_weights, complete_digraph, diameter, directed_cycle,
                    five_node_example, generate_random_digraph, is_strongly_connected,
                    read_edge_list, to_dot, write_dot, write_edge_list)
from .scheduler import (InfeasibleBalanceWarning, JobSpec, NodeResources, ScheduleProblem,
                        ScheduleSolution, SchedulingError, admit_jobs, consensus_initial_conditions,
                        local_cost, optimal_fraction, optimal_workloads, read_problem,
                        solve_centralized, solve_distributed)
from .simkernel import ConvergeStats, ViolationRecord, converge_stats, detect_violations, run_trial
from .trace import SimTrace, read_trace_csv, trace_csv, write_trace_csv

__version__ = "0.1.0"
