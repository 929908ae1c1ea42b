"""Command-line entry point.

    ftconsensus single --tau-bar 5 --out runs/five
    ftconsensus sweep --nodes 20,600 --tau-bar 10 --trials 10 --out runs/sweep
    ftconsensus dc-scale --nodes 1000 --tau-bar 1 --out runs/dc
    ftconsensus violations --out runs/viol
    ftconsensus schedule instance.ini --out solution.csv

Values from ``--config FILE`` (an INI file with an ``[experiment]`` section)
override command-line flags, which override the built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
import warnings

from . import defaults
from .harness import COMMANDS, ConfigError, config_for
from .scheduler import InfeasibleBalanceWarning, SchedulingError, read_problem, solution_csv, solve_centralized

EXIT_OK, EXIT_USAGE, EXIT_CAP = 0, 1, 2


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).replace(" ", "").split(",") if t]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# config key -> (ExperimentConfig field, parser)
_KEYS = {
    "nodes": ("node_sizes", _ints),
    "tau_bar": ("tau_bars", _ints),
    "trials": ("trials", int),
    "epsilon": ("epsilon", float),
    "max_iters": ("max_iterations", int),
    "seed": ("seed", int),
    "out": ("out", str),
    "density": ("density", float),
    "degree": ("degree", float),
    "max_diameter": ("max_diameter", int),
    "diameter": ("diameter", int),
    "downsample": ("downsample", _bool),
    "init": ("init", str),
    "loads": ("loads", _floats),
    "delay": ("delay_distribution", str),
    "edges": ("edges", str),
    "workers": ("workers", int),
    "keep_traces": ("keep_traces", _bool),
    "series": ("series", str),
    "horizon": ("horizon", int),
    "large": ("large", _bool),
}


def read_config(path: str) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        cp.read_file(fh)
    if not cp.has_section("experiment"):
        raise ConfigError(f"{path}: missing [experiment] section")
    out = {}
    for key, raw in cp["experiment"].items():
        k = key.replace("-", "_")
        if k not in _KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        name, conv = _KEYS[k]
        try:
            out[name] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    p = argparse.ArgumentParser(prog="ftconsensus", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--nodes", help="comma-separated node counts")
        s.add_argument("--tau-bar", help="comma-separated delay bounds")
        s.add_argument("--trials", type=int)
        s.add_argument("--epsilon", type=float, help=f"termination threshold (default {defaults.EPSILON})")
        s.add_argument("--max-iters", type=int, help=f"tick cap (default {defaults.MAX_ITERATIONS})")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--out", help="output directory")
        s.add_argument("--density", type=float, help="edge density of random graphs")
        s.add_argument("--degree", type=float, help="mean out-degree (overrides density)")
        s.add_argument("--max-diameter", type=int, help="reject graphs above this diameter")
        s.add_argument("--diameter", type=int, help="exact diameter (violations)")
        s.add_argument("--downsample", action="store_true", default=None,
                       help="keep round-boundary snapshots only")
        s.add_argument("--init", choices=("ramp", "uniform", "spike"))
        s.add_argument("--loads", help="comma-separated initial loads (single)")
        s.add_argument("--delay", choices=("uniform", "constant"), help="delay distribution")
        s.add_argument("--edges", help="edge-list file ('i j' per line, i transmits to j)")
        s.add_argument("--workers", type=int)
        s.add_argument("--keep-traces", action="store_true", default=None)
        s.add_argument("--series", choices=("mu", "M", "m", "y", "z"), help="series scanned (violations)")
        s.add_argument("--horizon", type=int, help="detector window in ticks (violations; default tau-bar)")
        s.add_argument("--large", action="store_true", default=None,
                       help="add the 10000-node cell (dc-scale)")
        s.add_argument("--config", help="INI file with an [experiment] section; overrides flags")
    s = sub.add_parser("schedule", parents=[common], help="solve a scheduling instance file")
    s.add_argument("instance")
    s.add_argument("--out", help="solution CSV path (default stdout)")
    return p


def _flags(ns: argparse.Namespace) -> dict:
    out = {}
    for key, (name, conv) in _KEYS.items():
        val = getattr(ns, key, None)
        if val is not None:
            out[name] = conv(val)
    return out


def _schedule(ns) -> int:
    problem = read_problem(ns.instance)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", InfeasibleBalanceWarning)
        sol = solve_centralized(problem)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for job, reason in sol.rejected:
        print(f"rejected job {job.arrival_order}: {reason}", file=sys.stderr)
    text = solution_csv(sol, problem.admit()[0].resources)
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if ns.command == "schedule":
            return _schedule(ns)
        params = _flags(ns)
        if ns.config:
            params.update(read_config(ns.config))
        cfg = config_for(ns.command, **params)
        result = COMMANDS[ns.command](cfg)
    except (ConfigError, SchedulingError, OSError) as exc:
        print(f"{parser.prog} {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if result.all_converged else EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
