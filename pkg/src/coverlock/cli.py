"""Command-line front end: ``coverlock {solve,mc1,mc2,analyze}``.

Exit codes: 0 success, 1 input error, 2 infeasible instance or scenario,
3 no feasible rank-and-cut cutoff.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import ScoredUnits, compare_policies, rc_threshold
from .core import ProblemInstance, coverage_from_share, validate_instance
from .exact import solve_exact
from .exceptions import (
    BracketOverflow,
    CoreInfeasible,
    CoverlockError,
    Infeasible,
    InvalidInstance,
    NoFeasibleCutoff,
    RoundingInfeasible,
    TargetOutOfRange,
    TooLarge,
    TooManyInfeasibleDraws,
)
from .experiments import (
    Dgp1Config,
    Dgp2Config,
    default_scenarios,
    mc2_unit_table,
    regret_curve_data,
    run_mc1,
    run_mc2,
    write_mc1_csv,
    write_mc2_csv,
    write_series_csv,
    write_unit_table_csv,
)
from .glc import GlcConfig, glc_solve
from .lp import round_lp_to_feasible, solve_lp
from .rc import rc_greedy_skip_solve, rc_prefix_solve

logger = logging.getLogger("coverlock")

SCHEMA = 1
METHODS = ("exact", "lp", "glc", "rc-prefix", "rc-skip")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NO_CUTOFF = 0, 1, 2, 3
# most specific first; CoreInfeasible is the greedy-skip analogue of a missing cutoff
_EXIT_MAP = (
    (NoFeasibleCutoff, EXIT_NO_CUTOFF),
    (CoreInfeasible, EXIT_NO_CUTOFF),
    (Infeasible, EXIT_INFEASIBLE),
    (RoundingInfeasible, EXIT_INFEASIBLE),
    (BracketOverflow, EXIT_INFEASIBLE),
    (TooManyInfeasibleDraws, EXIT_INFEASIBLE),
    (InvalidInstance, EXIT_INPUT),
    (TargetOutOfRange, EXIT_INPUT),
    (TooLarge, EXIT_INPUT),
)


class InputError(Exception):
    """Unreadable or malformed input file or flag."""


@dataclass
class LoadedInstance:
    instance: ProblemInstance
    source: str
    conversion: Optional[dict] = field(default=None)

    def header(self) -> dict:
        out = {"n": self.instance.n, "budget": self.instance.budget,
               "coverage_floor": self.instance.coverage_floor, "source": self.source}
        if self.conversion is not None:
            out["per_capita"] = self.conversion
        return out


def _number(obj, key):
    x = obj[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"{key!r} must be a number")
    return x


def _from_totals_or_shares(values, costs, budget=None, coverage=None,
                           budget_pc=None, share=None) -> LoadedInstance:
    n = len(values)
    conversion = None
    if budget is None and budget_pc is None:
        raise InputError("a budget (total or per capita) is required")
    if coverage is None and share is None:
        raise InputError("a coverage floor (count or share) is required")
    if budget is not None and budget_pc is not None:
        raise InputError("give either a total budget or a per-capita budget, not both")
    if coverage is not None and share is not None:
        raise InputError("give either a coverage floor or a coverage share, not both")
    if budget_pc is not None or share is not None:
        conversion = {}
    if budget_pc is not None:
        budget = n * float(budget_pc)
        conversion.update({"budget_per_capita": float(budget_pc), "budget": budget})
    if share is not None:
        if not 0 <= share <= 1:
            raise InputError(f"coverage share must lie in [0, 1], got {share}")
        coverage = coverage_from_share(n, share)
        conversion.update({"coverage_share": float(share), "coverage_floor": coverage})
    if isinstance(coverage, float):
        if not coverage.is_integer():
            raise InputError(f"coverage floor must be an integer, got {coverage}")
        coverage = int(coverage)
    inst = ProblemInstance(np.asarray(values, dtype=float), np.asarray(costs, dtype=float),
                           budget, coverage)
    return LoadedInstance(inst, "", conversion)


def _load_json(text: str) -> LoadedInstance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise InputError("instance JSON must be an object")
    if obj.get("schema", SCHEMA) != SCHEMA:
        raise InputError(f"unsupported schema {obj.get('schema')!r}; expected {SCHEMA}")
    for key in ("values", "costs"):
        if not isinstance(obj.get(key), list):
            raise InputError(f"{key!r} must be a list of numbers")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in obj[key]):
            raise InputError(f"{key!r} must contain only numbers")
    kw = {}
    for key, arg in (("budget", "budget"), ("coverage_floor", "coverage"),
                     ("budget_per_capita", "budget_pc"), ("coverage_share", "share")):
        if key in obj:
            kw[arg] = _number(obj, key)
    return _from_totals_or_shares(obj["values"], obj["costs"], **kw)


def _load_csv(text: str, args) -> LoadedInstance:
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["value", "cost"]:
        raise InputError("CSV instance needs the header 'value,cost'")
    values, costs = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise InputError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            values.append(float(row[0]))
            costs.append(float(row[1]))
        except ValueError:
            raise InputError(f"line {lineno}: non-numeric entry") from None
    return _from_totals_or_shares(values, costs, args.budget, args.coverage,
                                  args.budget_per_capita, args.coverage_share)


def load_instance(path: str, args=None) -> LoadedInstance:
    """Read a JSON or CSV instance (CSV takes budget/coverage from ``args``)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if path.lower().endswith(".csv"):
        if args is None:
            raise InputError("CSV instances need --budget and --coverage flags")
        loaded = _load_csv(text, args)
    else:
        loaded = _load_json(text)
    validate_instance(loaded.instance)
    loaded.source = path
    return loaded


def parse_grid(spec: str) -> List[int]:
    """``50,100,200`` or ``start..stop..step`` (inclusive stop)."""
    try:
        if ".." in spec:
            parts = [int(p) for p in spec.split("..")]
            if len(parts) == 2:
                parts.append(1)
            if len(parts) != 3 or parts[2] <= 0 or parts[0] > parts[1]:
                raise ValueError
            grid = list(range(parts[0], parts[1] + 1, parts[2]))
        else:
            grid = [int(p) for p in spec.split(",") if p.strip()]
    except ValueError:
        raise InputError(f"bad grid {spec!r}; use 50,100 or 50..500..150") from None
    if not grid or min(grid) < 1:
        raise InputError(f"grid {spec!r} must contain positive sizes")
    return grid


def _solve(method: str, inst: ProblemInstance, args):
    if method == "exact":
        return solve_exact(inst, node_limit=args.node_limit)
    if method == "lp":
        return solve_lp(inst).report(inst)
    if method == "glc":
        report, trace = glc_solve(inst, GlcConfig(eps=args.eps, max_iterations=args.max_iter))
        if getattr(args, "trace", False):
            sys.stderr.write(trace.to_text())
        return report
    if method == "rc-prefix":
        return rc_prefix_solve(inst)
    if method == "rc-skip":
        return rc_greedy_skip_solve(inst)
    raise InputError(f"unknown method {method!r}")


def _emit_json(obj, path: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _open_out(path: Optional[str]):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_solve(args) -> int:
    loaded = load_instance(args.input, args)
    report = _solve(args.method, loaded.instance, args)
    out = {"schema": SCHEMA, "instance": loaded.header()}
    out.update(report.to_dict())
    _emit_json(out, args.output)
    return EXIT_OK


def cmd_mc1(args) -> int:
    grid = parse_grid(args.n)
    template = Dgp1Config(n=grid[0], gamma=args.gamma, C=args.C, rho=args.rho, seed=args.seed)
    logger.info("mc1: W = n*%g, K = ceil(n*%g), grid=%s, reps=%d, seed=%d",
                args.C, args.rho, grid, args.reps, args.seed)
    rows = run_mc1(grid, template, args.reps, GlcConfig(eps=args.eps), n_jobs=args.jobs)
    fh = _open_out(args.output)
    try:
        write_mc1_csv(fh, rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.series:
        if len(rows) < 2:
            raise InputError("--series needs at least two grid sizes")
        write_series_csv(args.series, regret_curve_data(rows))
    return EXIT_OK


def cmd_mc2(args) -> int:
    template = Dgp2Config(n=args.n, beta0=args.beta0, beta1=args.beta1, gamma_sq=args.gamma_sq,
                          c0=args.c0, B=args.B, replications=args.reps, seed=args.seed)
    scenarios = default_scenarios(args.delta_high, args.rho_high, args.rho_low)
    logger.info("mc2: W = n*%g, K = ceil(n*rho), n=%d, reps=%d, seed=%d",
                args.B, args.n, args.reps, args.seed)
    rows = run_mc2(scenarios, template, n_jobs=args.jobs)
    fh = _open_out(args.output)
    try:
        write_mc2_csv(fh, rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.dump_units:
        s = scenarios[args.dump_scenario - 1]
        cfg = Dgp2Config(**{**template.__dict__, "delta": s.delta, "rho": s.rho})
        write_unit_table_csv(args.dump_units, mc2_unit_table(cfg, args.dump_replication))
    return EXIT_OK


def _policy(method: str, inst: ProblemInstance, args):
    if method == "lp":
        return round_lp_to_feasible(solve_lp(inst), inst)
    return _solve(method, inst, args).allocation


def cmd_analyze(args) -> int:
    loaded = load_instance(args.input, args)
    inst = loaded.instance
    lp = solve_lp(inst)
    pi_a = _policy(args.method_a, inst, args)
    pi_b = _policy(args.method_b, inst, args)
    units = ScoredUnits.from_instance(inst, lp.prices)
    t_star = rc_threshold(inst, pi_b)
    if t_star is None:
        t_star = float(np.max(units.ratio))
    report = compare_policies(units, pi_a, pi_b, t_star, args.margin_constant, args.tau_bound)
    out = {"schema": SCHEMA, "instance": loaded.header(),
           "methods": [args.method_a, args.method_b],
           "dual_prices": {"lambda": lp.prices.lam, "nu": lp.prices.nu},
           "t_star": t_star}
    out.update(report.to_dict())
    _emit_json(out, args.output)
    return EXIT_OK


def _positive_float(text: str) -> float:
    x = float(text)
    if not math.isfinite(x) or x <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return x


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="instance file (.json, or .csv with header value,cost)")
    p.add_argument("--budget", type=float, help="total budget for CSV input")
    p.add_argument("--coverage", type=int, help="coverage floor for CSV input")
    p.add_argument("--budget-per-capita", type=float, help="per-capita budget for CSV input")
    p.add_argument("--coverage-share", type=float, help="coverage share for CSV input")
    p.add_argument("--eps", type=float, default=0.05, help="GLC frontier tolerance")
    p.add_argument("--max-iter", type=int, default=100, help="GLC bisection steps")
    p.add_argument("--node-limit", type=int, default=10_000_000, help="exact solver node limit")
    p.add_argument("--output", "-o", help="write JSON here instead of standard output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coverlock", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log run headers to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--trace", action="store_true", help="print the GLC trace to stderr")
    _add_instance_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mc1", help="exact vs LP vs GLC Monte Carlo")
    p.add_argument("--n", default="50,100,200,400", help="grid: 50,100 or 50..500..150")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--C", type=_positive_float, default=0.6, help="per-capita budget")
    p.add_argument("--rho", type=float, default=0.3, help="coverage share")
    p.add_argument("--gamma", type=float, default=2.0, help="cost dispersion")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", "-o", help="table CSV path (default standard output)")
    p.add_argument("--series", help="also write the regret/gap curve CSV here")
    p.set_defaults(func=cmd_mc1)

    p = sub.add_parser("mc2", help="LP vs rank-and-cut misallocation Monte Carlo")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--gamma-sq", type=float, default=0.5)
    p.add_argument("--c0", type=_positive_float, default=1.0)
    p.add_argument("--B", type=_positive_float, default=0.8, help="per-capita budget")
    p.add_argument("--delta-high", type=float, default=1.0)
    p.add_argument("--rho-high", type=float, default=0.5)
    p.add_argument("--rho-low", type=float, default=0.1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", "-o", help="table CSV path (default standard output)")
    p.add_argument("--dump-units", help="write the per-unit table of one replication here")
    p.add_argument("--dump-scenario", type=int, default=1, choices=(1, 2, 3, 4))
    p.add_argument("--dump-replication", type=int, default=0)
    p.set_defaults(func=cmd_mc2)

    p = sub.add_parser("analyze", help="misallocation between two methods")
    _add_instance_flags(p)
    p.add_argument("method_a", choices=METHODS)
    p.add_argument("method_b", choices=METHODS)
    p.add_argument("--margin-constant", type=_positive_float,
                   help="assumed margin density constant for the welfare-loss bound")
    p.add_argument("--tau-bound", type=_positive_float, help="bound on |tau| (default max |v|)")
    p.set_defaults(func=cmd_analyze)
    return parser


def exit_code_for(exc: BaseException) -> int:
    for cls, code in _EXIT_MAP:
        if isinstance(exc, cls):
            return code
    if isinstance(exc, (InputError, ValueError, OSError)):
        return EXIT_INPUT
    raise exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CoverlockError, InputError, ValueError, OSError) as exc:
        code = exit_code_for(exc)
        sys.stderr.write(f"coverlock: {type(exc).__name__}: {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
