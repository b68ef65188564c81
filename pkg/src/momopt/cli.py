"""Command line entry point: ``momopt minimize|finite-min|polar-min``."""

from __future__ import annotations

import argparse
import sys

from .driver import (RunConfig, RunStatus, dumps, finite_minimizers, load_problem,
                     polar_minimize, single_order)
from .errors import CapExceeded, MomoptError
from .polar import PolarMode
from .polyparse import ParseError, VariableTable, parse_polynomial
from .relaxation import Mode, POPInstance
from .sdpsolve import SolverOptions

EXIT_CODES = {RunStatus.EXACT: 0, RunStatus.OPTIMAL: 0, RunStatus.INFEASIBLE: 2,
              RunStatus.MAX_ORDER: 3}
EXIT_INPUT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    src = common.add_argument_group("problem")
    src.add_argument("--problem", help="JSON file with vars, objective, inequalities, equalities")
    src.add_argument("--vars", help="comma separated variable names, e.g. x,y,z")
    src.add_argument("--objective", help="polynomial to minimize")
    src.add_argument("--ineq", action="append", default=[], help="constraint g >= 0 (repeatable)")
    src.add_argument("--eq", action="append", default=[], help="constraint h = 0 (repeatable)")
    opt = common.add_argument_group("options")
    opt.add_argument("--order", type=int, help="relaxation order (starting order for loops)")
    opt.add_argument("--max-order", type=int, help="last order tried (default order + 4)")
    opt.add_argument("--mode", choices=["qm", "preorder"], default="qm")
    opt.add_argument("--solver-tol", type=float, default=1e-8, help="relative duality gap target")
    opt.add_argument("--extract-tol", type=float, default=1e-2, help="moment residual threshold")
    opt.add_argument("--rank-tol", type=float, help="fixed relative rank threshold")
    opt.add_argument("--seed", type=int, default=42)
    opt.add_argument("--output", help="write JSON here instead of stdout")
    opt.add_argument("--trace", action="store_true",
                     help="include per-order diagnostics and log solver iterations to stderr")
    opt.add_argument("--figures", metavar="DIR", help="also render PNG figures into DIR")

    p = _Parser(prog="momopt", description="Global polynomial minimization "
                                "by moment relaxations with minimizer extraction.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("minimize", parents=[common], help="solve one relaxation order")
    sub.add_parser("finite-min", parents=[common], help="raise the order until minimizers are found")
    pm = sub.add_parser("polar-min", parents=[common], help="add polar-ideal or KKT equalities first")
    pm.add_argument("--polar-mode", choices=["product", "branch", "kkt"],
                    help="default: product while within caps, else branch")
    return p


def _problem(args) -> POPInstance:
    if args.problem:
        if args.objective or args.vars:
            raise ValueError("give either --problem or --vars/--objective, not both")
        return load_problem(args.problem)
    if not args.vars or not args.objective:
        raise ValueError("--vars and --objective are required without --problem")
    vars = VariableTable.from_string(args.vars)
    f = parse_polynomial(args.objective, vars)
    g = [parse_polynomial(s, vars) for s in args.ineq]
    h = [parse_polynomial(s, vars) for s in args.eq]
    return POPInstance(f, g, h, vars)


def run(args) -> tuple[dict, int]:
    pop = _problem(args)
    solver = SolverOptions(gap_tol=args.solver_tol, log=sys.stderr if args.trace else None)
    cfg = RunConfig(initial_order=args.order, max_order=args.max_order, mode=Mode(args.mode),
                    residual_tol=args.extract_tol, rank_tol=args.rank_tol, solver=solver,
                    seed=args.seed)
    if args.command == "minimize":
        order = args.order if args.order is not None else pop.min_order()
        report = single_order(pop, order, cfg)
    elif args.command == "finite-min":
        report = finite_minimizers(pop, cfg)
    else:
        order = args.order if args.order is not None else pop.min_order()
        mode = PolarMode(args.polar_mode) if args.polar_mode else None
        report = polar_minimize(pop, order, mode, cfg)
    out = report.to_dict()
    out["vars"] = list(pop.vars.names)
    if report.message:
        out["message"] = report.message
    if args.trace:
        out["trace"] = [t.to_dict() for t in report.trace]
    if args.figures:
        from .plotting import write_figures
        out["figures"] = write_figures(report, args.figures)
    return out, EXIT_CODES[report.status]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out, code = run(args)
    except CapExceeded as exc:
        print(f"momopt: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ParseError, ValueError, OSError, MomoptError) as exc:
        print(f"momopt: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps(out)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
