"""
Command-line front end

    python -m app.cli star-int --f f.json --g g.json --tol 1e-9

Prints one JSON report on stdout. Exit status: 0 success, 2 nonexistent
integral, 3 invalid input, 4 budget exhausted.
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from app.config import settings
from app.services import commands
from app.services.document_loader import document_loader
from app.utils.errors import CalculusError, InvariantError
from app.utils.logger import logger, redirect_logger

_FUNC_FLAGS = {
    "variation": ("f",),
    "step-approx": ("f",),
    "rs-int": ("f", "g"),
    "star-int": ("f", "g"),
    "by-parts-check": ("f", "g"),
    "fubini-check": ("f", "g", "spec"),
    "holder": ("f", "y", "g"),
    "minkowski": ("f", "y", "g"),
    "norm-witness": ("g",),
    "mollify": ("f",),
    "mollify-report": ("f", "g"),
    "ode-solve": ("spec",),
    "delta-correct": ("spec",),
}


def _floats(raw: str) -> List[float]:
    try:
        return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got '{raw}'")


def _intervals(raw: str) -> List[Tuple[float, float]]:
    """'0.1:0.2,0.4:0.6' -> [(0.1, 0.2), (0.4, 0.6)]"""
    out = []
    for part in raw.split(","):
        try:
            u, v = part.split(":")
            out.append((float(u), float(v)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected u:v pairs, got '{part}'")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stieltjes", description=settings.app_name)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, flags in _FUNC_FLAGS.items():
        p = sub.add_parser(name)
        for flag in flags:
            p.add_argument(f"--{flag}", required=True, help=f"path to the {flag} document")
        p.add_argument("--tol", type=float, help=f"target tolerance (default {settings.tol:g})")
        p.add_argument("--series-tol", type=float, default=settings.series_tol)
        p.add_argument("--max-depth", type=int, help=f"bisection depth cap (default {settings.max_depth})")
        p.add_argument("--out", help="write the report (.json) or its table (.csv) here")
        p.add_argument("--verbose", action="store_true")
        if name in ("step-approx", "norm-witness", "mollify"):
            p.add_argument("--eps", type=float, required=name != "norm-witness", default=1e-3)
        if name in ("mollify-report", "delta-correct"):
            p.add_argument("--eps-grid", type=_floats, default=[0.1, 0.05, 0.025])
            p.add_argument("--n-jobs", type=int, default=settings.n_jobs)
        if name in ("holder", "minkowski"):
            p.add_argument("--p", type=float, required=True)
        if name == "variation":
            p.add_argument("--intervals", type=_intervals)
        if name in ("variation", "star-int"):
            p.add_argument("--c", type=float, help="also report the split at c")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default=settings.host)
    serve.add_argument("--port", type=int, default=settings.port)
    return parser


def _load_inputs(args: argparse.Namespace) -> Tuple[Dict[str, object], Dict[str, str]]:
    funcs: Dict[str, object] = {}
    inputs: Dict[str, str] = {}
    for flag in _FUNC_FLAGS[args.command]:
        path = getattr(args, flag)
        if flag != "spec":
            funcs[flag], inputs[flag] = document_loader.load_func(path, args.series_tol)
        elif args.command == "fubini-check":
            funcs[flag], inputs[flag] = document_loader.load_kernel(path, args.series_tol)
        else:
            coeffs, gamma, tol, inputs[flag] = document_loader.load_ode(path, args.series_tol)
            funcs[flag] = (coeffs, gamma, tol)
    return funcs, inputs


def dispatch(args: argparse.Namespace) -> commands.Outcome:
    funcs, inputs = _load_inputs(args)
    f, g, y = funcs.get("f"), funcs.get("g"), funcs.get("y")
    name, tol = args.command, args.tol
    if name == "variation":
        return commands.run_variation(f, inputs, tol, args.intervals, args.c)
    if name == "step-approx":
        return commands.run_step_approx(f, args.eps, inputs)
    if name == "rs-int":
        return commands.run_rs_int(f, g, inputs, tol, args.max_depth)
    if name == "star-int":
        return commands.run_star_int(f, g, inputs, tol, args.c)
    if name == "by-parts-check":
        return commands.run_by_parts(f, g, inputs, tol)
    if name == "fubini-check":
        return commands.run_fubini(funcs["spec"], f, g, inputs, tol)
    if name in ("holder", "minkowski"):
        return commands.run_inequality(name, f, y, g, args.p, inputs, tol)
    if name == "norm-witness":
        return commands.run_norm_witness(g, args.eps, inputs, tol)
    if name == "mollify":
        return commands.run_mollify(f, args.eps, inputs)
    if name == "mollify-report":
        return commands.run_mollify_report(f, g, args.eps_grid, inputs, args.n_jobs, tol)
    coeffs, gamma, ode_tol = funcs["spec"]
    ode_tol = ode_tol if tol is None else tol
    if name == "ode-solve":
        return commands.run_ode_solve(coeffs, gamma, inputs, ode_tol)
    return commands.run_delta_correct(coeffs, gamma, args.eps_grid, inputs, ode_tol)


def _write(outcome: commands.Outcome, out: Optional[str]) -> None:
    text = outcome.report.model_dump_json(indent=2)
    if out:
        path = Path(out)
        if path.suffix == ".csv":
            if outcome.table is None:
                raise InvariantError(f"'{outcome.report.command}' produces no table to write as CSV")
            outcome.table.to_csv(path, index=False)
        else:
            path.write_text(text)
    sys.stdout.write(text + "\n")


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2, which is reserved for nonexistent integrals
        return 3 if exc.code else 0

    if args.command == "serve":
        import uvicorn

        uvicorn.run("app.main:app", host=args.host, port=args.port, log_level=settings.log_level.lower())
        return 0

    if args.verbose:
        redirect_logger(sys.stdout, "DEBUG")
    else:
        redirect_logger(sys.stderr, "WARNING")

    logger.info(f"▶️  {args.command}")
    try:
        outcome = dispatch(args)
        _write(outcome, args.out)
    except CalculusError as exc:
        report = commands.error_report(args.command, exc)
        sys.stdout.write(report.model_dump_json(indent=2) + "\n")
        logger.warning(f"❌ {args.command}: {exc.detail}")
        return exc.exit_code
    except ValueError as exc:
        err = InvariantError(str(exc))
        sys.stdout.write(commands.error_report(args.command, err).model_dump_json(indent=2) + "\n")
        return err.exit_code
    logger.info(f"✅ {args.command}: {outcome.report.status}")
    return commands.exit_code_for(outcome.report)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
