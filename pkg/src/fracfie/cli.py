"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 no convergence, 3 hypotheses
infeasible, 4 diagnostic violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .mnc import (
    DEFAULT_SLACK,
    DegenerateThetaError,
    FunctionFamily,
    darbo_iteration_diagnostic,
    gamma0_estimate,
    is_nonincreasing,
    random_ball_family,
)
from .problems import ProblemFileError, resolve_problem
from .problems.expression import ExpressionEvalError
from .solver import (
    DivergenceError,
    MissingEnvelopeError,
    NonFiniteEvaluationError,
    apply_H,
    contraction_estimate,
    hypothesis_report,
    picard_solve,
)

log = logging.getLogger("fracfie")

EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_INFEASIBLE, EXIT_DIAG = 0, 1, 2, 3, 4

DEFAULT_GRID = 1025
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
DEFAULT_THETA = 0.05
DEFAULT_FAMILY = 8
DEFAULT_HULL = 16
DEFAULT_ITERS = 6
DEFAULT_SEED = 0


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _manifest(command: str, args: argparse.Namespace, **extra: Any) -> dict:
    m = {
        "command": command,
        "problem": args.problem,
        "grid_n": args.grid,
        "toolkit_version": __version__,
    }
    m.update(extra)
    return m


def _dump_json(path: Optional[Path], payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump_csv(path: Path, manifest: dict, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}.csv")


def _load(args: argparse.Namespace):
    try:
        problem = resolve_problem(args.problem)
    except (ProblemFileError, KeyError) as exc:
        raise InputError(str(exc.args[0] if isinstance(exc, KeyError) else exc)) from exc
    if args.grid is None:
        args.grid = problem.grid_n
    if args.grid < 3:
        raise InputError("--grid must be >= 3")
    return problem.with_grid(args.grid)


def cmd_solve(args: argparse.Namespace) -> int:
    problem = _load(args)
    if args.tol <= 0 or args.max_iter < 1:
        raise InputError("--tol must be > 0 and --max-iter >= 1")
    out = Path(args.out) if args.out else Path(f"{problem.name}_solve.json")
    csv_path = _sibling(out, "residuals")
    manifest = _manifest(
        "solve", args, tol=args.tol, max_iter=args.max_iter, seed=None, mode=None,
        outputs=[str(out), str(csv_path)],
    )
    try:
        result = picard_solve(problem, tol=args.tol, max_iter=args.max_iter)
    except DivergenceError as exc:
        log.error("%s", exc)
        return EXIT_NOCONV
    payload = {"manifest": manifest, "problem": problem.name, "result": result.to_dict()}
    _dump_json(out, payload)
    rows = [(k + 1, s, r) for k, (s, r) in enumerate(zip(result.step_history, result.residual_history))]
    _dump_csv(csv_path, manifest, ("iteration", "step_diff", "residual"), rows)
    print(
        f"{problem.name}: converged={result.converged} iterations={result.iterations} "
        f"residual={result.final_residual:.3e} sup|y|={result.solution.sup_norm():.6f}",
        file=sys.stderr,
    )
    return EXIT_OK if result.converged else EXIT_NOCONV


def cmd_check(args: argparse.Namespace) -> int:
    problem = _load(args)
    mode = {"paper": "paper-as-stated"}.get(args.mode, args.mode)
    scan = (args.scan[0], args.scan[1], int(args.scan[2])) if args.scan else (1e-4, 5.0, 5000)
    try:
        report = hypothesis_report(problem, mode, e0=args.e0, scan=scan)
    except MissingEnvelopeError as exc:
        raise InputError(str(exc)) from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    manifest = _manifest(
        "check", args, tol=None, max_iter=None, seed=None, mode=mode,
        e0=args.e0, scan=list(scan) if args.e0 is None else None,
        outputs=[args.out] if args.out else [],
    )
    _dump_json(Path(args.out) if args.out else None, {"manifest": manifest, "report": report.to_dict()})
    feasible = report.e0_holds if args.e0 is not None else report.e0_feasible_interval is not None
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_mnc(args: argparse.Namespace) -> int:
    problem = _load(args)
    if args.family_size < 1 or args.iters < 1 or args.hull_samples < 0:
        raise InputError("--family-size and --iters must be >= 1, --hull-samples >= 0")
    radius = args.e0 if args.e0 is not None else (problem.e0 if problem.e0 is not None else 1.0)
    rng = np.random.default_rng(args.seed)
    try:
        family = random_ball_family(args.family_size, radius, args.grid, rng, kind=args.family)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.operator == "identity":
        op = lambda y: y  # noqa: E731
    else:
        op = lambda y: apply_H(problem, y)  # noqa: E731
    diag_seed = int(rng.integers(0, 2**63 - 1))
    try:
        seq = darbo_iteration_diagnostic(op, family, args.iters, args.theta, args.hull_samples, rng_seed=diag_seed)
    except DegenerateThetaError as exc:
        raise InputError(str(exc)) from exc
    ok = is_nonincreasing(seq, DEFAULT_SLACK)
    out = Path(args.out) if args.out else Path(f"{problem.name}_mnc.json")
    csv_path = _sibling(out, "gamma")
    manifest = _manifest(
        "mnc", args, tol=None, max_iter=None, seed=args.seed, mode=None,
        operator=args.operator, family=args.family, family_size=args.family_size,
        theta=args.theta, iters=args.iters, hull_samples=args.hull_samples, radius=radius,
        outputs=[str(out), str(csv_path)],
    )
    payload = {
        "manifest": manifest,
        "gamma_sequence": seq,
        "nonincreasing": ok,
        "slack": DEFAULT_SLACK,
        "seed_profile": gamma0_estimate(FunctionFamily(family), [2 * args.theta, args.theta]).to_dict(),
    }
    if args.operator == "H":
        payload["contraction"] = contraction_estimate(problem, family, args.theta).to_dict()
    _dump_json(out, payload)
    _dump_csv(csv_path, manifest, ("q", "gamma"), [(q + 1, g) for q, g in enumerate(seq)])
    print(f"{problem.name}: gamma sequence {' '.join(f'{g:.6g}' for g in seq)} nonincreasing={ok}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_DIAG


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracfie", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--problem", required=True, help="built-in name (example1, example2) or JSON file")
        p.add_argument("--grid", type=int, default=None, help=f"number of nodes (default {DEFAULT_GRID})")

    s = sub.add_parser("solve", help="Picard iteration from y0 = 0")
    common(s)
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    s.add_argument("--out", default=None, metavar="FILE")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="evaluate the existence hypotheses")
    common(c)
    c.add_argument("--mode", choices=["definition", "paper", "paper-as-stated"], default="definition")
    g = c.add_mutually_exclusive_group()
    g.add_argument("--e0", type=float, default=None)
    g.add_argument("--scan", type=float, nargs=3, metavar=("LO", "HI", "STEPS"), default=None)
    c.add_argument("--out", default=None, metavar="FILE")
    c.set_defaults(func=cmd_check)

    m = sub.add_parser("mnc", help="Darbo iteration diagnostic on a random family")
    common(m)
    m.add_argument("--family-size", type=int, default=DEFAULT_FAMILY)
    m.add_argument("--family", choices=["rough", "smooth", "constant"], default="rough")
    m.add_argument("--theta", type=float, default=DEFAULT_THETA)
    m.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    m.add_argument("--hull-samples", type=int, default=DEFAULT_HULL)
    m.add_argument("--seed", type=int, default=DEFAULT_SEED)
    m.add_argument("--e0", type=float, default=None, help="radius of the seed ball (default: problem e0)")
    m.add_argument("--operator", choices=["H", "identity"], default="H")
    m.add_argument("--out", default=None, metavar="FILE")
    m.set_defaults(func=cmd_mnc)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"fracfie: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ExpressionEvalError, NonFiniteEvaluationError) as exc:
        print(f"fracfie: evaluation error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
