"""Command-line front end: deterministic pipelines with CSV/JSON artifacts.

Exit codes separate plumbing from mathematics: 0 on success, 1 for usage
problems (bad flags, malformed expressions, inadmissible inputs,
unwritable output), 2 when a structural invariant fails numerically
(solver divergence, a violated bound, a failed verification check), so
CI can distinguish math regressions from configuration mistakes.

Potential expressions are parsed from a minimal arithmetic grammar over
the variable x with functions sin, cos, exp, log, pow (both `^` and `**`
denote powers), then sampled onto the grid.
"""

from __future__ import annotations

import argparse
import ast
import json
import sys
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import io
from .continuity import (
    PathPolicy,
    ma_defect,
    mobius_potential,
    mt_scan,
    run_continuity_path,
    solve_ma_at_t,
)
from .curvature import verify_round_characteristic_integrand
from .errors import (
    ConfigurationError,
    GridMismatchError,
    InadmissibleError,
    InvariantViolation,
    PreconditionError,
    ResolutionError,
    SolverError,
)
from .flow import FlowPolicy, epsilon_pinching, run_flow
from .functionals import relative_state
from .transverse import BasicPotential, make_grid, metric_state, spectrum
from .verification import DEFAULT_SEED, verify_all

__all__ = ["main", "parse_expression", "build_parser"]


class UsageError(Exception):
    """Raised for bad command lines; mapped to exit code 1."""


# ---------------------------------------------------------------------------
# expression grammar
# ---------------------------------------------------------------------------

_FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "pow": np.power,
}
_CONSTANTS = {"pi": np.pi, "e": np.e}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARYOPS = (ast.UAdd, ast.USub)


def parse_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an arithmetic expression in x into a vectorized callable.

    Only the grammar above is accepted; anything else (names, calls,
    attributes, subscripts) is rejected before evaluation.
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise UsageError(f"cannot parse expression {text!r}: {exc.msg}") from exc

    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)):
            continue
        if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
            continue
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARYOPS):
            continue
        if isinstance(node, (*_BINOPS, *_UNARYOPS)):
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.Name) and (
            node.id == "x" or node.id in _CONSTANTS or node.id in _FUNCTIONS
        ):
            continue
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS
            and not node.keywords
        ):
            continue
        raise UsageError(
            f"expression {text!r} uses disallowed syntax "
            f"({ast.dump(node, annotate_fields=False)[:60]}); "
            "allowed: + - * / ^ numbers, x, pi, e, sin, cos, exp, log, pow"
        )

    code = compile(tree, "<expression>", "eval")

    def evaluate(x: np.ndarray) -> np.ndarray:
        env = {"x": np.asarray(x, dtype=np.float64), **_CONSTANTS, **_FUNCTIONS}
        out = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(out, dtype=np.float64), np.shape(x)).copy()

    return evaluate


def _potential_from_expression(text: str, grid) -> BasicPotential:
    return BasicPotential.from_callable(grid, parse_expression(text))


# ---------------------------------------------------------------------------
# parser construction
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(
        prog="reebflow",
        description="Transverse Kahler toolkit: energy functionals, "
        "continuity method, flow smoothing, curvature diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, _Parser] = {}

    def add(name: str, help_text: str, n_default: int) -> _Parser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", type=Path, default=Path("artifacts") / name,
                       help="output directory")
        p.add_argument("--n", type=int, default=n_default, help="grid size")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON file with defaults for this command")
        registry[name] = p
        return p

    p = add("solve", "Newton solve of the potential equation at fixed t", 128)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--psi", default="0.3*(1-x^2)", help="base deformation")
    p.add_argument("--guess", default="0", help="initial Newton guess")
    p.add_argument("--newton-tol", type=float, default=1e-10)

    p = add("path", "continuity-method march in t", 128)
    p.add_argument("--psi", default="0.3*(1-x^2)")
    p.add_argument("--t-start", type=float, default=0.1)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--records", type=int, default=None,
                   help="fixed record count (quadrature nodes); default adaptive")
    p.add_argument("--newton-tol", type=float, default=1e-10)

    p = add("flow", "potential-level flow march in s", 128)
    p.add_argument("--psi", default="0.3*(1-x^2)")
    p.add_argument("--s-end", type=float, default=5.0)
    p.add_argument("--ds", type=float, default=1e-3)
    p.add_argument("--stride", type=int, default=10, help="record stride")

    p = add("scan", "(J, F) scan over a potential family", 256)
    p.add_argument("--family", choices=("mobius", "bump"), default="mobius")
    p.add_argument("--lambdas", type=_float_list, default=[1.0, 2.0, 4.0, 8.0, 16.0])
    p.add_argument("--epsilons", type=_float_list,
                   default=[0.025, 0.05, 0.075, 0.1, 0.125, 0.15])

    p = add("pinch", "two-stage curvature pinching", 128)
    p.add_argument("--psi", default="0.3*(1-x^2)")
    p.add_argument("--eps", type=float, default=0.05)

    p = add("spectrum", "deformed Laplacian eigenvalues", 256)
    p.add_argument("--phi", default="0", help="deformation potential")
    p.add_argument("--k", type=int, default=12, help="eigenvalue count")

    p = add("curvature", "round-model tensor contractions", 128)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--c", type=float, default=4.0)

    p = add("verify-all", "run every invariant suite with artifacts", 128)
    p.add_argument("--quick", action="store_true",
                   help="fewer randomized samples; identical artifact layout")

    return parser, registry


def _apply_config_file(
    argv: Sequence[str], parser: _Parser, registry: dict[str, _Parser]
) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        loaded = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise UsageError("config file must hold a JSON object")

    command_parser = registry[args.command]
    valid = {a.dest for a in command_parser._actions}
    defaults = {}
    for key, value in loaded.items():
        dest = key.replace("-", "_")
        if dest == "command":
            continue
        if dest not in valid:
            raise UsageError(f"config key {key!r} unknown for command {args.command!r}")
        if dest in ("out", "config"):
            value = Path(value)
        if dest in ("lambdas", "epsilons") and isinstance(value, str):
            value = _float_list(value)
        defaults[dest] = value
    command_parser.set_defaults(**defaults)
    # reparse so explicit flags still take precedence over the file
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _finish(args, config: dict, artifacts: list[Path], t0: float, extra=None) -> Path:
    config = {"command": args.command, "n": args.n, "seed": args.seed, **config}
    return io.write_manifest(
        Path(args.out) / "manifest.json", config, artifacts, time.perf_counter() - t0, extra
    )


def _cmd_solve(args) -> int:
    t0 = time.perf_counter()
    grid = make_grid(args.n)
    base = metric_state(_potential_from_expression(args.psi, grid))
    guess = _potential_from_expression(args.guess, grid)
    policy = PathPolicy(newton_tol=args.newton_tol)
    phi = solve_ma_at_t(args.t, base, guess, policy)
    residual = float(np.abs(ma_defect(phi, args.t, base)).max())
    out = Path(args.out)
    artifacts = [
        io.write_field_csv(out / "solution.csv", grid.x, phi.values),
        io.write_state_json(out / "state.json", relative_state(base, phi)),
    ]
    _finish(args, {"t": args.t, "psi": args.psi, "guess": args.guess,
                   "newton_tol": args.newton_tol}, artifacts, t0,
            extra={"residual": residual})
    print(f"solve: t = {args.t:g}, residual {residual:.3e} -> {out}")
    return 0


def _cmd_path(args) -> int:
    t0 = time.perf_counter()
    grid = make_grid(args.n)
    base = metric_state(_potential_from_expression(args.psi, grid))
    policy = PathPolicy(newton_tol=args.newton_tol)
    path = run_continuity_path(
        base,
        t_start=args.t_start,
        t_end=args.t_end,
        policy=policy,
        records=args.records,
    )
    end = path.endpoint()
    out = Path(args.out)
    artifacts = [
        io.write_path_csv(out / "path.csv", path),
        io.write_field_csv(out / "endpoint.csv", grid.x, end.phi.values),
        io.write_state_json(out / "endpoint_state.json", relative_state(base, end.phi)),
    ]
    _finish(args, {"psi": args.psi, "t_start": args.t_start, "t_end": args.t_end,
                   "records": args.records, "newton_tol": args.newton_tol},
            artifacts, t0, extra={"endpoint_residual": end.residual,
                                  "records_written": len(path.records)})
    print(f"path: {len(path.records)} records, endpoint residual {end.residual:.3e} -> {out}")
    if not path.completed:
        raise InvariantViolation(f"path did not reach t = {args.t_end}: {path.failure}")
    return 0


def _cmd_flow(args) -> int:
    t0 = time.perf_counter()
    grid = make_grid(args.n)
    base = metric_state(_potential_from_expression(args.psi, grid))
    policy = FlowPolicy(ds=args.ds, record_stride=args.stride)
    traj = run_flow(base, s_end=args.s_end, policy=policy)
    out = Path(args.out)
    artifacts = [io.write_flow_csv(out / "flow.csv", traj)]
    end = traj.endpoint()
    _finish(args, {"psi": args.psi, "s_end": args.s_end, "ds": args.ds,
                   "stride": args.stride}, artifacts, t0,
            extra={"final_sup_h": float(np.abs(end.h).max())})
    print(f"flow: {len(traj.records)} records to s = {end.s:g}, "
          f"sup|h| {float(np.abs(end.h).max()):.3e} -> {out}")
    if not traj.completed:
        raise InvariantViolation(f"flow stopped early: {traj.failure}")
    return 0


def _cmd_scan(args) -> int:
    t0 = time.perf_counter()
    grid = make_grid(args.n)
    from .transverse import reference_state

    ref = reference_state(grid)
    if args.family == "mobius":
        members = [(lam, mobius_potential(lam, grid)) for lam in args.lambdas]
        params = args.lambdas
    else:
        p2 = parse_expression("(3*x^2-1)/2")
        members = [
            (eps, BasicPotential.from_callable(grid, lambda x, e=eps: e * p2(x)))
            for eps in args.epsilons
        ]
        params = args.epsilons
    scans = mt_scan({args.family: members}, ref)
    out = Path(args.out)
    artifacts = [io.write_scan_csv(out / "scan.csv", scans)]
    scan = scans[0]
    _finish(args, {"family": args.family, "params": list(map(float, params))},
            artifacts, t0, extra={"c1": scan.c1, "c2": scan.c2})
    print(f"scan: {args.family} over {len(params)} members, "
          f"fit F ~ {scan.c1:.4g} J - {scan.c2:.4g} -> {out}")
    return 0


def _cmd_pinch(args) -> int:
    t0 = time.perf_counter()
    grid = make_grid(args.n)
    base = metric_state(_potential_from_expression(args.psi, grid))
    result = epsilon_pinching(base, args.eps)
    out = Path(args.out)
    artifacts = [
        io.write_pinch_json(out / "pinch.json", result),
        io.write_flow_csv(out / "flow.csv", result.trajectory),
    ]
    _finish(args, {"psi": args.psi, "eps": args.eps}, artifacts, t0,
            extra={"achieved": result.achieved, "calabi": result.calabi})
    print(f"pinch: achieved {result.achieved:.3e} (target {args.eps:g}), "
          f"Calabi {result.calabi:.3e} -> {out}")
    return 0


def _cmd_spectrum(args) -> int:
    t0 = time.perf_counter()
    grid = make_grid(args.n)
    state = metric_state(_potential_from_expression(args.phi, grid))
    result = spectrum(state, k=args.k)
    out = Path(args.out)
    artifacts = [io.write_spectrum_csv(out / "spectrum.csv", result)]
    _finish(args, {"phi": args.phi, "k": args.k}, artifacts, t0,
            extra={"has_obstruction": result.has_obstruction,
                   "obstruction_gap": result.obstruction_gap,
                   "clusters": [[ev, mult] for ev, mult in result.clusters]})
    flag = "present" if result.has_obstruction else "absent"
    print(f"spectrum: {args.k + 1} eigenvalues, obstruction eigenvalue {flag} "
          f"(gap {result.obstruction_gap:.3e}) -> {out}")
    return 0


def _cmd_curvature(args) -> int:
    t0 = time.perf_counter()
    report = verify_round_characteristic_integrand(args.m, args.c)
    out = Path(args.out)
    artifacts = [io.write_curvature_json(out / "curvature.json", report)]
    _finish(args, {"m": args.m, "c": args.c}, artifacts, t0)
    print(f"curvature: m = {args.m}, c = {args.c:g}, "
          f"integrand {report.integrand:.3e} (sign {report.sign}) -> {out}")
    return 0


def _cmd_verify_all(args) -> int:
    run = verify_all(Path(args.out), seed=args.seed, quick=args.quick)
    for check in run.checks:
        mark = "PASS" if check.passed else "FAIL"
        print(f"[{mark}] {check.name:32s} value {check.value:.3e}  "
              f"tol {check.tolerance:.1e}")
    n_pass = sum(c.passed for c in run.checks)
    print(f"verify-all: {n_pass}/{len(run.checks)} checks passed "
          f"in {run.wall_time:.1f}s -> {args.out}")
    if not run.passed:
        raise InvariantViolation(
            "failed checks: " + ", ".join(c.name for c in run.failures())
        )
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "path": _cmd_path,
    "flow": _cmd_flow,
    "scan": _cmd_scan,
    "pinch": _cmd_pinch,
    "spectrum": _cmd_spectrum,
    "curvature": _cmd_curvature,
    "verify-all": _cmd_verify_all,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser, registry = build_parser()
    try:
        args = _apply_config_file(
            list(argv) if argv is not None else sys.argv[1:], parser, registry
        )
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigurationError, GridMismatchError, PreconditionError,
            InadmissibleError, ResolutionError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    except (InvariantViolation, SolverError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
