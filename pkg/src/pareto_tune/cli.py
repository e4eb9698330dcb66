"""Command-line harness: ``run``, ``metrics`` and ``true-front``.

Exit codes: 0 success, 2 configuration or input error, 3 every evaluation
failed, 4 no feasible point found.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import load_problem, load_run_config
from .errors import ConfigError, NoFeasibleFrontError, UndefinedMetricError
from .expressions import compile_constraints
from .manager import RunConfig, RunResult, run_optimization
from .metrics import DEFAULT_P, FrontSample, all_metrics
from .problem import BUILTIN_PROBLEMS, ProblemSpec, builtin_problem, true_front

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_INFEASIBLE = 0, 2, 3, 4
THREADS_ENV = "PARETO_TUNE_THREADS"
REFERENCE_COUNT = 1000

log = logging.getLogger("pareto_tune")


def _fmt(value: float) -> str:
    return repr(float(value))


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def _split_directions(values: Sequence[str] | None) -> list[str] | None:
    if not values:
        return None
    out = [d.strip() for v in values for d in v.split(",") if d.strip()]
    return out or None


# ---------------------------------------------------------------------------
# CSV helpers


def read_numeric_csv(path: str | Path) -> tuple[list[str] | None, list[list[str]], list[int]]:
    """Rows of a CSV file plus an optional header; raises ConfigError on ragged rows."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    reader = csv.reader(io.StringIO(text))
    header: list[str] | None = None
    rows: list[list[str]] = []
    lines: list[int] = []
    width = None
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        cells = [c.strip() for c in row]
        if width is None:
            width = len(cells)
            try:
                [float(c) for c in cells]
            except ValueError:
                header = cells
                continue
        if len(cells) != width:
            raise ConfigError(f"{path}:{reader.line_num}: expected {width} fields, found {len(cells)}")
        rows.append(cells)
        lines.append(reader.line_num)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return header, rows, lines


def _to_float(cell: str, path, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ConfigError(f"{path}:{line}: not a number: {cell!r}") from None
    if not np.isfinite(value):
        raise ConfigError(f"{path}:{line}: non-finite value {cell!r}")
    return value


def load_reference_csv(path: str | Path) -> np.ndarray:
    """Every column of a reference front file is an objective."""
    _, rows, lines = read_numeric_csv(path)
    return np.array([[_to_float(c, path, ln) for c in row] for row, ln in zip(rows, lines)])


def load_front_csv(path: str | Path, num_objectives: int) -> np.ndarray:
    """Objective columns of a front file, dropping rows flagged infeasible.

    In a file written by ``run`` the objectives are the ``num_objectives``
    columns right before ``theta``; a plain file must have exactly
    ``num_objectives`` columns.
    """
    header, rows, lines = read_numeric_csv(path)
    feasible_col = None
    if header is not None and "theta" in header:
        end = header.index("theta")
        cols = list(range(end - num_objectives, end))
        if cols[0] < 0:
            raise ConfigError(f"{path}: fewer than {num_objectives} objective columns")
        if "feasible" in header:
            feasible_col = header.index("feasible")
    else:
        if len(rows[0]) != num_objectives:
            raise ConfigError(
                f"{path}: {len(rows[0])} columns but the reference front has {num_objectives}"
            )
        cols = list(range(num_objectives))
    points = []
    for row, ln in zip(rows, lines):
        if feasible_col is not None:
            flag = row[feasible_col].lower()
            if flag not in ("true", "false", "1", "0"):
                raise ConfigError(f"{path}:{ln}: feasible must be true or false, got {row[feasible_col]!r}")
            if flag in ("false", "0"):
                continue
        points.append([_to_float(row[c], path, ln) for c in cols])
    if not points:
        raise NoFeasibleFrontError(f"{path}: no feasible rows")
    return np.array(points)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _variable_cells(problem: ProblemSpec, point: np.ndarray) -> list[str]:
    cells = []
    for spec, value in zip(problem.variables, point):
        decoded = spec.decode(value)
        cells.append(_fmt(decoded) if isinstance(decoded, float) else str(decoded))
    return cells


def write_front(path: Path, problem: ProblemSpec, result: RunResult, sign: np.ndarray) -> None:
    header = [v.name for v in problem.variables] + list(problem.objective_names) + ["theta", "feasible"]
    rows = []
    for entry in result.archive:
        ev = entry.eval
        rows.append(
            _variable_cells(problem, entry.point)
            + [_fmt(s * f) for s, f in zip(sign, ev.objectives)]
            + [_fmt(ev.theta), "true" if ev.feasible else "false"]
        )
    _write_csv(path, header, rows)


def write_evals(path: Path, problem: ProblemSpec, result: RunResult, sign: np.ndarray) -> None:
    header = (
        ["iteration", "solver"]
        + [v.name for v in problem.variables]
        + list(problem.objective_names)
        + ["theta", "feasible", "cache_hit", "failed"]
    )
    rows = []
    for rec in result.log:
        ev = rec.evaluation
        rows.append(
            [str(rec.iteration), rec.solver]
            + _variable_cells(problem, rec.point)
            + [_fmt(s * f) for s, f in zip(sign, ev.objectives)]
            + [
                _fmt(ev.theta),
                "true" if ev.feasible else "false",
                "true" if rec.cache_hit else "false",
                "true" if ev.failed else "false",
            ]
        )
    _write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# Commands


def _build_problem(args) -> ProblemSpec:
    directions = _split_directions(args.direction)
    if args.problem_file:
        return load_problem(args.problem_file, args.constraint or (), directions)
    problem = builtin_problem(args.problem)
    texts = args.constraint or ()
    nonlinear = compile_constraints(texts, problem.objective_names, [v.name for v in problem.variables])
    problem = problem.with_constraints(nonlinear=nonlinear)
    if directions:
        problem = problem.with_directions(directions)
    return problem


def _build_config(args) -> RunConfig:
    overrides = {
        "budget": args.budget,
        "population_size": args.population,
        "num_centers": args.centers,
        "initial_step": args.step_init,
        "alpha": args.alpha,
        "epsilon": args.epsilon,
        "rho": args.rho,
        "seed": args.seed,
        "max_concurrent": args.max_concurrent if args.max_concurrent is not None else _default_threads(),
        "metric_p": args.metric_p,
    }
    if args.config:
        return load_run_config(args.config, **overrides)
    return RunConfig(**{k: v for k, v in overrides.items() if v is not None})


def _reference(args, problem: ProblemSpec, sign: np.ndarray) -> np.ndarray | None:
    """Reference front in minimization orientation, cut to its feasible part.

    Only constraints that depend on objective values alone can be checked on
    a front of objective vectors; the others are ignored here.
    """
    source = args.reference_front
    if source == "none":
        return None
    if source in (None, "builtin"):
        if problem.reference_front is None:
            if source == "builtin":
                raise ConfigError(f"problem {problem.name!r} has no builtin reference front")
            return None
        ref = np.asarray(problem.reference_front(REFERENCE_COUNT), dtype=float)
    else:
        ref = load_reference_csv(source)
    if ref.shape[1] != problem.num_objectives:
        raise ConfigError(
            f"reference front has {ref.shape[1]} columns, problem has {problem.num_objectives} objectives"
        )
    ref = ref * sign
    checks = [c for c in problem.nonlinear_constraints if not c.uses_variables]
    if checks:
        dummy = np.full(problem.dim, np.nan)
        keep = [all(c(dummy, f) <= 0.0 for c in checks) for f in ref]
        ref = ref[np.array(keep, dtype=bool)]
        if len(ref) == 0:
            raise ConfigError("no reference front point satisfies the objective constraints")
    return ref


def cmd_run(args) -> int:
    problem = _build_problem(args)
    cfg = _build_config(args)
    directions = _split_directions(args.direction) or ["min"] * problem.num_objectives
    sign = np.array([-1.0 if d == "max" else 1.0 for d in directions])
    reference = _reference(args, problem, sign)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None

    started = time.perf_counter()
    result = run_optimization(problem, cfg, reference)
    elapsed = time.perf_counter() - started

    write_front(out / "front.csv", problem, result, sign)
    write_evals(out / "evals.csv", problem, result, sign)
    metrics = result.metrics or {}
    summary = {
        "problem": problem.name,
        "seed": cfg.seed,
        "termination": result.termination,
        "counters": result.counters,
        "gd": metrics.get("gd"),
        "igd": metrics.get("igd"),
        "avg_hausdorff": metrics.get("avg_hausdorff"),
        "metric_p": cfg.metric_p,
        "metric_note": metrics.get("error"),
        "penalty_rho": result.rho,
        "runtime_seconds": round(elapsed, 3),
        "config": {
            **cfg.to_dict(),
            "constraints": [c.label for c in problem.nonlinear_constraints],
            "linear_constraints": [list(r.coeffs) + [r.rhs] for r in problem.linear_constraints],
            "directions": directions,
            "reference_front": args.reference_front or ("builtin" if reference is not None else None),
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")

    counters = result.counters
    if counters["unique_evaluations"] > 0 and counters["failed_evaluations"] == counters["unique_evaluations"]:
        print("error: every evaluation failed", file=sys.stderr)
        return EXIT_RUNTIME
    if counters["feasible_archive_size"] == 0:
        print("error: no feasible point found", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(
        f"{result.termination}: {counters['unique_evaluations']} evaluations, "
        f"{counters['feasible_archive_size']} feasible front points -> {out}"
    )
    return EXIT_OK


def cmd_metrics(args) -> int:
    reference = load_reference_csv(args.reference)
    front = load_front_csv(args.front, reference.shape[1])
    values = all_metrics(FrontSample(front, True), reference, args.metric_p)
    print(json.dumps(values, indent=2))
    return EXIT_OK


def cmd_true_front(args) -> int:
    if args.problem not in ("zdt1", "zdt3"):
        raise ConfigError(f"no analytic front for {args.problem!r}; choose zdt1 or zdt3")
    if args.count < 2:
        raise ConfigError("count must be >= 2")
    pts = true_front(args.problem, args.count)
    rows = [[_fmt(a), _fmt(b)] for a, b in pts]
    if args.out in (None, "-"):
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["f1", "f2"])
        writer.writerows(rows)
    else:
        _write_csv(Path(args.out), ["f1", "f2"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pareto-tune", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize a problem and write front/evals/summary files")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", help=f"builtin problem: {', '.join(BUILTIN_PROBLEMS)}")
    src.add_argument("--problem-file", help="JSON problem document")
    run.add_argument("--config", help="JSON run config document (flags override it)")
    run.add_argument("--budget", type=int, help="unique evaluation budget (default 25000)")
    run.add_argument("--population", type=int, help="GA population size (default 50)")
    run.add_argument("--centers", type=int, help="number of pattern-search centers (default 10)")
    run.add_argument("--step-init", type=float, help="initial pattern step as a fraction of each range")
    run.add_argument("--alpha", type=float, help="sufficient decrease factor in (0, 1)")
    run.add_argument("--epsilon", type=float, help="feasibility tolerance on the max violation")
    run.add_argument("--rho", type=float, help="penalty weight factor")
    run.add_argument("--seed", type=int, help="random seed (default 0)")
    run.add_argument("--max-concurrent", type=int, help=f"parallel evaluations (default ${THREADS_ENV} or 1)")
    run.add_argument("--constraint", action="append", help="e.g. 'f1 >= 0.6'; repeatable")
    run.add_argument("--direction", action="append", help="min or max per objective; repeatable or comma separated")
    run.add_argument("--reference-front", help="'builtin', 'none' or a CSV of objective vectors")
    run.add_argument("--out-dir", default="pareto-out", help="output directory (default ./pareto-out)")
    run.add_argument("--metric-p", type=float, help="power of the GD/IGD means (default 1)")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="GD, IGD and averaged Hausdorff distance between two CSV fronts")
    met.add_argument("front", help="approximation front CSV (e.g. a front.csv)")
    met.add_argument("reference", help="reference front CSV")
    met.add_argument("--metric-p", type=float, default=DEFAULT_P)
    met.set_defaults(func=cmd_metrics)

    tf = sub.add_parser("true-front", help="write the analytic Pareto front of zdt1 or zdt3")
    tf.add_argument("problem")
    tf.add_argument("--count", type=int, default=REFERENCE_COUNT)
    tf.add_argument("--out", help="output CSV path (default stdout)")
    tf.set_defaults(func=cmd_true_front)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except NoFeasibleFrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
