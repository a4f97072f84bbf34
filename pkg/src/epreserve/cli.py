"""Command-line front end.

Commands
--------
``measure``         evaluate the measures of one channel
``sweep-fusion``    measures of the noisy fusion process over ``p_noise``
``sweep-dynamics``  measures of the coupled-qubit dynamics over ``tau``
``qpt``             reconstruct a process from tomography records
``report``          render a bundled data fixture

Exit codes are 0 on success, 1 for malformed input and 2 when a solver
does not reach optimal status.  Every failure prints one line starting with
``error:`` to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from . import linalg
from .channels import GATES, ChannelSpec, build_fusion, build_lindblad_process
from .measures import SolverError, SolverOptions, measure_report
from .objects import ProcessMatrix, identity_process
from .qpt import TomographyRecord, missing_labels, qpt_from_counts

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
FIXTURES = ("table1",)
CLIP = 1e-6


class InputError(Exception):
    """Malformed or missing user input (exit code 1)."""


class SweepSolverError(Exception):
    """A solver failure inside a sweep point (exit code 2)."""


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------


def _read_json(path: str | Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def process_from_data(data) -> ProcessMatrix:
    """A two-qubit process from a channel description or a process-matrix object."""
    try:
        if isinstance(data, dict) and "kind" in data:
            chi = ChannelSpec.from_dict(data).build()
        elif isinstance(data, dict) and "re" in data:
            chi = ProcessMatrix.from_json(data)
        else:
            raise InputError("expected a channel description (with 'kind') or a process matrix (with 're')")
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc)) from None
    if chi.n_qubits == 1:
        raise InputError("measures need a two-qubit process")
    return chi


def load_process(path: str | Path) -> ProcessMatrix:
    return process_from_data(_read_json(path))


def _named_targets() -> dict[str, Callable[[], ProcessMatrix]]:
    named: dict[str, Callable[[], ProcessMatrix]] = {
        "fusion": lambda: build_fusion(0.0),
        "identity": lambda: identity_process(2),
    }
    for g in GATES:
        named[g.lower()] = lambda g=g: ChannelSpec("gate", {"name": g}).build()
    return named


def load_target(arg: str) -> ProcessMatrix:
    """A target given as a file path or as a built-in name (``fusion``, a gate name)."""
    if Path(arg).is_file():
        return load_process(arg)
    named = _named_targets()
    key = arg.lower()
    if key not in named:
        raise InputError(f"target {arg!r} is neither a file nor one of {sorted(named)}")
    return named[key]()


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def summary_value(v: float | None) -> str:
    """Six significant digits; values within 1e-6 of 0 or 1 print as 0 or 1."""
    if v is None:
        return "-"
    if abs(v) <= CLIP:
        return "0"
    if abs(v - 1.0) <= CLIP:
        return "1"
    return f"{v:.6g}"


def csv_value(v: float | None) -> str:
    return "" if v is None else f"{v:.6g}"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def aligned_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# measure
# ---------------------------------------------------------------------------


def _options(args) -> SolverOptions:
    return SolverOptions(gap_tol=args.gap_tol)


def cmd_measure(args) -> int:
    chi = load_process(args.spec)
    target = load_target(args.target) if args.target else None
    report = measure_report(chi, target=target, creation=args.creation, opts=_options(args),
                            n_random_products=args.random_products, seed=args.seed)
    data = report.to_dict()
    if args.out:
        write_json(args.out, data)
    rows = [(k, summary_value(data[k])) for k in report.VALUE_FIELDS if data[k] is not None]
    print(aligned_table(("quantity", "value"), rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    """Measures over a strictly increasing grid of one parameter."""

    parameter: str
    grid: list[float]
    reports: list[dict]
    wall_times: list[float] = field(default_factory=list)
    columns: tuple[str, ...] = ()

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if len(self.reports) != len(self.grid):
            raise ValueError("one report per grid point is required")

    def rows(self) -> list[list[float | None]]:
        return [[x] + [r[c] for c in self.columns[1:]] for x, r in zip(self.grid, self.reports)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows():
            w.writerow([csv_value(v) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "columns": list(self.columns),
            "rows": [dict(zip(self.columns, row)) for row in self.rows()],
            "solver": [r["solver"] for r in self.reports],
        }


def _evaluate_point(task) -> tuple[dict | None, str | None, float]:
    """Worker body: build the process, evaluate the measures, never raise SolverError."""
    kind, value, gamma, creation, gap_tol, n_random, seed = task
    t0 = time.perf_counter()
    chi = build_fusion(value) if kind == "fusion" else build_lindblad_process(value, gamma)
    try:
        rep = measure_report(chi, creation=creation, opts=SolverOptions(gap_tol=gap_tol),
                             n_random_products=n_random, seed=seed)
    except SolverError as exc:
        return None, str(exc), time.perf_counter() - t0
    return rep.to_dict(), None, time.perf_counter() - t0


def _default_jobs() -> int:
    return os.cpu_count() or 1


def run_points(tasks: list, jobs: int | None) -> list[tuple[dict | None, str | None, float]]:
    """Evaluate sweep points on a bounded worker pool, returning results in grid order."""
    jobs = jobs or _default_jobs()
    if jobs <= 1 or len(tasks) <= 1:
        return [_evaluate_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_evaluate_point, tasks))


def run_sweep(kind: str, grid: Sequence[float], *, gamma: float = 0.0, creation: bool = False,
              gap_tol: float = 1e-7, n_random: int = 0, seed: int = 0, jobs: int | None = None) -> SweepResult:
    grid = [float(x) for x in grid]
    tasks = [(kind, x, gamma, creation, gap_tol, n_random, seed) for x in grid]
    results = run_points(tasks, jobs)
    for x, (_, err, _) in zip(grid, results):
        if err is not None:
            raise SweepSolverError(f"at {x!r}: {err}")
    reports = [r for r, _, _ in results]
    if kind == "fusion":
        cols = ("p_noise", "alpha_pre", "beta_pre") + (("alpha_cre", "beta_cre") if creation else ())
    else:
        cols = ("tau", "alpha_pre", "beta_pre", "alpha_cre", "beta_cre", "alpha_pre_prime")
    return SweepResult(cols[0], grid, reports, [t for _, _, t in results], cols)


def _finish_sweep(res: SweepResult, args) -> int:
    if args.csv:
        Path(args.csv).write_text(res.to_csv(), encoding="utf-8")
    if args.json:
        write_json(args.json, res.to_dict())
    table = [[csv_value(row[0])] + [summary_value(v) for v in row[1:]] for row in res.rows()]
    print(aligned_table(res.columns, table))
    print(f"{len(res.grid)} points in {sum(res.wall_times):.1f} s of solver time", file=sys.stderr)
    return EXIT_OK


def _check_steps(n: int) -> None:
    if n < 2:
        raise InputError(f"--steps must be at least 2, got {n}")


def cmd_sweep_fusion(args) -> int:
    _check_steps(args.steps)
    grid = np.linspace(0.0, 1.0, args.steps)
    res = run_sweep("fusion", grid, creation=args.creation, gap_tol=args.gap_tol,
                    n_random=args.random_products, seed=args.seed, jobs=args.jobs)
    return _finish_sweep(res, args)


def cmd_sweep_dynamics(args) -> int:
    _check_steps(args.steps)
    if not np.isfinite(args.gamma) or args.gamma < 0:
        raise InputError(f"--gamma must be non-negative, got {args.gamma}")
    if not np.isfinite(args.tau_max) or args.tau_max <= 0:
        raise InputError(f"--tau-max must be positive, got {args.tau_max}")
    grid = np.linspace(0.0, args.tau_max, args.steps)
    res = run_sweep("lindblad", grid, gamma=args.gamma, creation=True, gap_tol=args.gap_tol,
                    n_random=args.random_products, seed=args.seed, jobs=args.jobs)
    return _finish_sweep(res, args)


# ---------------------------------------------------------------------------
# qpt and report
# ---------------------------------------------------------------------------


def load_records(directory: str | Path, exact: bool = False) -> list[TomographyRecord]:
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"not a directory: {directory}")
    files = sorted(d.glob("*.json"))
    if not files:
        raise InputError(f"no .json records in {directory}")
    records, seen, dups = [], set(), []
    for f in files:
        try:
            rec = TomographyRecord.from_json(_read_json(f), exact=True if exact else None)
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{f.name}: {exc}") from None
        if rec.input_label in seen:
            dups.append(rec.input_label)
        seen.add(rec.input_label)
        records.append(rec)
    problems = []
    if dups:
        problems.append(f"duplicate input labels: {', '.join(sorted(set(dups)))}")
    gaps = missing_labels(records)
    if gaps:
        problems.append(f"missing input labels: {', '.join(gaps)}")
    if problems:
        raise InputError("; ".join(problems))
    return records


def cmd_qpt(args) -> int:
    records = load_records(args.records_dir, exact=args.shots_exact)
    try:
        chi = qpt_from_counts(records)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    data = chi.to_json()
    if args.out:
        write_json(args.out, data)
    rows = [
        ("trace", f"{chi.trace:.6g}"),
        ("min_eigenvalue", f"{linalg.min_eigenvalue(chi.chi):.3g}"),
        ("tp_residual", f"{chi.tp_residual():.3g}"),
    ]
    print(aligned_table(("quantity", "value"), rows))
    return EXIT_OK


def load_fixture(name: str) -> dict:
    if name not in FIXTURES:
        raise InputError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    text = resources.files("epreserve").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def cmd_report(args) -> int:
    fx = load_fixture(args.fixture)
    cols = fx["columns"]
    rows = [[str(r[cols[0]])] + [f"{r[c]:.3f}" for c in cols[1:]] for r in fx["rows"]]
    print(fx["title"])
    print(aligned_table(cols, rows))
    print(f"source: {fx['provenance']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors follow the single-line error contract."""

    def error(self, message):
        raise InputError(f"usage: {self.prog}: {message}")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=default(0), help="seed for random product inputs")
    p.add_argument("--gap-tol", type=float, default=default(1e-7), help="solver duality-gap tolerance")
    p.add_argument("--jobs", type=int, default=default(None), help="worker processes for sweeps")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epreserve", description="Entanglement preservability of two-qubit processes.",
                     parents=[_global_flags(False)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = [_global_flags(True)]

    m = sub.add_parser("measure", parents=common, help="evaluate the measures of one channel")
    m.add_argument("spec", help="channel description or process-matrix JSON file")
    m.add_argument("--target", help="target process for the fidelity criterion (file or name)")
    m.add_argument("--creation", action="store_true", help="also evaluate the creation measures")
    m.add_argument("--random-products", type=int, default=0,
                   help="extra random product inputs in the creation constraints")
    m.add_argument("--out", help="write the report as JSON")
    m.set_defaults(func=cmd_measure)

    f = sub.add_parser("sweep-fusion", parents=common, help="sweep the fusion noise strength")
    f.add_argument("--steps", type=int, default=21)
    f.add_argument("--creation", action="store_true")
    f.add_argument("--random-products", type=int, default=0)
    f.add_argument("--csv")
    f.add_argument("--json")
    f.set_defaults(func=cmd_sweep_fusion)

    d = sub.add_parser("sweep-dynamics", parents=common, help="sweep the coupled-qubit evolution time")
    d.add_argument("--gamma", type=float, default=0.02)
    d.add_argument("--tau-max", type=float, default=4 * np.pi)
    d.add_argument("--steps", type=int, default=201)
    d.add_argument("--random-products", type=int, default=0)
    d.add_argument("--csv")
    d.add_argument("--json")
    d.set_defaults(func=cmd_sweep_dynamics)

    q = sub.add_parser("qpt", parents=common, help="process tomography from record files")
    q.add_argument("records_dir")
    q.add_argument("--shots-exact", action="store_true",
                   help="read counts as exact expected values (non-integer counts allowed)")
    q.add_argument("--out")
    q.set_defaults(func=cmd_qpt)

    r = sub.add_parser("report", parents=common, help="render a bundled data fixture")
    r.add_argument("fixture", help=f"one of: {', '.join(FIXTURES)}")
    r.set_defaults(func=cmd_report)
    return parser


def _error(kind: str, message: str) -> None:
    text = " ".join(str(message).split())
    print(f"error: {kind}: {text}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.jobs is not None and args.jobs < 1:
            raise InputError(f"--jobs must be positive, got {args.jobs}")
        return args.func(args)
    except InputError as exc:
        _error("input", exc)
        return EXIT_INPUT
    except (SolverError, SweepSolverError) as exc:
        _error("solver", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
