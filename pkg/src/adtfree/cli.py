"""Command-line driver: decide one problem file or a directory of them."""

from __future__ import annotations

import argparse
import concurrent.futures
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .algorithm import Config, RunStatus
from .clauses import ModelError
from .parser import ParseError, parse_file
from .solver import Answer, Decision, Solver, decide

EXIT_DECIDED = 0
EXIT_ERROR = 1
EXIT_UNKNOWN = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="adtfree",
        description="Remove ADTs from constrained Horn clauses and decide satisfiability "
        "with an external Horn solver.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="FILE", help="problem file")
    src.add_argument("--batch", metavar="DIR", help="run every *.chc file in DIR")
    p.add_argument("--solver", metavar="CMD",
                   help='solver command; "{file}" is replaced by the script path, '
                   "otherwise the script goes to standard input")
    p.add_argument("--timeout", type=float, default=300.0, metavar="SECS",
                   help="wall-clock limit per solver call (default 300)")
    p.add_argument("--max-iterations", type=int, default=100, metavar="N",
                   help="iteration cap of the transformation (default 100)")
    p.add_argument("--emit-smtlib", metavar="FILE", help="write the transformed clauses as SMT-LIB")
    p.add_argument("--no-diff", action="store_true", help="never introduce difference predicates")
    p.add_argument("--trace", metavar="FILE", help="write the transformation ledger as JSON")
    p.add_argument("--workers", type=int, default=1, metavar="K", help="parallel problems in batch mode")
    return p


@dataclass(frozen=True)
class Row:
    problem: str
    verdict: str
    millis: int
    iterations: int
    defs: int
    marked: int
    expect: str | None = None
    terminated: bool = False

    def tsv(self) -> str:
        return f"{self.problem}\t{self.verdict}\t{self.millis}\t{self.iterations}\t{self.defs}\t{self.marked}"


def _config(args) -> Config:
    return Config(max_iterations=args.max_iterations, use_diff=not args.no_diff)


def _solver(args) -> Solver | None:
    return Solver(args.solver, args.timeout) if args.solver else None


def run_one(path: str, config: Config, solver: Solver | None) -> tuple[Decision, Row, str | None]:
    start = time.monotonic()
    problem = parse_file(path)
    d = decide(problem.clause_set, config, solver)
    ms = int((time.monotonic() - start) * 1000)
    r = d.result
    row = Row(
        Path(path).name,
        str(d),
        ms,
        r.iterations if r else 0,
        len(r.definitions) if r else 0,
        len(r.marked) if r else 0,
        problem.expect,
        bool(r and r.status is RunStatus.TRANSFORMED),
    )
    return d, row, problem.expect


def _batch_task(path: str, config: Config, solver: Solver | None) -> Row:
    try:
        return run_one(path, config, solver)[1]
    except (ParseError, ModelError, OSError) as e:
        return Row(Path(path).name, f"error: {e}", 0, 0, 0, 0)


def summary_table(rows: list[Row]) -> str:
    """Counts per expected answer, in the shape of a solved-problems table."""
    groups = [("valid", "sat"), ("invalid", "unsat")]
    lines = [f"{'properties':<12}{'problems':>10}{'terminated':>12}{'solved':>8}{'wrong':>7}"]
    totals = [0, 0, 0, 0]
    for label, want in groups + [("other", None)]:
        rs = [r for r in rows if r.expect == want]
        if want is None and not rs:
            continue
        n = len(rs)
        term = sum(r.terminated for r in rs)
        solved = sum(r.verdict == want for r in rs)
        wrong = sum(r.verdict in ("sat", "unsat") and r.verdict != want for r in rs if want)
        for i, k in enumerate((n, term, solved, wrong)):
            totals[i] += k
        lines.append(f"{label:<12}{n:>10}{term:>12}{solved:>8}{wrong:>7}")
    lines.append(f"{'total':<12}{totals[0]:>10}{totals[1]:>12}{totals[2]:>8}{totals[3]:>7}")
    return "\n".join(lines)


def run_batch(args) -> int:
    files = sorted(str(p) for p in Path(args.batch).glob("*.chc"))
    if not files:
        print(f"adtfree: no .chc files in {args.batch}", file=sys.stderr)
        return EXIT_ERROR
    config, solver = _config(args), _solver(args)
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(args.workers) as ex:
            rows = list(ex.map(_batch_task, files, [config] * len(files), [solver] * len(files)))
    else:
        rows = [_batch_task(f, config, solver) for f in files]
    print("problem\tverdict\twall-time-ms\titerations\tdefs-introduced\tmarked-clauses")
    for r in rows:
        print(r.tsv())
    print()
    print(summary_table(rows))
    return EXIT_DECIDED


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.batch:
        return run_batch(args)
    try:
        d, _, _ = run_one(args.input, _config(args), _solver(args))
    except (ParseError, ModelError, OSError) as e:
        print(f"adtfree: {args.input}: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.emit_smtlib and d.script is not None:
        Path(args.emit_smtlib).write_text(d.script, encoding="utf-8")
    if args.trace and d.result is not None:
        Path(args.trace).write_text(d.result.ledger.to_json(), encoding="utf-8")
    print(d)
    return EXIT_UNKNOWN if d.answer is Answer.UNKNOWN else EXIT_DECIDED


if __name__ == "__main__":
    sys.exit(main())
