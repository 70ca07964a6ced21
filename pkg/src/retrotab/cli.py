"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 file not found,
4 parse error, 5 oracle mismatch, 6 evaluation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .bench import (VARIANTS, BenchmarkFailure, ConfigError, DatasetSpec, _variant_name,
                    default_goal, desk_matrix, gen_dataset, golden_csv, program_variant,
                    run_benchmark)
from .engine import Engine, EvaluationError
from .program import Mode, Program
from .syntax import ParseError, parse_program, parse_query
from .term import term_vars, to_str

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_PARSE = 4
EXIT_ORACLE = 5
EXIT_EVAL = 6


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _mode(text: Optional[str]) -> Optional[Mode]:
    if text is None:
        return None
    try:
        return Mode.parse(text)
    except ValueError:
        raise _Exit(EXIT_USAGE, f"unknown mode {text!r}") from None


def load_program(name: str, wrap: bool = True) -> Program:
    """A builtin path variant name or a program file."""
    try:
        return program_variant(name, wrap=wrap)
    except ConfigError:
        pass
    if not os.path.exists(name):
        raise _Exit(EXIT_NOT_FOUND, f"no such program file or builtin variant: {name}")
    with open(name, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_program(text)
    except ParseError as e:
        raise _Exit(EXIT_PARSE, f"{name}:{e}") from None


def _dataset(args) -> Optional[DatasetSpec]:
    if args.dataset is None:
        return None
    if args.size is None:
        raise _Exit(EXIT_USAGE, "--dataset needs --size")
    try:
        return DatasetSpec(args.dataset, int(args.size), wrap=not args.no_wrap)
    except (ConfigError, ValueError) as e:
        raise _Exit(EXIT_USAGE, str(e)) from None


def _engine(args) -> Engine:
    prog = load_program(args.program, wrap=not args.no_wrap)
    spec = _dataset(args)
    if spec is not None:
        prog.extend(gen_dataset(spec))
    return Engine(prog, _mode(args.mode))


def _goal(args) -> str:
    if args.goal:
        return args.goal
    spec = _dataset(args)
    if spec is not None:
        return to_str(default_goal(spec))
    raise _Exit(EXIT_USAGE, "--goal is required")


def cmd_query(args, out) -> int:
    engine = _engine(args)
    text = _goal(args)
    try:
        goals, varmap = parse_query(text)
    except ParseError as e:
        raise _Exit(EXIT_PARSE, f"goal:{e}") from None
    res = engine.solve(list(goals))
    single = len(goals) == 1
    names = list(varmap)
    for ans in res.answers:
        if args.format == "json":
            out.write(json.dumps([to_str(t) for t in ans]) + "\n")
        elif single:
            # a single atom answers with its instantiated arguments
            g = goals[0]
            out.write(to_str((g[0],) + tuple(ans) if type(g) is tuple else g) + "\n")
        elif names:
            # conjunctive answers bind the query variables in order of appearance
            qvars = _query_vars(goals)
            pairs = [f"{v.name} = {to_str(t)}" for v, t in zip(qvars, ans)]
            out.write(", ".join(pairs) + "\n")
        else:
            out.write("true\n")
    if args.stats:
        sys.stderr.write(_stats_json(res.stats) + "\n")
    return EXIT_OK


def _query_vars(goals) -> list:
    acc: list = []
    for g in goals:
        term_vars(g, acc)
    return acc


def _stats_json(stats) -> str:
    d = stats.as_dict()
    d["elapsed_ms"] = round(d["elapsed_ms"], 3)
    return json.dumps(d)


def cmd_bench(args, out) -> int:
    records = []
    if args.all:
        if args.size not in (None, "desk"):
            raise _Exit(EXIT_USAGE, "--all only supports --size desk")
        cells = list(desk_matrix())
    else:
        if args.program is None or args.dataset is None:
            raise _Exit(EXIT_USAGE, "bench needs --all or --program and --dataset")
        try:
            variant = _variant_name(args.program)
        except ConfigError as e:
            raise _Exit(EXIT_USAGE, str(e)) from None
        spec = _dataset(args)
        modes = [_mode(args.mode)] if args.mode else list(Mode)
        cells = [(variant, spec, m) for m in modes]
    for variant, spec, mode in cells:
        try:
            rec = run_benchmark(variant, spec, mode, oracle=args.oracle)
        except BenchmarkFailure as e:
            raise _Exit(EXIT_ORACLE, str(e)) from None
        records.append(rec)
        if args.format != "csv":
            out.write(rec.to_json() + "\n")
            out.flush()
    if args.format == "csv":
        out.write(golden_csv(records))
    return EXIT_OK


def cmd_dump(args, out) -> int:
    engine = _engine(args)
    engine.solve(_goal(args))
    out.write(engine.dump() + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="retrotab", description="Tabled evaluation with "
                                "variant, subsumptive and retroactive call subsumption.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_program: bool) -> None:
        sp.add_argument("--program", required=need_program,
                        help=f"program file or builtin variant ({', '.join(VARIANTS)})")
        sp.add_argument("--mode", help="variant, subsumptive or retroactive")
        sp.add_argument("--dataset", help="chain, cycle, grid, pyramid or tree")
        sp.add_argument("--size", help="dataset size")
        sp.add_argument("--no-wrap", action="store_true", help="plain edge(a,b) facts")

    q = sub.add_parser("query", help="run a query and print its answers")
    common(q, True)
    q.add_argument("--goal", help="query text, e.g. \"path(f(1),Y)\"")
    q.add_argument("--format", choices=("text", "json"), default="text")
    q.add_argument("--stats", action="store_true", help="print statistics to stderr")
    q.set_defaults(func=cmd_query)

    b = sub.add_parser("bench", help="run benchmark cells and print statistics")
    common(b, False)
    b.add_argument("--all", action="store_true", help="run the desk-scale matrix")
    b.add_argument("--oracle", action="store_true", help="check answers bottom-up")
    b.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("dump", help="run a query and print the table space")
    common(d, True)
    d.add_argument("--goal", help="query text")
    d.set_defaults(func=cmd_dump)
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 10000))
    try:
        return args.func(args, out)
    except _Exit as e:
        sys.stderr.write(f"retrotab: {e}\n")
        return e.code
    except ParseError as e:
        sys.stderr.write(f"retrotab: parse error {e}\n")
        return EXIT_PARSE
    except ConfigError as e:
        sys.stderr.write(f"retrotab: {e}\n")
        return EXIT_USAGE
    except EvaluationError as e:
        sys.stderr.write(f"retrotab: evaluation error: {e}\n")
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
