"""Benchmark datasets, the path/2 program family, and a bottom-up oracle.

Datasets are edge relations over integer node labels starting at 1:

* ``chain(n)``: i -> i+1;
* ``cycle(n)``: the chain plus n -> 1;
* ``grid(k)``: k x k lattice, row-major labels, edges both ways between
  horizontal and vertical neighbours;
* ``pyramid(h)``: levels 1..h, node (i, j) with 1 <= j <= i is labelled
  i(i-1)/2 + j and points to (i+1, j) and (i+1, j+1);
* ``tree(n)``: complete binary tree, i -> 2i and i -> 2i+1 within 1..n.

With ``wrap`` set every label ``a`` is written ``f(a)``.
"""

from __future__ import annotations

import csv
import io
import json
import re
import time
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .engine import Engine
from .program import Clause, Mode, Program
from .syntax import parse_program, parse_term
from .term import Term, Var, canonical_tuple, functor_of

KINDS = ("chain", "cycle", "grid", "pyramid", "tree")

VARIANTS = ("left_first", "left_last", "right_first", "right_last", "double_first", "double_last")

_RECURSIVE = {
    "left": "path(f(X),f(Z)) :- path(f(X),f(Y)), edge(f(Y),f(Z)).",
    "right": "path(f(X),f(Z)) :- edge(f(X),f(Y)), path(f(Y),f(Z)).",
    "double": "path(f(X),f(Z)) :- path(f(X),f(Y)), path(f(Y),f(Z)).",
}
_BASE = "path(f(X),f(Z)) :- edge(f(X),f(Z))."

DESK_DATASETS = (("chain", 64), ("cycle", 64), ("grid", 8), ("pyramid", 16), ("tree", 255))


class ConfigError(ValueError):
    pass


class BenchmarkFailure(AssertionError):
    pass


class OracleInapplicable(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    n: int
    wrap: bool = True

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"dataset size must be a positive integer, got {self.n!r}")

    def __str__(self) -> str:
        return f"{self.kind}({self.n})"


def edge_pairs(spec: DatasetSpec) -> List[Tuple[int, int]]:
    n = spec.n
    if spec.kind == "chain":
        return [(i, i + 1) for i in range(1, n)]
    if spec.kind == "cycle":
        return [(i, i % n + 1) for i in range(1, n + 1)]
    if spec.kind == "grid":
        out = []
        for r in range(n):
            for c in range(n):
                a = r * n + c + 1
                for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < n and 0 <= cc < n:
                        out.append((a, rr * n + cc + 1))
        return out
    if spec.kind == "pyramid":
        label = lambda i, j: i * (i - 1) // 2 + j  # noqa: E731
        return [(label(i, j), label(i + 1, j + d))
                for i in range(1, n) for j in range(1, i + 1) for d in (0, 1)]
    return [(i, c) for i in range(1, n + 1) for c in (2 * i, 2 * i + 1) if c <= n]


def gen_dataset(spec: DatasetSpec) -> List[Clause]:
    """Edge facts of ``spec``."""
    if spec.wrap:
        return [Clause(("edge", ("f", a), ("f", b))) for a, b in edge_pairs(spec)]
    return [Clause(("edge", a, b)) for a, b in edge_pairs(spec)]


def analytic_answers(spec: DatasetSpec) -> int:
    """Size of the transitive closure of the dataset's edge relation."""
    n = spec.n
    if spec.kind == "chain":
        return n * (n - 1) // 2
    if spec.kind == "cycle":
        return n * n
    if spec.kind == "grid":
        return n ** 4 if n > 1 else 0
    if spec.kind == "pyramid":
        # from level i every node reaches d+1 nodes d levels down
        return sum(i * sum(d + 1 for d in range(1, n - i + 1)) for i in range(1, n + 1))
    # tree: each node contributes one pair per proper ancestor
    return sum(i.bit_length() - 1 for i in range(1, n + 1))


def _variant_name(name: str) -> str:
    name = name.strip().lower()
    if name.startswith("path_"):
        name = name[5:]
    if name in _RECURSIVE:
        name += "_first"
    if name not in VARIANTS:
        raise ConfigError(f"unknown program variant {name!r}; expected one of {', '.join(VARIANTS)}")
    return name


def program_variant(name: str, mode: Mode = Mode.RETROACTIVE, wrap: bool = True) -> Program:
    """One of the six path/2 programs (no edge facts).

    With ``wrap`` false the ``f/1`` wrappers are dropped to match plain edges.
    """
    name = _variant_name(name)
    shape, order = name.split("_")
    rec = _RECURSIVE[shape]
    rules = f"{rec}\n{_BASE}\n" if order == "first" else f"{_BASE}\n{rec}\n"
    if not wrap:
        rules = re.sub(r"f\(([A-Z])\)", r"\1", rules)
    text = f":- table path/2 as {Mode.parse(mode).value}.\n:- dynamic edge/2.\n"
    return parse_program(text + rules)


def build_program(variant: str, spec: DatasetSpec, mode: Mode = Mode.RETROACTIVE) -> Program:
    prog = program_variant(variant, mode, spec.wrap)
    prog.extend(gen_dataset(spec))
    return prog


def default_goal(spec: DatasetSpec) -> Term:
    return parse_term("path(f(X),f(Y))" if spec.wrap else "path(X,Y)")


# -- bottom-up oracle ---------------------------------------------------------------

def _match(pat: Term, t: Term, b: Dict[Var, Term]) -> bool:
    """Match pattern ``pat`` against ground ``t``, extending ``b``."""
    if type(pat) is Var:
        got = b.get(pat)
        if got is None:
            b[pat] = t
            return True
        return got == t
    if type(pat) is tuple:
        if type(t) is not tuple or len(t) != len(pat) or t[0] != pat[0]:
            return False
        for x, y in zip(pat[1:], t[1:]):
            if not _match(x, y, b):
                return False
        return True
    return type(pat) is type(t) and pat == t


def _ground_in(t: Term, b: Dict[Var, Term]) -> Optional[Term]:
    if type(t) is Var:
        return b.get(t)
    if type(t) is tuple:
        args = []
        for a in t[1:]:
            g = _ground_in(a, b)
            if g is None:
                return None
            args.append(g)
        return (t[0], *args)
    return t


def _depth(t: Term) -> int:
    if type(t) is tuple:
        return 1 + max(_depth(a) for a in t[1:])
    return 0


def _vars(t: Term, acc: set) -> set:
    if type(t) is Var:
        acc.add(t)
    elif type(t) is tuple:
        for a in t[1:]:
            _vars(a, acc)
    return acc


class _Rel:
    __slots__ = ("tuples", "by_first")

    def __init__(self) -> None:
        self.tuples: Set[tuple] = set()
        self.by_first: Dict[Term, List[tuple]] = {}

    def add(self, tup: tuple) -> bool:
        if tup in self.tuples:
            return False
        self.tuples.add(tup)
        self.by_first.setdefault(tup[0] if tup else None, []).append(tup)
        return True

    def candidates(self, first: Optional[Term]) -> Iterable[tuple]:
        if first is None:
            return self.tuples
        return self.by_first.get(first, ())


def _args(t: Term) -> tuple:
    return t[1:] if type(t) is tuple else ()


@lru_cache(maxsize=16)
def _fixpoint(clauses: Tuple[Clause, ...], depth_bound: int) -> Dict[Tuple[str, int], frozenset]:
    rels: Dict[Tuple[str, int], _Rel] = {}
    rules = []
    for c in clauses:
        if not c.body:
            if _vars(c.head, set()):
                raise OracleInapplicable(f"non-ground fact {c}")
            rels.setdefault(c.pred, _Rel()).add(_args(c.head))
            continue
        bv: set = set()
        for g in c.body:
            _vars(g, bv)
        if not _vars(c.head, set()) <= bv:
            raise OracleInapplicable(f"rule is not range restricted: {c}")
        rules.append(c)
    idb = {c.pred for c in rules}
    for p in idb:
        rels.setdefault(p, _Rel())

    def join(body: Sequence[Term], k: int, delta: Dict, b: dict, i: int, out: list, head: Term):
        if i == len(body):
            out.append(_ground_in(head, b))
            return
        g = body[i]
        pred = functor_of(g)
        args = _args(g)
        rel = delta.get(pred) if i == k else rels.get(pred)
        if rel is None:
            return
        first = _ground_in(args[0], b) if args else None
        for tup in rel.candidates(first):
            nb = dict(b)
            if all(_match(x, y, nb) for x, y in zip(args, tup)):
                join(body, k, delta, nb, i + 1, out, head)

    # round 0: every rule against everything known so far
    delta: Dict[Tuple[str, int], _Rel] = {}
    derived: list = []
    for c in rules:
        out: list = []
        join(c.body, -1, {}, {}, 0, out, c.head)
        derived.extend((c.pred, h) for h in out)
    while True:
        delta = {}
        for pred, h in derived:
            tup = _args(h)
            if rels[pred].add(tup):
                if _depth(h) > depth_bound:
                    raise OracleInapplicable("term depth bound exceeded")
                delta.setdefault(pred, _Rel()).add(tup)
        if not delta:
            break
        derived = []
        for c in rules:
            for k, g in enumerate(c.body):
                if functor_of(g) in delta:
                    out = []
                    join(c.body, k, delta, {}, 0, out, c.head)
                    derived.extend((c.pred, h) for h in out)
    return {p: frozenset(r.tuples) for p, r in rels.items()}


def seminaive_solve(program: Program, query: Term, depth_bound: int = 64) -> Set[tuple]:
    """Answers to a single-atom ``query`` by semi-naive bottom-up evaluation."""
    model = _fixpoint(tuple(program.clauses), depth_bound)
    got = model.get(functor_of(query), frozenset())
    args = _args(query)
    out = set()
    for tup in got:
        b: Dict[Var, Term] = {}
        if len(tup) == len(args) and all(_match(x, y, b) for x, y in zip(args, tup)):
            out.add(canonical_tuple(tup)[0])
    return out


# -- statistics -----------------------------------------------------------------------

@dataclass
class StatsRecord:
    program: str
    dataset: str
    mode: str
    answers: int
    answer_trie_nodes: int
    subgoal_trie_nodes: int
    generators: int
    consumers: int
    loaders: int = 0
    conversions: int = 0
    elapsed_ms: float = 0.0
    oracle: Optional[bool] = None

    def to_json(self) -> str:
        d = asdict(self)
        d["elapsed_ms"] = round(d["elapsed_ms"], 3)
        return json.dumps(d, sort_keys=False)


def run_benchmark(variant: str, spec: DatasetSpec, mode: Mode = Mode.RETROACTIVE,
                  oracle: bool = False) -> StatsRecord:
    """Evaluate the ``variant`` path program on ``spec`` and collect counts."""
    mode = Mode.parse(mode) if isinstance(mode, str) else mode
    name = _variant_name(variant)
    prog = build_program(name, spec, mode)
    goal = default_goal(spec)
    t0 = time.perf_counter()
    res = Engine(prog).solve(goal)
    elapsed = (time.perf_counter() - t0) * 1000.0
    st = res.stats
    expected = analytic_answers(spec)
    if len(res.answers) != expected:
        raise BenchmarkFailure(f"{name} on {spec} ({mode.value}): {len(res.answers)} answers, "
                               f"expected {expected}")
    ok = None
    if oracle:
        want = seminaive_solve(prog, goal)
        got = set(res.answers)
        if got != want or len(got) != len(res.answers):
            raise BenchmarkFailure(f"{name} on {spec} ({mode.value}): answers differ from the "
                                   f"bottom-up oracle ({len(got)} vs {len(want)})")
        ok = True
    return StatsRecord(name, str(spec), mode.value, len(res.answers), st.answer_trie_nodes,
                       st.subgoal_trie_nodes, st.generators, st.consumers, st.loaders,
                       st.conversions, elapsed, ok)


def desk_matrix() -> Iterator[Tuple[str, DatasetSpec, Mode]]:
    for kind, n in DESK_DATASETS:
        spec = DatasetSpec(kind, n)
        for v in VARIANTS:
            for m in Mode:
                yield v, spec, m


def run_desk(oracle: bool = True) -> Iterator[StatsRecord]:
    for v, spec, m in desk_matrix():
        yield run_benchmark(v, spec, m, oracle=oracle)


GOLDEN_FIELDS = ("program", "dataset", "mode", "answers", "answer_trie_nodes",
                 "subgoal_trie_nodes", "generators", "consumers")


def golden_csv(records: Iterable[StatsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GOLDEN_FIELDS)
    for r in records:
        d = asdict(r)
        w.writerow([d[k] for k in GOLDEN_FIELDS])
    return buf.getvalue()
