"""Tabled resolution over pure Horn programs.

The evaluator copies continuations instead of keeping a WAM-style stack:
a continuation is the tuple of remaining goals plus the (partially bound)
answer template of the generator that owns it. Work items live on one LIFO
stack:

* ``RESOLVE``: run a continuation (interior SLD steps happen inline);
* ``CLAUSE``: resolve one program clause against a generator's call;
* ``CONSUME``: feed the next available answer of a frame to a consumer node;
* ``MARK``: pushed under a generator's clauses, it fires once everything the
  generator started has run and triggers the completion check.

Completion follows the usual leader scheme: every generator gets a depth
first number, consuming from an incomplete frame pulls the leaders of all
younger generators down to the producer's leader, and a leader whose
marker pops with no unconsumed answers left completes its whole segment of
the completion stack.

In retroactive mode a new call that subsumes running generators turns them
into consumers of itself. Work owned by a converted generator is dropped
lazily: every task checks that its owner is still a generator.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .program import Clause, Mode, PredId, Program
from .syntax import parse_program, parse_query
from .tablespace import (COMPLETE, CONSUMER, GENERATOR, LOADER, SubgoalFrame, TableEntry,
                         TableSpace, TableSpaceError, answer_reuse_on_new_call, complete_frame,
                         convert_generator_to_consumer, refresh, stst_insert_tokens,
                         tst_insert_answer)
from .term import (NIL, Term, Var, apply, canonical_tuple, is_ground, rename, term_vars,
                   unify_into, var)
from .trie import TrieError, decode_fresh, tokenize

RESOLVE, CLAUSE, CONSUME, MARK = 0, 1, 2, 3


class EvaluationError(Exception):
    pass


@dataclass
class EngineStats:
    answers: int = 0
    answer_trie_nodes: int = 0
    subgoal_trie_nodes: int = 0
    generators: int = 0
    consumers: int = 0
    loaders: int = 0
    subsumed_frames: int = 0
    conversions: int = 0
    new_answers: int = 0
    repeated_answers: int = 0
    elapsed_ms: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class QueryResult:
    answers: List[tuple]
    stats: EngineStats


class Node:
    """A consumer (or loader) of a frame's answers inside some continuation."""

    __slots__ = ("frame", "template", "goals", "head", "owner", "cursor", "scheduled", "dead")

    def __init__(self, frame: SubgoalFrame, template: tuple, goals: tuple, head: tuple,
                 owner: SubgoalFrame):
        self.frame = frame
        self.template = template
        self.goals = goals
        self.head = head
        self.owner = owner
        self.cursor = 0
        self.scheduled = False
        self.dead = False

    def __repr__(self) -> str:
        return f"<node on {self.frame!r} for {self.owner!r} at {self.cursor}>"


class _Clause:
    __slots__ = ("clause", "head_args", "body", "ground")

    def __init__(self, clause: Clause):
        self.clause = clause
        self.head_args = _targs(clause.head)
        self.body = tuple(clause.body)
        self.ground = not clause.variables()

    def instance(self) -> Tuple[tuple, tuple]:
        if self.ground:
            return self.head_args, self.body
        m: dict = {}
        return (tuple([rename(a, m) for a in self.head_args]),
                tuple([rename(g, m) for g in self.body]))


class _Pred:
    """Clauses of one predicate with first-argument indexing."""

    __slots__ = ("clauses", "index", "open")

    def __init__(self, clauses: List[_Clause]):
        self.clauses = clauses
        keyed: Dict[Term, List[int]] = {}
        open_: List[int] = []
        for i, c in enumerate(clauses):
            a = c.head_args[0] if c.head_args else None
            if a is not None and is_ground(a):
                keyed.setdefault(a, []).append(i)
            else:
                open_.append(i)
        self.open = [clauses[i] for i in open_]
        self.index = {k: [clauses[i] for i in sorted(v + open_)] for k, v in keyed.items()}

    def candidates(self, args: tuple) -> List[_Clause]:
        if not args:
            return self.clauses
        a = args[0]
        if type(a) is int or type(a) is str or (type(a) is tuple and is_ground(a)):
            got = self.index.get(a)
            return got if got is not None else self.open
        return self.clauses


def _targs(goal: Term) -> tuple:
    """Arguments used for tabling; zero-arity goals get one dummy argument."""
    if type(goal) is tuple:
        return goal[1:]
    return (NIL,)


def _unify_seq(xs: Sequence[Term], ys: Sequence[Term], s: dict) -> bool:
    if len(xs) != len(ys):
        return False
    for x, y in zip(xs, ys):
        if not unify_into(x, y, s, True):
            return False
    return True


def _all_distinct_vars(call: tuple) -> bool:
    return all(type(a) is Var for a in call) and len(set(call)) == len(call)


class Engine:
    """Evaluates queries against one program; tables persist across queries."""

    def __init__(self, program: Union[Program, str], mode: Optional[Mode] = None,
                 pending_threshold: Optional[int] = None, fanout: Optional[int] = None):
        if isinstance(program, str):
            program = parse_program(program)
        if mode is not None:
            program = program.with_mode(Mode.parse(mode) if isinstance(mode, str) else mode)
        self.program = program
        self.tables = TableSpace(pending_threshold, fanout)
        for (name, arity), m in program.tabled.items():
            self.tables.declare(name, max(arity, 1), m).arity_declared = arity
        grouped: Dict[PredId, List[_Clause]] = {p: [] for p in program.dynamic}
        for c in program.clauses:
            if type(c.head) not in (str, tuple):
                raise EvaluationError(f"clause head is not callable: {c}")
            grouped.setdefault(c.pred, []).append(_Clause(c))
        self.preds: Dict[PredId, _Pred] = {p: _Pred(cs) for p, cs in grouped.items()}
        self.stack: list = []
        self.cstack: List[SubgoalFrame] = []
        self._dfn = 0
        self._queries = 0
        self.counters = EngineStats()

    # -- public API ------------------------------------------------------------

    def solve(self, query: Union[str, Term, Sequence[Term]]) -> QueryResult:
        """Run ``query`` to completion; returns its answers and statistics."""
        if isinstance(query, str):
            goals, _ = parse_query(query)
        elif isinstance(query, list) or (type(query) is tuple and query and type(query[0]) is tuple):
            goals = tuple(query)
        else:
            goals = (query,)
        t0 = time.perf_counter()
        try:
            answers = self._solve(goals)
        except (TableSpaceError, TrieError) as e:
            raise EvaluationError(str(e)) from e
        except RecursionError as e:
            raise EvaluationError("term nesting too deep") from e
        stats = self.stats()
        stats.answers = len(answers)
        stats.elapsed_ms = (time.perf_counter() - t0) * 1000.0
        return QueryResult(answers, stats)

    def query(self, query: Union[str, Term, Sequence[Term]]) -> List[tuple]:
        return self.solve(query).answers

    def stats(self) -> EngineStats:
        st = EngineStats(**self.counters.as_dict())
        entries = [e for e in self.tables if not e.name.startswith("$")]
        st.answer_trie_nodes = sum(e.answer_trie_nodes() for e in entries)
        st.subgoal_trie_nodes = sum(e.subgoal_trie_nodes() for e in entries)
        return st

    def dump(self) -> str:
        return self.tables.dump()

    # -- query plumbing --------------------------------------------------------

    def _solve(self, goals: Tuple[Term, ...]) -> List[tuple]:
        for g in goals:
            if type(g) not in (str, tuple):
                raise EvaluationError(f"goal is not callable: {g!r}")
        if len(goals) == 1:
            g = goals[0]
            entry = self.tables.get((g[0], len(g) - 1) if type(g) is tuple else (g, 1))
            if entry is not None and (type(g) is tuple or entry.arity_declared == 0):
                return self._top_call(entry, _targs(g), strip=type(g) is not tuple)
        if len(goals) == 1:
            # a single atom answers with its instantiated arguments
            cols = list(goals[0][1:]) if type(goals[0]) is tuple else []
        else:
            cols = []
            for g in goals:
                term_vars(g, cols)
        self._queries += 1
        name = f"$query{self._queries}"
        head = (name, NIL, *cols)
        entry = self.tables.declare(name, len(cols) + 1, Mode.VARIANT)
        self.preds[(name, len(cols) + 1)] = _Pred([_Clause(Clause(head, goals))])
        answers = self._top_call(entry, head[1:])
        return [a[1:] for a in answers]

    def _top_call(self, entry: TableEntry, args: tuple, strip: bool = False) -> List[tuple]:
        frame, _, _ = self._call(entry, args)
        self._run()
        if frame.state is not COMPLETE:
            raise EvaluationError("evaluation stopped before completion")
        answers = self._frame_answers(frame, args)
        if strip:
            return [()] * len(answers)
        return answers

    def _frame_answers(self, frame: SubgoalFrame, args: tuple) -> List[tuple]:
        leaves = frame.arl.leaves
        src = frame.source
        if not src.has_vars and _all_distinct_vars(frame.call) and (
                frame.entry.mode is Mode.RETROACTIVE or frame.general is None):
            return [leaf.decode() for leaf in leaves]
        m = {var(k): v for k, v in enumerate(canonical_tuple(args)[1])}
        tpl = tuple([rename(t, m) for t in frame.template])
        out: List[tuple] = []
        seen = set()
        for leaf in leaves:
            s: dict = {}
            if _unify_seq(tpl, decode_fresh(leaf), s):
                inst, _ = canonical_tuple([apply(s, a) for a in args])
                if inst not in seen:
                    seen.add(inst)
                    out.append(inst)
        return out

    # -- scheduler ---------------------------------------------------------------

    def _run(self) -> None:
        stack = self.stack
        pop = stack.pop
        resolve = self._resolve
        consume = self._consume
        while stack:
            task = pop()
            kind = task[0]
            if kind == CONSUME:
                consume(task[1])
            elif kind == RESOLVE:
                resolve(task[1], task[2], task[3])
            elif kind == CLAUSE:
                self._clause(task[1], task[2])
            else:
                self._mark(task[1])

    def _schedule(self, node: Node) -> None:
        if not node.scheduled and not node.dead:
            node.scheduled = True
            self.stack.append((CONSUME, node))

    def _resolve(self, goals: tuple, head: tuple, owner: SubgoalFrame) -> None:
        stack = self.stack
        tables = self.tables.entries
        preds = self.preds
        while True:
            if owner.state is not GENERATOR:
                return
            if not goals:
                self._new_answer(owner, head)
                return
            g = goals[0]
            tg = type(g)
            if tg is tuple:
                pred = (g[0], len(g) - 1)
            elif tg is str:
                if g == "true":
                    goals = goals[1:]
                    continue
                if g == "fail":
                    return
                pred = (g, 0)
            else:
                raise EvaluationError(f"goal is not callable: {g!r}")
            entry = tables.get(pred) if tg is tuple else tables.get((g, 1))
            if entry is not None and (tg is tuple or entry.arity_declared == 0):
                self._tabled_call(entry, _targs(g), goals[1:], head, owner)
                return
            if pred == ("=", 2):
                s: dict = {}
                if not unify_into(g[1], g[2], s, True):
                    return
                goals = tuple([apply(s, x) for x in goals[1:]]) if s else goals[1:]
                head = tuple([apply(s, x) for x in head]) if s else head
                continue
            p = preds.get(pred)
            if p is None:
                raise EvaluationError(f"unknown predicate {pred[0]}/{pred[1]}")
            args = g[1:] if tg is tuple else (NIL,)
            rest = goals[1:]
            first = None
            more = []
            for c in p.candidates(args):
                hargs, body = c.instance()
                s = {}
                if not _unify_seq(args, hargs, s):
                    continue
                if s:
                    ng = tuple([apply(s, x) for x in body + rest])
                    nh = tuple([apply(s, x) for x in head])
                else:
                    ng = body + rest
                    nh = head
                if first is None:
                    first = (ng, nh)
                else:
                    more.append((RESOLVE, ng, nh, owner))
            if first is None:
                return
            if more:
                more.reverse()
                stack.extend(more)
            goals, head = first

    def _call(self, entry: TableEntry, args: tuple) -> Tuple[SubgoalFrame, str, list]:
        call, cvars = canonical_tuple(args)
        out = entry.lookup(call)
        frame = out.frame
        if out.kind == "new":
            for r in out.subsumed:
                self._convert(r, frame)
            self._start_generator(frame)
        elif out.kind == "subsuming":
            for r in out.subsumed:
                self._convert(r, frame.producer)
            frame = entry.add_subsumed_frame(call, frame)
            self.counters.subsumed_frames += 1
        return frame, out.kind, cvars

    def _tabled_call(self, entry: TableEntry, args: tuple, rest: tuple, head: tuple,
                     owner: SubgoalFrame) -> None:
        frame, kind, cvars = self._call(entry, args)
        if owner.state is not GENERATOR:
            return
        if cvars:
            m = {var(k): v for k, v in enumerate(cvars)}
            tpl = tuple([rename(t, m) for t in frame.template])
        else:
            tpl = frame.template
        node = Node(frame, tpl, rest, head, owner)
        c = self.counters
        if frame.state is COMPLETE:
            if kind != "new":
                c.loaders += 1
            if frame.arl.leaves:
                self._schedule(node)
            return
        if kind != "new":
            c.consumers += 1
        frame.nodes.append(node)
        self._depend(frame)
        if frame.arl.leaves or (frame.state is CONSUMER and frame.source.root.ts > frame.ts):
            self._schedule(node)

    def _depend(self, frame: SubgoalFrame) -> None:
        p = frame.producer
        if p.state is COMPLETE:
            return
        low = p.leader
        for f in reversed(self.cstack):
            if f.dfn <= low:
                break
            if f.leader > low:
                f.leader = low

    def _start_generator(self, frame: SubgoalFrame) -> None:
        frame.dfn = frame.leader = self._dfn
        self._dfn += 1
        frame.cpos = len(self.cstack)
        self.cstack.append(frame)
        entry = frame.entry
        if not entry.name.startswith("$"):
            self.counters.generators += 1
        stack = self.stack
        stack.append((MARK, frame))
        p = self.preds.get((entry.name, entry.arity_declared))
        if p is not None:
            cands = p.candidates(frame.call)
            for c in reversed(cands):
                stack.append((CLAUSE, frame, c))
        if entry.mode is Mode.RETROACTIVE and entry.stst.count:
            answer_reuse_on_new_call(frame)

    def _clause(self, frame: SubgoalFrame, c: _Clause) -> None:
        if frame.state is not GENERATOR:
            return
        m: dict = {}
        call = tuple([rename(a, m) for a in frame.call])
        head = tuple([rename(t, m) for t in frame.template])
        hargs, body = c.instance()
        s: dict = {}
        if not _unify_seq(call, hargs, s):
            return
        if s:
            body = tuple([apply(s, g) for g in body])
            head = tuple([apply(s, t) for t in head])
        self._resolve(body, head, frame)

    def _new_answer(self, owner: SubgoalFrame, head: tuple) -> None:
        entry = owner.entry
        c = self.counters
        if entry.mode is Mode.RETROACTIVE:
            trie = entry.stst
            leaf = stst_insert_tokens(tokenize(head), owner)
        else:
            trie = owner.trie
            leaf = tst_insert_answer(head, owner)
        if leaf is None:
            c.repeated_answers += 1
            return
        c.new_answers += 1
        for n in owner.nodes:
            if not n.scheduled and not n.dead:
                n.scheduled = True
                self.stack.append((CONSUME, n))
        fired = trie.fired
        if fired:
            for f in fired:
                for n in f.nodes:
                    if not n.scheduled and not n.dead:
                        n.scheduled = True
                        self.stack.append((CONSUME, n))
            fired.clear()

    def _consume(self, node: Node) -> None:
        owner = node.owner
        if owner.state is not GENERATOR:
            node.scheduled = False
            node.dead = True
            return
        frame = node.frame
        if frame.state is CONSUMER:
            refresh(frame)
        leaves = frame.arl.leaves
        i = node.cursor
        if i >= len(leaves):
            node.scheduled = False
            return
        node.cursor = i + 1
        self.stack.append((CONSUME, node))
        leaf = leaves[i]
        ans = decode_fresh(leaf) if frame.source.has_vars else leaf.decode()
        s: dict = {}
        if not _unify_seq(node.template, ans, s):
            return
        goals = tuple([apply(s, g) for g in node.goals])
        head = tuple([apply(s, t) for t in node.head])
        self._resolve(goals, head, owner)

    def _convert(self, r: SubgoalFrame, general: SubgoalFrame) -> None:
        """Retroactive conversion of the running generator ``r``."""
        if r.state is not GENERATOR:
            return
        convert_generator_to_consumer(r, general)
        self.counters.conversions += 1
        if r.state is LOADER:
            complete_frame(r)
        for n in r.nodes:
            if n.cursor < len(r.arl.leaves) or r.state is CONSUMER:
                self._schedule(n)

    def _mark(self, frame: SubgoalFrame) -> None:
        cs = self.cstack
        pos = frame.cpos
        if pos >= len(cs) or cs[pos] is not frame or frame.leader != frame.dfn:
            return
        seg = cs[pos:]
        work = []
        for f in seg:
            for g in [f, *f.subsumed]:
                if g.state is CONSUMER:
                    refresh(g)
                n_ans = len(g.arl.leaves)
                for n in g.nodes:
                    if (not n.dead and not n.scheduled and n.cursor < n_ans
                            and n.owner.state is GENERATOR):
                        work.append(n)
        if work:
            self.stack.append((MARK, frame))
            for n in work:
                self._schedule(n)
            return
        del cs[pos:]
        for f in seg:
            if f.state is GENERATOR:
                complete_frame(f)
        for f in seg:
            if f.state is not COMPLETE:
                complete_frame(f)
        for f in seg:
            for g in [f, *f.subsumed]:
                n_ans = len(g.arl.leaves)
                for n in g.nodes:
                    if n.cursor < n_ans:
                        self._schedule(n)
                g.nodes = []


def solve(program: Union[Program, str], query: Union[str, Term], mode: Optional[Mode] = None
          ) -> QueryResult:
    """One-shot evaluation with a fresh engine."""
    return Engine(program, mode).solve(query)
