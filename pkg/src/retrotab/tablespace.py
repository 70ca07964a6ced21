"""Table space: table entries, subgoal frames and answer storage.

Three organizations are supported, selected per predicate by :class:`Mode`:

* ``VARIANT``: every generator frame owns an answer trie holding only the
  bindings of the call's variables;
* ``SUBSUMPTIVE``: as variant, but the trie is timestamped and calls
  subsumed by an existing frame consume from that frame's trie;
* ``RETROACTIVE``: one timestamped trie per predicate (the STST) holds full
  answer tuples shared by every frame, and a running generator can later be
  turned into a consumer of a more general call.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

from .program import Mode, PredId
from .term import Term, Var, subsumes, term_vars, to_str, tuple_str, var
from .trie import Trie, TrieNode, subterm_ends, tokenize

DEFAULT_PENDING_THRESHOLD = 8


def pending_threshold() -> int:
    return int(os.environ.get("RETROTAB_PENDING_THRESHOLD", DEFAULT_PENDING_THRESHOLD))


class TableSpaceError(Exception):
    pass


class InvalidTransition(TableSpaceError):
    pass


class State(Enum):
    GENERATOR = "generator"
    CONSUMER = "consumer"
    LOADER = "loader"
    COMPLETE = "complete"


GENERATOR = State.GENERATOR
CONSUMER = State.CONSUMER
LOADER = State.LOADER
COMPLETE = State.COMPLETE


class PendingAnswerIndex:
    """Answers already in the STST that a frame has not yet found itself.

    Starts as a plain list and switches to a set once it reaches the
    threshold. Membership is by leaf identity.
    """

    __slots__ = ("_items", "threshold")

    def __init__(self, threshold: Optional[int] = None):
        self._items: object = []
        self.threshold = threshold if threshold is not None else pending_threshold()

    @property
    def hashed(self) -> bool:
        return type(self._items) is set

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def __contains__(self, leaf: TrieNode) -> bool:
        if type(self._items) is set:
            return leaf in self._items
        for x in self._items:
            if x is leaf:
                return True
        return False

    def __iter__(self) -> Iterator[TrieNode]:
        return iter(sorted(self._items, key=_ts))

    def add(self, leaf: TrieNode) -> None:
        items = self._items
        if type(items) is set:
            items.add(leaf)
        elif leaf not in self:
            items.append(leaf)
            if len(items) >= self.threshold:
                self._items = set(items)

    def extend(self, leaves: Iterable[TrieNode]) -> None:
        for leaf in leaves:
            self.add(leaf)

    def remove(self, leaf: TrieNode) -> None:
        items = self._items
        if type(items) is set:
            items.remove(leaf)
            return
        for i, x in enumerate(items):
            if x is leaf:
                del items[i]
                return
        raise KeyError(leaf)

    def drain(self) -> List[TrieNode]:
        out = sorted(self._items, key=_ts)
        self._items = []
        return out


def _ts(leaf: TrieNode) -> int:
    return leaf.ts


class AnswerReturnList:
    """Leaves reported to a frame, in report order, plus a consumption cursor."""

    __slots__ = ("leaves", "cursor")

    def __init__(self) -> None:
        self.leaves: List[TrieNode] = []
        self.cursor = 0

    def __len__(self) -> int:
        return len(self.leaves)

    def __iter__(self) -> Iterator[TrieNode]:
        return iter(self.leaves)

    def append(self, leaf: TrieNode) -> None:
        self.leaves.append(leaf)

    def extend(self, leaves: Iterable[TrieNode]) -> None:
        self.leaves.extend(leaves)

    def unconsumed(self) -> List[TrieNode]:
        return self.leaves[self.cursor:]

    def take(self) -> List[TrieNode]:
        out = self.leaves[self.cursor:]
        self.cursor = len(self.leaves)
        return out


class SubgoalFrame:
    """Per-call record.

    ``ts`` is the timestamp of the last answer this frame generated or
    consumed; ``template`` is what stored answers are unified against;
    ``general`` points at the frame this one consumes from, if any.
    The ``dfn``/``leader``/``nodes`` fields belong to the evaluation engine.
    """

    __slots__ = ("entry", "call", "state", "ts", "arl", "pending", "template",
                 "general", "trie", "subsumed", "nodes", "dfn", "leader", "cpos",
                 "new_count", "last_case", "was_generator", "watch_prefix", "number")

    def __init__(self, entry: "TableEntry", call: tuple, state: State, template: tuple):
        self.entry = entry
        self.call = call
        self.state = state
        self.ts = 0
        self.arl = AnswerReturnList()
        self.pending = PendingAnswerIndex(entry.pending_threshold)
        self.template = template
        self.general: Optional[SubgoalFrame] = None
        self.trie: Optional[Trie] = None
        self.subsumed: List[SubgoalFrame] = []
        self.nodes: list = []
        self.dfn = -1
        self.leader = -1
        self.cpos = -1
        self.new_count = 0
        self.last_case = 0
        self.was_generator = state is GENERATOR
        self.watch_prefix: Optional[tuple] = None
        self.number = len(entry.frames)

    def __repr__(self) -> str:
        return f"<{self.state.value} {self.goal_str()} ts={self.ts}>"

    @property
    def mode(self) -> Mode:
        return self.entry.mode

    @property
    def producer(self) -> "SubgoalFrame":
        """The frame whose evaluation actually produces this frame's answers."""
        f = self
        while f.general is not None:
            f = f.general
        return f

    @property
    def source(self) -> Trie:
        """The trie this frame's answers live in."""
        if self.entry.mode is Mode.RETROACTIVE:
            return self.entry.stst
        return self.producer.trie

    def goal_str(self) -> str:
        return f"{self.entry.name}(" + ",".join(to_str(a) for a in self.call) + ")"


@dataclass
class CallOutcome:
    """Result of a subgoal lookup.

    ``kind`` is ``"new"`` (``frame`` is a fresh generator), ``"variant"``
    (``frame`` is the existing variant) or ``"subsuming"`` (``frame`` is the
    existing frame that subsumes the call). In retroactive mode ``subsumed``
    lists the running generators the call subsumes.
    """

    kind: str
    frame: SubgoalFrame
    subsumed: List[SubgoalFrame] = field(default_factory=list)


def build_answer_template(mode: Mode, call: Sequence[Term], general=None) -> tuple:
    """The terms stored answers are unified against.

    Retroactive: the whole argument tuple. Variant: the call's variables.
    Subsumptive with a subsuming ``general`` call (or frame): the bindings of
    ``general``'s variables that make it equal to ``call``.
    """
    call = tuple(call)
    if mode is Mode.RETROACTIVE:
        return call
    if general is None or mode is Mode.VARIANT:
        acc: list = []
        for t in call:
            term_vars(t, acc)
        return tuple(acc)
    gcall = tuple(general.call) if isinstance(general, SubgoalFrame) else tuple(general)
    gvars: list = []
    for t in gcall:
        term_vars(t, gvars)
    sigma = subsumes(("$",) + gcall, ("$",) + call)
    if sigma is None:
        raise TableSpaceError(f"{tuple_str(gcall)} does not subsume {tuple_str(call)}")
    return tuple(sigma[v] for v in gvars)


class TableEntry:
    """Per-predicate table: subgoal trie plus, in retroactive mode, the STST."""

    def __init__(self, name: str, arity: int, mode: Mode,
                 pending_threshold_: Optional[int] = None, fanout: Optional[int] = None):
        self.name = name
        self.arity = arity
        self.arity_declared = arity
        self.mode = mode
        self.fanout = fanout
        self.pending_threshold = pending_threshold_
        self.subgoal_trie = Trie(timestamped=False, fanout=fanout)
        self.stst: Optional[Trie] = Trie(fanout=fanout) if mode is Mode.RETROACTIVE else None
        self.frames: List[SubgoalFrame] = []
        self.running: List[SubgoalFrame] = []

    @property
    def pred(self) -> PredId:
        return (self.name, self.arity)

    def __repr__(self) -> str:
        return f"<TableEntry {self.name}/{self.arity} {self.mode.value}>"

    # -- lookup ---------------------------------------------------------------

    def lookup(self, call: tuple) -> CallOutcome:
        """Find a variant or subsuming frame for ``call``, or make a generator."""
        if len(call) != self.arity:
            raise TableSpaceError(f"{self.name}/{self.arity} called with {len(call)} arguments")
        tokens = tokenize(call)
        leaf = self.subgoal_trie.lookup(tokens)
        if leaf is not None and leaf.payload is not None:
            return CallOutcome("variant", leaf.payload)
        subsumed: List[SubgoalFrame] = []
        if self.mode is Mode.RETROACTIVE:
            subsumed = self.running_subsumed_by(call)
        if self.mode is not Mode.VARIANT:
            general = self.find_subsuming(tokens)
            if general is not None:
                return CallOutcome("subsuming", general, subsumed)
        frame = self._new_frame(call, tokens, GENERATOR)
        return CallOutcome("new", frame, subsumed)

    def running_subsumed_by(self, call: tuple) -> List[SubgoalFrame]:
        wrapped = ("$",) + tuple(call)
        return [f for f in self.running
                if f.state is GENERATOR and f.call != call
                and subsumes(wrapped, ("$",) + f.call) is not None]

    def find_subsuming(self, tokens: Sequence) -> Optional[SubgoalFrame]:
        """Most specific frame whose call subsumes ``tokens`` (ties: preorder)."""
        matches = self.subsuming_frames(tokens)
        if not matches:
            return None
        best = matches[0]
        best_score = _specificity(best.call)
        for f in matches[1:]:
            sc = _specificity(f.call)
            if sc > best_score:
                best, best_score = f, sc
        return best

    def subsuming_frames(self, tokens: Sequence) -> List[SubgoalFrame]:
        """All frames whose call subsumes the call spelled by ``tokens``."""
        ends = subterm_ends(tokens)
        n = len(tokens)
        found: List[SubgoalFrame] = []

        def walk(node: TrieNode, i: int, binds: list) -> None:
            if i == n:
                if node.payload is not None:
                    found.append(node.payload)
                return
            ch = node.children
            if ch is None:
                return
            t = tokens[i]
            nb = len(binds)
            if type(ch) is not list:
                cands = [ch.get(var(k)) for k in range(nb + 1)]
                if type(t) is not Var:
                    cands.append(ch.get(t))
            else:
                cands = ch
            for c in cands:
                if c is None:
                    continue
                s = c.symbol
                if type(s) is Var:
                    seg = tuple(tokens[i:ends[i]])
                    if s.index < nb:
                        if binds[s.index] == seg:
                            walk(c, ends[i], binds)
                    elif s.index == nb:
                        walk(c, ends[i], binds + [seg])
                elif type(t) is not Var and type(s) is type(t) and s == t:
                    walk(c, i + 1, binds)

        walk(self.subgoal_trie.root, 0, [])
        return found

    # -- frame creation --------------------------------------------------------

    def _new_frame(self, call: tuple, tokens: Sequence, state: State,
                   template: Optional[tuple] = None) -> SubgoalFrame:
        if template is None:
            template = build_answer_template(self.mode, call)
        frame = SubgoalFrame(self, call, state, template)
        leaf, _ = self.subgoal_trie.check_insert(tokens)
        leaf.payload = frame
        self.frames.append(frame)
        if state is GENERATOR:
            if self.mode is Mode.VARIANT:
                frame.trie = Trie(timestamped=False, fanout=self.fanout)
            elif self.mode is Mode.SUBSUMPTIVE:
                frame.trie = Trie(fanout=self.fanout)
            self.running.append(frame)
        return frame

    def new_generator(self, call: tuple) -> SubgoalFrame:
        """Generator frame for ``call`` without consulting existing frames."""
        tokens = tokenize(call)
        if self.subgoal_trie.lookup(tokens) is not None:
            raise TableSpaceError(f"{self.name}{tuple_str(call)} already has a frame")
        return self._new_frame(call, tokens, GENERATOR)

    def add_subsumed_frame(self, call: tuple, general: SubgoalFrame) -> SubgoalFrame:
        """Frame for a call that consumes from ``general``'s producer.

        If the producer is already complete the frame is filled at once and
        returned complete (loader semantics).
        """
        producer = general.producer
        template = build_answer_template(self.mode, call, producer)
        frame = self._new_frame(call, tokenize(call), CONSUMER, template)
        frame.general = producer
        producer.subsumed.append(frame)
        if producer.state is COMPLETE:
            frame.state = LOADER
            refresh(frame)
            complete_frame(frame)
        else:
            watch(frame)
        return frame

    # -- measurements ----------------------------------------------------------

    def answer_trie_nodes(self) -> int:
        if self.stst is not None:
            return self.stst.count_nodes()
        return sum(f.trie.count_nodes() for f in self.frames if f.trie is not None)

    def subgoal_trie_nodes(self) -> int:
        return self.subgoal_trie.count_nodes()

    def dump(self) -> str:
        lines = [f"table {self.name}/{self.arity} mode={self.mode.value} "
                 f"frames={len(self.frames)} answer_nodes={self.answer_trie_nodes()}"]
        for f in self.frames:
            gen = f" general={f.general.goal_str()}" if f.general is not None else ""
            lines.append(f"  frame {f.goal_str()} state={f.state.value} ts={f.ts} "
                         f"arl={len(f.arl)} pending={len(f.pending)}{gen}")
        if self.stst is not None:
            lines.append("  stst:")
            lines.extend("    " + ln for ln in self.stst.dump().splitlines())
        else:
            for f in self.frames:
                if f.trie is not None:
                    lines.append(f"  answers of {f.goal_str()}:")
                    lines.extend("    " + ln for ln in f.trie.dump().splitlines())
        return "\n".join(lines)


def _specificity(call: tuple) -> int:
    return sum(1 for s in tokenize(call) if type(s) is not Var)


class TableSpace:
    """All table entries of an evaluation."""

    def __init__(self, pending_threshold_: Optional[int] = None, fanout: Optional[int] = None):
        self.entries: Dict[PredId, TableEntry] = {}
        self.pending_threshold = pending_threshold_
        self.fanout = fanout

    def declare(self, name: str, arity: int, mode: Mode) -> TableEntry:
        e = self.entries.get((name, arity))
        if e is None:
            e = self.entries[(name, arity)] = TableEntry(
                name, arity, mode, self.pending_threshold, self.fanout)
        return e

    def get(self, pred: PredId) -> Optional[TableEntry]:
        return self.entries.get(pred)

    def __iter__(self) -> Iterator[TableEntry]:
        return iter(self.entries.values())

    def dump(self) -> str:
        return "\n".join(e.dump() for e in self.entries.values() if not e.name.startswith("$"))


# -- answer insertion ------------------------------------------------------------

def _report(frame: SubgoalFrame, leaf: TrieNode, case: int) -> TrieNode:
    frame.last_case = case
    frame.new_count += 1
    arl = frame.arl
    arl.leaves.append(leaf)
    arl.cursor = len(arl.leaves)
    return leaf


def _stst_classify(frame: SubgoalFrame, leaf: TrieNode, old_ts: int, new_ts: int) -> Optional[TrieNode]:
    leaf_ts = leaf.ts
    fts = frame.ts
    if new_ts == old_ts + 1 and fts == old_ts:
        # case 1: incremental answer by the same subgoal
        frame.ts = new_ts
        return _report(frame, leaf, 1)
    if new_ts == old_ts == leaf_ts and fts == new_ts - 1:
        # case 2: only answer the subgoal has not considered yet
        frame.ts = new_ts
        return _report(frame, leaf, 2)
    if leaf_ts <= fts:
        # case 3: older than the frame; new only if still pending
        pending = frame.pending
        if pending and leaf in pending:
            pending.remove(leaf)
            return _report(frame, leaf, 3)
        frame.last_case = 3
        return None
    # case 4: other subgoals inserted answers since ts(frame)
    stst = frame.entry.stst
    found = stst.collect_relevant_answers(frame.template, fts)
    pending = frame.pending
    for x in found:
        if x is not leaf:
            pending.add(x)
    frame.ts = new_ts
    return _report(frame, leaf, 4)


def stst_insert_answer(answer: Sequence[Term], frame: SubgoalFrame) -> Optional[TrieNode]:
    """Insert a full answer tuple for a retroactive generator.

    Returns the leaf when the answer is new for ``frame`` and None when the
    frame already produced it.
    """
    stst = frame.entry.stst
    old_ts = stst.root.ts
    leaf, _ = stst.check_insert(tokenize(answer))
    return _stst_classify(frame, leaf, old_ts, stst.root.ts)


def stst_insert_tokens(tokens: list, frame: SubgoalFrame) -> Optional[TrieNode]:
    stst = frame.entry.stst
    old_ts = stst.root.ts
    leaf, _ = stst.check_insert(tokens)
    return _stst_classify(frame, leaf, old_ts, stst.root.ts)


def tst_insert_answer(answer: Sequence[Term], frame: SubgoalFrame) -> Optional[TrieNode]:
    """Insert variable bindings into the frame's own (timestamped) trie."""
    leaf, is_new = frame.trie.check_insert(tokenize(answer))
    if not is_new:
        return None
    frame.ts = frame.trie.root.ts
    return _report(frame, leaf, 1)


variant_insert_answer = tst_insert_answer


def insert_answer(frame: SubgoalFrame, answer: Sequence[Term]) -> Optional[TrieNode]:
    """New Answer: store ``answer`` (shaped like ``frame.template``)."""
    if frame.state is not GENERATOR:
        raise InvalidTransition(f"{frame!r} is not a generator")
    if frame.entry.mode is Mode.RETROACTIVE:
        return stst_insert_answer(answer, frame)
    return tst_insert_answer(answer, frame)


def answer_reuse_on_new_call(frame: SubgoalFrame) -> List[TrieNode]:
    """Report matching STST answers to a fresh retroactive generator."""
    stst = frame.entry.stst
    out = []
    for leaf in stst.collect_relevant_answers(frame.template, 0):
        ts = stst.root.ts
        got = _stst_classify(frame, leaf, ts, ts)
        if got is not None:
            out.append(got)
    return out


# -- consumption ------------------------------------------------------------------

def refresh(frame: SubgoalFrame) -> int:
    """Pull answers newer than ``ts(frame)`` from the source trie into the arl."""
    if frame.state is GENERATOR or frame.state is COMPLETE:
        return 0
    src = frame.source
    if src.root.ts <= frame.ts:
        return 0
    found = src.collect_relevant_answers(frame.template, frame.ts)
    frame.arl.leaves.extend(found)
    frame.ts = src.root.ts
    return len(found)


def fetch_new_answers(frame: SubgoalFrame) -> List[TrieNode]:
    """Unconsumed answers of a consumer or loader frame, each exactly once."""
    refresh(frame)
    return frame.arl.take()


# -- state transitions --------------------------------------------------------------

def watch(frame: SubgoalFrame) -> None:
    """Subscribe a consumer frame to insertions that could match it."""
    toks = tokenize(frame.template)
    prefix = []
    for s in toks:
        if type(s) is Var:
            break
        prefix.append(s)
    frame.watch_prefix = tuple(prefix)
    frame.source.subscribe(frame.watch_prefix, frame)


def unwatch(frame: SubgoalFrame) -> None:
    if frame.watch_prefix is not None:
        frame.source.unsubscribe(frame.watch_prefix, frame)
        frame.watch_prefix = None


def convert_generator_to_consumer(frame: SubgoalFrame, general: SubgoalFrame) -> None:
    """Turn a running retroactive generator into a consumer of ``general``.

    Pending answers become unconsumed arl entries; ``ts`` is kept so later
    retrieval only sees answers the frame never produced as a generator.
    """
    if frame.state is COMPLETE:
        raise InvalidTransition(f"{frame!r} is already complete")
    if frame.state is not GENERATOR:
        return
    if frame.entry.mode is not Mode.RETROACTIVE:
        raise InvalidTransition("conversion needs a retroactive table")
    general = general.producer
    if general is frame:
        raise InvalidTransition("a frame cannot consume from itself")
    frame.arl.leaves.extend(frame.pending.drain())
    frame.state = LOADER if general.state is COMPLETE else CONSUMER
    frame.general = general
    general.subsumed.append(frame)
    for sub in frame.subsumed:
        sub.general = general
        general.subsumed.append(sub)
    frame.subsumed = []
    if frame in frame.entry.running:
        frame.entry.running.remove(frame)
    if frame.state is CONSUMER:
        watch(frame)


def complete_frame(frame: SubgoalFrame) -> None:
    """Mark a frame complete; generators also complete their consumers."""
    if frame.state is COMPLETE:
        return
    if frame.state is GENERATOR:
        if frame.pending:
            frame.arl.leaves.extend(frame.pending.drain())
        frame.state = COMPLETE
        entry = frame.entry
        if frame in entry.running:
            entry.running.remove(frame)
        for sub in frame.subsumed:
            complete_frame(sub)
        return
    refresh(frame)
    unwatch(frame)
    frame.state = COMPLETE
    for sub in frame.subsumed:
        complete_frame(sub)
