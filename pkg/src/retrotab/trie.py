"""Term tries with per-node timestamps.

A tuple of terms is linearized into its preorder token sequence: atoms and
integers stand for themselves, a compound contributes ``(name, arity)``
before its arguments, and variables are the canonical ``var(k)`` objects
numbered by first occurrence. Each token is one trie node, so tuples with a
common prefix share nodes.

In a timestamped trie the root carries the predicate timestamp (the number
of distinct tuples inserted) and every node carries the largest timestamp
among the leaves below it, which lets retrieval skip old subtrees.
"""

from __future__ import annotations

import os
from collections import OrderedDict
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .term import Term, Var, fresh, to_str, unify_into, var

DEFAULT_FANOUT = 8


def fanout_threshold() -> int:
    return int(os.environ.get("RETROTAB_TRIE_FANOUT", DEFAULT_FANOUT))


class TrieError(ValueError):
    """Malformed token sequence."""


# -- tokens -------------------------------------------------------------------

def _tok(t: Term, out: list, vm: dict) -> None:
    tt = type(t)
    if tt is tuple:
        out.append((t[0], len(t) - 1))
        for i in range(1, len(t)):
            a = t[i]
            ta = type(a)
            if ta is int or ta is str:
                out.append(a)
            else:
                _tok(a, out, vm)
    elif tt is Var:
        v = vm.get(t)
        if v is None:
            v = vm[t] = var(len(vm))
        out.append(v)
    else:
        out.append(t)


def tokenize(terms: Iterable[Term]) -> list:
    """Preorder tokens of a term tuple, renumbering variables canonically."""
    out: list = []
    vm: dict = {}
    for t in terms:
        tt = type(t)
        if tt is int or tt is str:
            out.append(t)
        else:
            _tok(t, out, vm)
    return out


def arity(sym) -> int:
    return sym[1] if type(sym) is tuple else 0


def subterm_ends(tokens: Sequence) -> List[int]:
    """``ends[i]`` is the index just past the subterm starting at ``i``."""
    n = len(tokens)
    ends = [0] * n
    stack: List[List[int]] = []  # [start, remaining]
    for i, s in enumerate(tokens):
        a = arity(s)
        if a:
            stack.append([i, a])
            continue
        ends[i] = i + 1
        while stack:
            top = stack[-1]
            top[1] -= 1
            if top[1]:
                break
            stack.pop()
            ends[top[0]] = i + 1
    if stack:
        raise TrieError("token sequence ends inside a compound term")
    return ends


def check_tokens(tokens: Sequence, width: Optional[int] = None) -> int:
    """Number of complete terms encoded by ``tokens``.

    Raises TrieError on arity underflow/overflow or a width mismatch.
    """
    need = 0
    count = 0
    for s in tokens:
        if need == 0:
            count += 1
            need = 1
        need += arity(s) - 1
    if need != 0:
        raise TrieError("arity underflow: token sequence ends inside a term")
    if width is not None and count != width:
        raise TrieError(f"expected {width} terms, got {count}")
    return count


def _build(toks: Sequence, i: int) -> Tuple[Term, int]:
    s = toks[i]
    if type(s) is tuple:
        j = i + 1
        args = []
        for _ in range(s[1]):
            a, j = _build(toks, j)
            args.append(a)
        return (s[0], *args), j
    return s, i + 1


def detokenize(tokens: Sequence) -> tuple:
    out = []
    i, n = 0, len(tokens)
    while i < n:
        t, i = _build(tokens, i)
        out.append(t)
    return tuple(out)


def _has_var(t: Term) -> bool:
    tt = type(t)
    if tt is Var:
        return True
    if tt is tuple:
        for a in t[1:]:
            if _has_var(a):
                return True
    return False


def _refresh(t: Term, m: dict) -> Term:
    tt = type(t)
    if tt is Var:
        v = m.get(t)
        if v is None:
            v = m[t] = fresh()
        return v
    if tt is tuple:
        return (t[0],) + tuple([_refresh(a, m) for a in t[1:]])
    return t


def symbol_str(sym) -> str:
    if sym is None:
        return "root"
    if type(sym) is tuple:
        return f"{to_str(sym[0])}/{sym[1]}"
    return to_str(sym)


# -- nodes --------------------------------------------------------------------

class TrieNode:
    """One token of a stored tuple.

    ``children`` is None on leaves, a list for small fan-out and a dict keyed
    by symbol once the fan-out threshold is reached. On answer leaves
    ``payload`` caches the decoded tuple; subgoal-trie leaves keep their
    subgoal frame there.
    """

    __slots__ = ("symbol", "ts", "parent", "children", "payload")

    def __init__(self, symbol, parent: Optional["TrieNode"], ts: int = 0):
        self.symbol = symbol
        self.ts = ts
        self.parent = parent
        self.children = None
        self.payload = None

    def __repr__(self) -> str:
        return f"<{symbol_str(self.symbol)} @{self.ts}>"

    @property
    def is_leaf(self) -> bool:
        return self.children is None and self.parent is not None

    def child_nodes(self) -> list:
        ch = self.children
        if ch is None:
            return []
        if type(ch) is not list:
            return list(ch.values())
        return list(ch)

    def tokens(self) -> list:
        out = []
        node = self
        while node.parent is not None:
            out.append(node.symbol)
            node = node.parent
        out.reverse()
        return out

    def decode(self) -> tuple:
        """The canonical tuple spelled by the path from the root."""
        p = self.payload
        if p is None or type(p) is not tuple:
            p = detokenize(self.tokens())
            if self.children is None:
                self.payload = p
        return p


AnswerLeaf = TrieNode


def decode(leaf: TrieNode) -> tuple:
    return leaf.decode()


def decode_fresh(leaf: TrieNode) -> tuple:
    """Decoded tuple with its variables replaced by fresh ones."""
    t = leaf.decode()
    if any(_has_var(x) for x in t):
        m: dict = {}
        return tuple([_refresh(x, m) for x in t])
    return t


class Trie:
    """A trie of term tuples; ``timestamped`` selects TST behaviour."""

    def __init__(self, timestamped: bool = True, fanout: Optional[int] = None):
        self.root = TrieNode(None, None)
        self.timestamped = timestamped
        self.fanout = fanout if fanout is not None else fanout_threshold()
        self.size = 0          # nodes excluding the root
        self.count = 0         # distinct tuples stored
        self.has_vars = False
        self.width: Optional[int] = None
        self.fired: list = []  # subscribers hit by insertions, drained by the owner
        self._watch: Dict[tuple, list] = {}
        self._watch_lengths: List[int] = []
        self._templates: Dict[tuple, tuple] = {}

    @property
    def ts(self) -> int:
        """Predicate timestamp."""
        return self.root.ts

    def __len__(self) -> int:
        return self.count

    def _child(self, node: TrieNode, sym) -> Optional[TrieNode]:
        ch = node.children
        if ch is None:
            return None
        if type(ch) is not list:
            return ch.get(sym)
        for c in ch:
            if c.symbol == sym and type(c.symbol) is type(sym):
                return c
        return None

    def _add_child(self, node: TrieNode, sym) -> TrieNode:
        c = TrieNode(sym, node)
        ch = node.children
        if ch is None:
            node.children = [c]
        elif type(ch) is not list:
            ch[sym] = c
        else:
            ch.append(c)
            if len(ch) >= self.fanout:
                if self.timestamped:
                    # kept in timestamp order so retrieval can stop early
                    node.children = OrderedDict((x.symbol, x) for x in sorted(ch, key=_ts_key))
                else:
                    node.children = {x.symbol: x for x in ch}
        self.size += 1
        return c

    def lookup(self, tokens: Sequence) -> Optional[TrieNode]:
        node = self.root
        for sym in tokens:
            node = self._child(node, sym)
            if node is None:
                return None
        if node is self.root:
            return node if self.width == 0 and self.count else None
        return node

    def check_insert(self, tokens: Sequence) -> Tuple[TrieNode, bool]:
        """Find or insert ``tokens``; returns ``(leaf, is_new)``.

        A new insertion increments the predicate timestamp and stamps every
        node on the inserted path with it.
        """
        node = self.root
        n = len(tokens)
        if n == 0:
            return self._insert_empty()
        i = 0
        while i < n:
            sym = tokens[i]
            ch = node.children
            if ch is None:
                break
            if type(ch) is not list:
                nxt = ch.get(sym)
            else:
                nxt = None
                for c in ch:
                    if c.symbol == sym and type(c.symbol) is type(sym):
                        nxt = c
                        break
            if nxt is None:
                break
            node = nxt
            i += 1
        if i == n:
            if node is self.root or node.children is not None:
                check_tokens(tokens)
                raise TrieError("token sequence is a proper prefix of a stored tuple")
            return node, False
        if node is not self.root and node.children is None:
            raise TrieError("stored tuple is a proper prefix of the token sequence")
        width = check_tokens(tokens, self.width)
        if self.width is None:
            self.width = width
        while i < n:
            sym = tokens[i]
            if type(sym) is Var:
                self.has_vars = True
            node = self._add_child(node, sym)
            i += 1
        self.count += 1
        root = self.root
        new_ts = root.ts + 1
        if self.timestamped:
            leaf = node
            while node is not None:
                node.ts = new_ts
                parent = node.parent
                if parent is not None and type(parent.children) is OrderedDict:
                    parent.children.move_to_end(node.symbol)
                node = parent
            node = leaf
        else:
            root.ts = new_ts
            node.ts = new_ts
        if self._watch:
            self._fire(tokens)
        return node, True

    def _insert_empty(self) -> Tuple[TrieNode, bool]:
        # the empty tuple (a ground call's bindings) is stored at the root
        root = self.root
        if self.width not in (None, 0):
            raise TrieError(f"expected {self.width} terms, got 0")
        if self.count:
            return root, False
        self.width = 0
        self.count = 1
        root.ts += 1
        if self._watch:
            self._fire(())
        return root, True

    # -- subscriptions: who wants to hear about insertions under a prefix --

    def subscribe(self, prefix: tuple, obj) -> None:
        lst = self._watch.setdefault(prefix, [])
        lst.append(obj)
        if len(prefix) not in self._watch_lengths:
            self._watch_lengths.append(len(prefix))
            self._watch_lengths.sort()

    def unsubscribe(self, prefix: tuple, obj) -> None:
        lst = self._watch.get(prefix)
        if lst and obj in lst:
            lst.remove(obj)
            if not lst:
                del self._watch[prefix]

    def _fire(self, tokens: Sequence) -> None:
        fired = self.fired
        watch = self._watch
        for k in self._watch_lengths:
            if k > len(tokens):
                break
            lst = watch.get(tuple(tokens[:k]))
            if lst:
                fired.extend(lst)

    # -- traversal ------------------------------------------------------------

    def iter_nodes(self) -> Iterator[TrieNode]:
        stack = self.root.child_nodes()[::-1]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.child_nodes()[::-1])

    def leaves(self) -> List[TrieNode]:
        if self.width == 0:
            return [self.root] if self.count else []
        return [n for n in self.iter_nodes() if n.children is None]

    def count_nodes(self) -> int:
        return self.size

    def collect_relevant_answers(self, template: Sequence[Term], after_ts: int) -> List[TrieNode]:
        """Leaves newer than ``after_ts`` whose tuple unifies with ``template``.

        Depth-first; subtrees whose timestamp is not newer than ``after_ts``
        are skipped, as are branches whose symbols clash with the template.
        Results are in ascending timestamp order.
        """
        root = self.root
        if root.ts <= after_ts:
            return []
        if self.width == 0:
            return [root] if self.count and not template else []
        if root.children is None:
            return []
        key = tuple(template)
        comp = self._templates.get(key)
        if comp is None:
            ttoks = tokenize(template)
            check_tokens(ttoks)
            tvars = [s for s in ttoks if type(s) is Var]
            comp = (ttoks, subterm_ends(ttoks), len(tvars) == len(set(tvars)))
            if len(self._templates) >= 4096:
                self._templates.clear()
            self._templates[key] = comp
        ttoks, ends, linear = comp
        out: List[TrieNode] = []
        ntoks = len(ttoks)

        def walk(node: TrieNode, i: int, skip: int, nv: int) -> None:
            ch = node.children
            if ch is None:
                if i == ntoks and skip == 0:
                    out.append(node)
                return
            if skip or type(ttoks[i]) is Var:
                nexti = i if skip else i + 1
                base = skip - 1 if skip else 0
                if type(ch) is OrderedDict:
                    kids = []
                    for c in reversed(ch.values()):
                        if c.ts <= after_ts:
                            break
                        kids.append(c)
                    kids.reverse()
                else:
                    kids = [c for c in (ch if type(ch) is list else ch.values()) if c.ts > after_ts]
                for c in kids:
                    s = c.symbol
                    ts_ = type(s)
                    if ts_ is tuple:
                        walk(c, nexti, base + s[1], nv)
                    elif ts_ is Var and s.index == nv:
                        walk(c, nexti, base, nv + 1)
                    else:
                        walk(c, nexti, base, nv)
                return
            t = ttoks[i]
            if type(ch) is not list:
                cands = []
                c = ch.get(t)
                if c is not None:
                    cands.append(c)
                for k in range(nv + 1):
                    c = ch.get(var(k))
                    if c is not None:
                        cands.append(c)
            else:
                cands = [c for c in ch if type(c.symbol) is Var
                         or (c.symbol == t and type(c.symbol) is type(t))]
            for c in cands:
                if c.ts <= after_ts:
                    continue
                s = c.symbol
                if type(s) is Var:
                    walk(c, ends[i], 0, nv + 1 if s.index == nv else nv)
                else:
                    walk(c, i + 1, 0, nv)

        walk(root, 0, 0, 0)
        if not linear or self.has_vars:
            tpl = ("$",) + tuple(template)
            out = [leaf for leaf in out if unify_into(tpl, ("$",) + decode_fresh(leaf), {}, True)]
        out.sort(key=_ts_key)
        return out

    # -- debugging ------------------------------------------------------------

    def dump(self) -> str:
        """One line per node, indented by depth: ``symbol @ts``."""
        lines = [f"root @{self.root.ts}"]

        def rec(node: TrieNode, d: int) -> None:
            for c in node.child_nodes():
                lines.append("  " * d + f"{symbol_str(c.symbol)} @{c.ts}")
                rec(c, d + 1)

        rec(self.root, 1)
        return "\n".join(lines)


def _ts_key(node: TrieNode) -> int:
    return node.ts


# Free-function spellings of the trie operations.

def check_insert(trie: Trie, tokens: Sequence) -> Tuple[TrieNode, bool]:
    return trie.check_insert(tokens)


def collect_relevant_answers(trie: Trie, template: Sequence[Term], after_ts: int) -> List[TrieNode]:
    return trie.collect_relevant_answers(template, after_ts)


def count_nodes(trie: Trie) -> int:
    return trie.count_nodes()
