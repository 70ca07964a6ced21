"""First-order terms.

Representation (chosen so terms are cheap to build, hash and compare):

* variables are :class:`Var` objects and compare by identity;
* integers are Python ``int``;
* atoms are Python ``str`` (interned);
* compound terms are tuples ``(functor, arg1, ..., argN)`` with ``N >= 1``.

Canonical variables ``var(0), var(1), ...`` are interned, so two canonical
terms are variants exactly when they are ``==``.
"""

from __future__ import annotations

import itertools
import sys
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

Term = Union["Var", int, str, tuple]
Substitution = Dict["Var", Term]

NIL = "[]"
CONS = "."


class Var:
    """A logic variable. Equality is identity."""

    __slots__ = ("index", "name")

    def __init__(self, index: int, name: Optional[str] = None):
        self.index = index
        self.name = name

    def __repr__(self) -> str:
        if self.name is not None:
            return self.name
        return f"VAR{self.index}"


_CANONICAL: List[Var] = []
_fresh_ids = itertools.count()


def var(k: int) -> Var:
    """The interned canonical variable number ``k``."""
    while len(_CANONICAL) <= k:
        _CANONICAL.append(Var(len(_CANONICAL)))
    return _CANONICAL[k]


def fresh(name: Optional[str] = None) -> Var:
    i = next(_fresh_ids)
    return Var(i, name if name is not None else f"_G{i}")


def atom(name: str) -> str:
    return sys.intern(name)


def compound(functor: str, *args: Term) -> tuple:
    if not args:
        raise ValueError("compound terms need at least one argument; use an atom")
    return (sys.intern(functor),) + args


def mklist(items: Iterable[Term], tail: Term = NIL) -> Term:
    out = tail
    for x in reversed(list(items)):
        out = (CONS, x, out)
    return out


def is_var(t: Term) -> bool:
    return type(t) is Var


def is_atom(t: Term) -> bool:
    return type(t) is str


def is_compound(t: Term) -> bool:
    return type(t) is tuple


def is_ground(t: Term) -> bool:
    tt = type(t)
    if tt is Var:
        return False
    if tt is tuple:
        for a in t[1:]:
            if not is_ground(a):
                return False
    return True


def functor_of(t: Term) -> Tuple[str, int]:
    if type(t) is tuple:
        return t[0], len(t) - 1
    if type(t) is str:
        return t, 0
    raise TypeError(f"not a callable term: {t!r}")


def args_of(t: Term) -> tuple:
    return t[1:] if type(t) is tuple else ()


def term_vars(t: Term, acc: Optional[List[Var]] = None) -> List[Var]:
    """Distinct variables of ``t`` in left-to-right first-occurrence order."""
    if acc is None:
        acc = []
    tt = type(t)
    if tt is Var:
        if t not in acc:
            acc.append(t)
    elif tt is tuple:
        for a in t[1:]:
            term_vars(a, acc)
    return acc


def depth(t: Term) -> int:
    if type(t) is tuple:
        return 1 + max(depth(a) for a in t[1:])
    return 0


# -- renaming / canonical form ------------------------------------------------

def rename(t: Term, mapping: Dict[Var, Term]) -> Term:
    """Replace variables by ``mapping``; variables missing from it get fresh ones."""
    tt = type(t)
    if tt is Var:
        v = mapping.get(t)
        if v is None:
            v = mapping[t] = fresh()
        return v
    if tt is tuple:
        return (t[0],) + tuple([rename(a, mapping) for a in t[1:]])
    return t


def _canon(t: Term, mapping: Dict[Var, Var]) -> Term:
    tt = type(t)
    if tt is Var:
        v = mapping.get(t)
        if v is None:
            v = mapping[t] = var(len(mapping))
        return v
    if tt is tuple:
        return (t[0],) + tuple([_canon(a, mapping) for a in t[1:]])
    return t


def canonicalize(t: Term) -> Term:
    """Renumber variables 0, 1, ... by first occurrence in preorder."""
    return _canon(t, {})


def canonical_tuple(terms: Iterable[Term]) -> Tuple[tuple, List[Var]]:
    """Canonicalize a tuple of terms jointly.

    Returns the canonical tuple and the original variables in numbering order,
    so ``var(k)`` in the result stands for ``originals[k]``.
    """
    mapping: Dict[Var, Var] = {}
    out = tuple([_canon(t, mapping) for t in terms])
    return out, list(mapping)


def variant(a: Term, b: Term) -> bool:
    return canonicalize(a) == canonicalize(b)


# -- substitutions ------------------------------------------------------------

def walk(t: Term, s: Substitution) -> Term:
    while type(t) is Var:
        v = s.get(t)
        if v is None:
            return t
        t = v
    return t


def apply(s: Substitution, t: Term) -> Term:
    """Apply ``s`` fully (following binding chains)."""
    tt = type(t)
    if tt is Var:
        v = s.get(t)
        if v is None:
            return t
        return apply(s, v)
    if tt is tuple:
        return (t[0],) + tuple([apply(s, a) for a in t[1:]])
    return t


def _occurs(v: Var, t: Term, s: Substitution) -> bool:
    t = walk(t, s)
    if t is v:
        return True
    if type(t) is tuple:
        return any(_occurs(v, a, s) for a in t[1:])
    return False


def unify_into(a: Term, b: Term, s: Substitution, occurs_check: bool = False) -> bool:
    """Extend ``s`` (triangular form) so that ``a`` and ``b`` unify.

    On failure ``s`` may hold partial bindings; callers discard it.
    """
    stack = [(a, b)]
    pop = stack.pop
    push = stack.append
    while stack:
        x, y = pop()
        while type(x) is Var:
            nx = s.get(x)
            if nx is None:
                break
            x = nx
        while type(y) is Var:
            ny = s.get(y)
            if ny is None:
                break
            y = ny
        if x is y:
            continue
        tx = type(x)
        ty = type(y)
        if tx is Var:
            if occurs_check and ty is tuple and _occurs(x, y, s):
                return False
            s[x] = y
        elif ty is Var:
            if occurs_check and tx is tuple and _occurs(y, x, s):
                return False
            s[y] = x
        elif tx is tuple:
            if ty is not tuple or len(x) != len(y) or x[0] != y[0]:
                return False
            for i in range(1, len(x)):
                push((x[i], y[i]))
        elif tx is not ty or x != y:
            return False
    return True


def normalize(s: Substitution) -> Substitution:
    """Idempotent form of a triangular substitution."""
    return {v: apply(s, t) for v, t in s.items()}


def unify(a: Term, b: Term, occurs_check: bool = True) -> Optional[Substitution]:
    """Most general unifier of ``a`` and ``b`` (normalized), or None.

    The occurs check is on by default here: a cyclic binding cannot be
    normalized into finite terms.
    """
    s: Substitution = {}
    if not unify_into(a, b, s, occurs_check):
        return None
    return normalize(s)


def subsumes(general: Term, specific: Term) -> Optional[Substitution]:
    """One-way matching: ``sigma`` with ``apply(sigma, general) == specific``.

    Variables of ``specific`` are treated as constants.
    """
    s: Substitution = {}
    stack = [(general, specific)]
    while stack:
        g, t = stack.pop()
        tg = type(g)
        if tg is Var:
            b = s.get(g)
            if b is None:
                s[g] = t
            elif not (b is t or b == t):
                return None
        elif tg is tuple:
            if type(t) is not tuple or len(t) != len(g) or t[0] != g[0]:
                return None
            for i in range(1, len(g)):
                stack.append((g[i], t[i]))
        elif type(t) is not tg or g != t:
            return None
    return s


# -- printing -------------------------------------------------------------------

def _atom_text(name: str) -> str:
    if name == NIL or name.isidentifier() and name[0].islower():
        return name
    if name and all(c in "+-*/\\^<>=~:.?@#&$" for c in name):
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def to_str(t: Term) -> str:
    tt = type(t)
    if tt is Var:
        return repr(t)
    if tt is int:
        return str(t)
    if tt is str:
        return _atom_text(t)
    if t[0] == CONS and len(t) == 3:
        items = []
        while type(t) is tuple and t[0] == CONS and len(t) == 3:
            items.append(to_str(t[1]))
            t = t[2]
        if t == NIL:
            return "[" + ",".join(items) + "]"
        return "[" + ",".join(items) + "|" + to_str(t) + "]"
    return _atom_text(t[0]) + "(" + ",".join(to_str(a) for a in t[1:]) + ")"


def tuple_str(ts: Iterable[Term]) -> str:
    return "<" + ",".join(to_str(t) for t in ts) + ">"


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if type(t) is tuple:
        for a in t[1:]:
            yield from subterms(a)
