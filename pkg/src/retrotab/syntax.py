"""Prolog-like text syntax for terms, clauses and tabling directives.

Atoms start lowercase (or are quoted), variables start uppercase or with
``_``, integers are decimal, lists use ``[a,b|T]``. Directives::

    :- table path/2 as retroactive.
    :- use_retrosubsumptive_tabling r/2.
    :- dynamic edge/2.
"""

from __future__ import annotations

import re
import sys
from typing import Dict, List, Optional, Tuple

from .program import Clause, Mode, Program
from .term import CONS, NIL, Term, Var, fresh

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*|/\*.*?\*/)
  | (?P<neck>:-)
  | (?P<int>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<atom>[a-z][A-Za-z0-9_]*)
  | (?P<qatom>'(?:[^'\\]|\\.)*')
  | (?P<punct>[()\[\],|])
  | (?P<end>\.(?=\s|%|$))
  | (?P<sym>[+\-*/\\^<>=~:.?@#&$]+)
    """,
    re.VERBOSE | re.DOTALL,
)

_DIRECTIVE_MODES = {
    "use_retrosubsumptive_tabling": Mode.RETROACTIVE,
    "use_subsumptive_tabling": Mode.SUBSUMPTIVE,
    "use_variant_tabling": Mode.VARIANT,
}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self) -> str:
        return f"{self.kind}:{self.text!r}@{self.line}:{self.col}"


def _lex(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    pos = 0
    line, line_start = 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0
        self.varmap: Dict[str, Var] = {}

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, tok.line, tok.col)

    def expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        t = self.next()
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind
            got = t.text or t.kind
            raise ParseError(f"expected {want!r}, found {got!r}", t.line, t.col)
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    # -- terms ------------------------------------------------------------

    def variable(self, name: str) -> Var:
        if name == "_":
            return fresh("_")
        v = self.varmap.get(name)
        if v is None:
            v = self.varmap[name] = fresh(name)
        return v

    def term(self) -> Term:
        left = self.primary()
        if self.at("sym", "="):
            self.next()
            right = self.primary()
            return ("=", left, right)
        return left

    def primary(self) -> Term:
        t = self.next()
        if t.kind == "var":
            return self.variable(t.text)
        if t.kind == "int":
            return int(t.text)
        if t.kind == "sym" and t.text == "-" and self.at("int"):
            return -int(self.next().text)
        if t.kind in ("atom", "qatom", "sym"):
            name = t.text
            if t.kind == "qatom":
                name = re.sub(r"\\(.)", r"\1", name[1:-1])
            name = sys.intern(name)
            if self.at("punct", "(") and self.peek().col == t.col + len(t.text) \
                    and self.peek().line == t.line:
                self.next()
                args = [self.term()]
                while self.at("punct", ","):
                    self.next()
                    args.append(self.term())
                self.expect("punct", ")")
                return (name,) + tuple(args)
            return name
        if t.kind == "punct" and t.text == "[":
            if self.at("punct", "]"):
                self.next()
                return NIL
            items = [self.term()]
            while self.at("punct", ","):
                self.next()
                items.append(self.term())
            tail: Term = NIL
            if self.at("punct", "|"):
                self.next()
                tail = self.term()
            self.expect("punct", "]")
            for x in reversed(items):
                tail = (CONS, x, tail)
            return tail
        if t.kind == "punct" and t.text == "(":
            inner = self.term()
            self.expect("punct", ")")
            return inner
        raise ParseError(f"unexpected {t.text or t.kind!r}", t.line, t.col)

    def body(self) -> Tuple[Term, ...]:
        goals = [self.callable()]
        while self.at("punct", ","):
            self.next()
            goals.append(self.callable())
        return tuple(goals)

    def callable(self) -> Term:
        tok = self.peek()
        g = self.term()
        if type(g) not in (str, tuple):
            raise self.error("goal must be an atom or compound term", tok)
        return g

    # -- clauses ------------------------------------------------------------

    def pred_spec(self) -> Tuple[str, int]:
        name_tok = self.next()
        if name_tok.kind not in ("atom", "qatom"):
            raise ParseError("expected predicate name", name_tok.line, name_tok.col)
        name = name_tok.text if name_tok.kind == "atom" else name_tok.text[1:-1]
        slash = self.next()
        if slash.kind != "sym" or slash.text != "/":
            raise ParseError(f"directive for {name!r} needs NAME/ARITY", slash.line, slash.col)
        ar = self.next()
        if ar.kind != "int":
            raise ParseError(f"unknown arity for {name!r}", ar.line, ar.col)
        return sys.intern(name), int(ar.text)

    def directive(self, program: Program) -> None:
        kw = self.next()
        if kw.kind != "atom":
            raise ParseError("expected directive name", kw.line, kw.col)
        if kw.text == "table" or kw.text == "dynamic":
            default = Mode.VARIANT
        elif kw.text in _DIRECTIVE_MODES:
            default = _DIRECTIVE_MODES[kw.text]
        else:
            raise ParseError(f"unknown directive {kw.text!r}", kw.line, kw.col)
        specs = [self.pred_spec()]
        while self.at("punct", ","):
            self.next()
            specs.append(self.pred_spec())
        mode = default
        if kw.text == "table" and self.at("atom", "as"):
            self.next()
            mt = self.next()
            try:
                mode = Mode.parse(mt.text)
            except ValueError:
                raise ParseError(f"unknown tabling mode {mt.text!r}", mt.line, mt.col) from None
        self.expect("end")
        for name, arity in specs:
            if kw.text == "dynamic":
                program.dynamic.add((name, arity))
            else:
                program.table(name, arity, mode)

    def clause(self) -> Clause:
        self.varmap = {}
        head = self.callable()
        body: Tuple[Term, ...] = ()
        if self.at("neck"):
            self.next()
            body = self.body()
        self.expect("end")
        if body == ("true",):
            body = ()
        return Clause(head, body)

    def program(self) -> Program:
        prog = Program()
        while not self.at("eof"):
            if self.at("neck"):
                self.next()
                self.directive(prog)
            else:
                prog.add(self.clause())
        return prog


def parse_program(text: str) -> Program:
    return _Parser(text).program()


def parse_term(text: str, varmap: Optional[Dict[str, Var]] = None) -> Term:
    p = _Parser(text)
    if varmap is not None:
        p.varmap = varmap
    t = p.term()
    if p.at("end"):
        p.next()
    if not p.at("eof"):
        raise p.error(f"trailing input {p.peek().text!r}")
    return t


def parse_query(text: str) -> Tuple[Tuple[Term, ...], Dict[str, Var]]:
    """Parse a conjunctive goal; returns the goals and the named variables."""
    p = _Parser(text)
    goals = p.body()
    if p.at("end"):
        p.next()
    if not p.at("eof"):
        raise p.error(f"trailing input {p.peek().text!r}")
    return goals, p.varmap


def format_program(program: Program) -> str:
    return str(program)
