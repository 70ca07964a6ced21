"""Horn programs and tabling directives."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .term import Term, functor_of, term_vars, to_str

PredId = Tuple[str, int]


class Mode(str, Enum):
    VARIANT = "variant"
    SUBSUMPTIVE = "subsumptive"
    RETROACTIVE = "retroactive"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        aliases = {"var": cls.VARIANT, "sub": cls.SUBSUMPTIVE, "rcs": cls.RETROACTIVE,
                   "retro": cls.RETROACTIVE}
        text = text.strip().lower()
        if text in aliases:
            return aliases[text]
        return cls(text)


@dataclass(frozen=True)
class Clause:
    head: Term
    body: Tuple[Term, ...] = ()

    @property
    def pred(self) -> PredId:
        return functor_of(self.head)

    @property
    def is_fact(self) -> bool:
        return not self.body

    def variables(self) -> list:
        acc = term_vars(self.head)
        for g in self.body:
            term_vars(g, acc)
        return acc

    def __str__(self) -> str:
        if not self.body:
            return to_str(self.head) + "."
        return to_str(self.head) + " :- " + ", ".join(to_str(g) for g in self.body) + "."


@dataclass
class Program:
    clauses: List[Clause] = field(default_factory=list)
    tabled: Dict[PredId, Mode] = field(default_factory=dict)
    dynamic: Set[PredId] = field(default_factory=set)  # defined even without clauses

    def add(self, clause: Clause) -> None:
        self.clauses.append(clause)

    def extend(self, clauses: Iterable[Clause]) -> None:
        self.clauses.extend(clauses)

    def table(self, name: str, arity: int, mode: Mode = Mode.VARIANT) -> None:
        self.tabled[(name, arity)] = mode

    def predicates(self) -> set:
        return {c.pred for c in self.clauses} | set(self.tabled) | self.dynamic

    def clauses_for(self, pred: PredId) -> List[Clause]:
        return [c for c in self.clauses if c.pred == pred]

    def with_mode(self, mode: Optional[Mode]) -> "Program":
        """Copy with every tabled predicate switched to ``mode``."""
        if mode is None:
            return self
        return Program(list(self.clauses), {p: mode for p in self.tabled}, set(self.dynamic))

    def __str__(self) -> str:
        lines = [f":- table {n}/{a} as {m.value}." for (n, a), m in self.tabled.items()]
        lines += [f":- dynamic {n}/{a}." for n, a in sorted(self.dynamic)]
        lines += [str(c) for c in self.clauses]
        return "\n".join(lines) + ("\n" if lines else "")

