"""Tabled evaluation of Horn programs with retroactive call subsumption."""

from .engine import Engine, EngineStats, EvaluationError, QueryResult, solve
from .program import Clause, Mode, Program
from .syntax import ParseError, parse_program, parse_query, parse_term
from .tablespace import State, SubgoalFrame, TableEntry, TableSpace
from .trie import Trie, TrieNode

__all__ = [
    "Clause", "Engine", "EngineStats", "EvaluationError", "Mode", "ParseError", "Program",
    "QueryResult", "State", "SubgoalFrame", "TableEntry", "TableSpace", "Trie", "TrieNode",
    "parse_program", "parse_query", "parse_term", "solve",
]

__version__ = "0.1.0"
