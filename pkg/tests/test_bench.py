import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retrotab.bench import (DESK_DATASETS, KINDS, VARIANTS, BenchmarkFailure, ConfigError,
                            DatasetSpec, OracleInapplicable, StatsRecord, analytic_answers,
                            build_program, edge_pairs, gen_dataset, golden_csv, program_variant,
                            run_benchmark, run_desk, seminaive_solve)
from retrotab.program import Clause, Mode
from retrotab.syntax import parse_program, parse_term
from retrotab.term import var

GOLDEN = Path(__file__).parent / "golden" / "desk_counts.csv"


def closure_size(pairs) -> int:
    """Transitive closure size by per-node graph search."""
    succ: dict = {}
    for a, b in pairs:
        succ.setdefault(a, []).append(b)
    total = 0
    for start in succ:
        seen: set = set()
        todo = list(succ[start])
        while todo:
            x = todo.pop()
            if x not in seen:
                seen.add(x)
                todo.extend(succ.get(x, ()))
        total += len(seen)
    return total


def test_chain_edges_are_wrapped():
    assert [str(c) for c in gen_dataset(DatasetSpec("chain", 3))] == [
        "edge(f(1),f(2)).", "edge(f(2),f(3))."]
    assert [str(c) for c in gen_dataset(DatasetSpec("chain", 2, wrap=False))] == ["edge(1,2)."]


def test_small_shapes():
    assert edge_pairs(DatasetSpec("chain", 1)) == []
    assert edge_pairs(DatasetSpec("cycle", 3)) == [(1, 2), (2, 3), (3, 1)]
    assert edge_pairs(DatasetSpec("cycle", 1)) == [(1, 1)]
    assert sorted(edge_pairs(DatasetSpec("grid", 2))) == [
        (1, 2), (1, 3), (2, 1), (2, 4), (3, 1), (3, 4), (4, 2), (4, 3)]
    assert edge_pairs(DatasetSpec("pyramid", 2)) == [(1, 2), (1, 3)]
    assert edge_pairs(DatasetSpec("tree", 5)) == [(1, 2), (1, 3), (2, 4), (2, 5)]


@pytest.mark.parametrize("kind,n", [("chain", 0), ("chain", -1), ("ring", 3), ("grid", "4")])
def test_bad_dataset_rejected(kind, n):
    with pytest.raises(ConfigError):
        DatasetSpec(kind, n)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_analytic_counts_match_graph_search(kind, n):
    spec = DatasetSpec(kind, n)
    assert analytic_answers(spec) == closure_size(edge_pairs(spec))


def test_desk_sizes():
    sizes = {k: analytic_answers(DatasetSpec(k, n)) for k, n in DESK_DATASETS}
    assert sizes == {"chain": 2016, "cycle": 4096, "grid": 4096, "pyramid": 3740, "tree": 1538}


def test_variant_names_and_aliases():
    for v in VARIANTS:
        prog = program_variant(v, Mode.VARIANT)
        assert prog.tabled == {("path", 2): Mode.VARIANT}
        assert prog.dynamic == {("edge", 2)}
        assert len(prog.clauses) == 2
    left = program_variant("path_left_first")
    assert str(left.clauses[0]) == "path(f(X),f(Z)) :- path(f(X),f(Y)), edge(f(Y),f(Z))."
    assert str(program_variant("left_last").clauses[1]).startswith("path(f(X),f(Z)) :- path(")
    assert str(program_variant("right").clauses[0]).endswith("edge(f(X),f(Y)), path(f(Y),f(Z)).")
    assert str(program_variant("double_first").clauses[0]).endswith(
        "path(f(X),f(Y)), path(f(Y),f(Z)).")
    with pytest.raises(ConfigError):
        program_variant("middle")


def test_oracle_on_known_closures():
    spec = DatasetSpec("chain", 8)
    prog = build_program("left", spec)
    assert len(seminaive_solve(prog, parse_term("path(f(X),f(Y))"))) == 28
    prog = build_program("right", DatasetSpec("cycle", 8))
    assert len(seminaive_solve(prog, parse_term("path(f(X),f(Y))"))) == 64
    assert seminaive_solve(build_program("double", DatasetSpec("chain", 1)),
                           parse_term("path(X,Y)")) == set()


def test_oracle_binds_query_constants():
    prog = build_program("left", DatasetSpec("chain", 4))
    got = seminaive_solve(prog, ("path", ("f", 2), var(0)))
    assert got == {(("f", 2), ("f", 3)), (("f", 2), ("f", 4))}


def test_oracle_inapplicable_programs():
    with pytest.raises(OracleInapplicable):
        seminaive_solve(parse_program("p(X)."), parse_term("p(Y)"))
    with pytest.raises(OracleInapplicable):
        seminaive_solve(parse_program("p(X) :- q(Y). q(1)."), parse_term("p(Y)"))
    with pytest.raises(OracleInapplicable):
        seminaive_solve(parse_program("n(0). n(s(X)) :- n(X)."), parse_term("n(Y)"),
                        depth_bound=10)


def test_run_benchmark_record():
    rec = run_benchmark("left", DatasetSpec("chain", 8), Mode.RETROACTIVE, oracle=True)
    assert (rec.program, rec.dataset, rec.mode, rec.answers, rec.oracle) == (
        "left_first", "chain(8)", "retroactive", 28, True)
    assert rec.generators == 1 and rec.consumers == 1
    d = json.loads(rec.to_json())
    assert list(d) == ["program", "dataset", "mode", "answers", "answer_trie_nodes",
                       "subgoal_trie_nodes", "generators", "consumers", "loaders",
                       "conversions", "elapsed_ms", "oracle"]


def test_empty_dataset_runs():
    for m in Mode:
        rec = run_benchmark("double_last", DatasetSpec("chain", 1), m, oracle=True)
        assert rec.answers == 0


def test_failure_is_reported(monkeypatch):
    import retrotab.bench as bench
    monkeypatch.setattr(bench, "analytic_answers", lambda spec: -1)
    with pytest.raises(BenchmarkFailure, match="expected -1"):
        run_benchmark("left", DatasetSpec("chain", 3))


def test_stats_record_defaults():
    rec = StatsRecord("p", "chain(2)", "variant", 1, 2, 3, 1, 0)
    assert json.loads(rec.to_json())["oracle"] is None


def test_desk_counts_match_golden_file():
    assert golden_csv(run_desk(oracle=False)) == GOLDEN.read_text()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS), st.integers(1, 7), st.sampled_from(VARIANTS),
       st.sampled_from(list(Mode)), st.booleans())
def test_small_benchmarks_agree_with_oracle(kind, n, variant, mode, wrap):
    rec = run_benchmark(variant, DatasetSpec(kind, n, wrap), mode, oracle=True)
    assert rec.oracle and rec.answers == analytic_answers(DatasetSpec(kind, n))


def test_unwrapped_program_matches_plain_edges():
    prog = build_program("double", DatasetSpec("chain", 4, wrap=False), Mode.SUBSUMPTIVE)
    assert str(prog.clauses[0]) == "path(X,Z) :- path(X,Y), path(Y,Z)."
    prog.add(Clause(("edge", 4, 1)))
    assert len(seminaive_solve(prog, parse_term("path(X,Y)"))) == 16
