import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROPERTY, term_tuples
from retrotab.term import canonical_tuple, rename, unify_into, var
from retrotab.trie import (Trie, TrieError, check_insert, check_tokens, collect_relevant_answers,
                           count_nodes, detokenize, subterm_ends, tokenize)

FX1 = (("f", "x"), 1)
TEN = (10, "[]")
FY1 = (("f", "y"), 1)


def three_answer_trie() -> Trie:
    t = Trie()
    for a in (FX1, TEN, FY1):
        check_insert(t, tokenize(a))
    return t


def test_tokenize_preorder_with_canonical_vars():
    toks = tokenize([("f", var(5)), ("g", 1, var(5)), var(7)])
    assert toks == [("f", 1), var(0), ("g", 2), 1, var(0), var(1)]


def test_detokenize_inverts_tokenize():
    tup = (("f", ("g", 1, "a")), "[]", ("h", var(0)))
    assert detokenize(tokenize(tup)) == tup


def test_check_tokens_rejects_underflow():
    with pytest.raises(TrieError):
        check_tokens([("f", 2), 1])
    assert check_tokens([("f", 1), 1, 2]) == 2


def test_subterm_ends():
    assert subterm_ends([("f", 2), 1, ("g", 1), 2, 3]) == [4, 2, 4, 4, 5]


def test_three_insertions_timestamps():
    t = Trie()
    stamps = []
    for a in (FX1, TEN, FY1):
        leaf, new = t.check_insert(tokenize(a))
        assert new
        stamps.append(t.ts)
    assert stamps == [1, 2, 3]
    assert t.dump().splitlines() == [
        "root @3",
        "  f/1 @3",
        "    x @1",
        "      1 @1",
        "    y @3",
        "      1 @3",
        "  10 @2",
        "    [] @2",
    ]


def test_three_answer_node_count():
    # one node per token below the root
    assert count_nodes(three_answer_trie()) == 7


def test_repeat_insert_is_not_new():
    t = three_answer_trie()
    leaf, new = t.check_insert(tokenize(FX1))
    assert not new and leaf.ts == 1 and t.ts == 3


def test_width_mismatch_rejected():
    t = three_answer_trie()
    with pytest.raises(TrieError):
        t.check_insert(tokenize((1, 2, 3)))


def test_retrieval_example():
    t = three_answer_trie()
    got = collect_relevant_answers(t, (var(0), 1), 1)
    assert [leaf.decode() for leaf in got] == [FY1]


def test_retrieval_everything_and_nothing():
    t = three_answer_trie()
    assert [x.decode() for x in t.collect_relevant_answers((var(0), var(1)), 0)] == [FX1, TEN, FY1]
    assert t.collect_relevant_answers((var(0), var(1)), 3) == []
    assert t.collect_relevant_answers((var(0), var(0)), 0) == []


def test_nonground_answers_are_checked_by_unification():
    t = Trie()
    t.check_insert(tokenize((var(0), var(0))))
    t.check_insert(tokenize((1, 2)))
    got = [x.decode() for x in t.collect_relevant_answers((1, var(0)), 0)]
    assert got == [(var(0), var(0)), (1, 2)]
    got = [x.decode() for x in t.collect_relevant_answers((1, 1), 0)]
    assert got == [(var(0), var(0))]


def test_nonlinear_template_rejects_cyclic_match():
    t = Trie()
    t.check_insert(tokenize((var(0), ("f", var(0)))))
    assert t.collect_relevant_answers((var(0), var(0)), 0) == []


def test_untimestamped_trie_only_counts():
    t = Trie(timestamped=False)
    t.check_insert(tokenize((1, 2)))
    leaf, _ = t.check_insert(tokenize((1, 3)))
    assert t.ts == 2 and leaf.ts == 2 and leaf.parent.ts == 0


def test_fanout_promotion_keeps_lookups():
    t = Trie(fanout=2)
    for i in range(10):
        t.check_insert(tokenize((i, "a")))
    assert type(t.root.children) is not list
    for i in range(10):
        assert t.lookup(tokenize((i, "a"))) is not None
    got = t.collect_relevant_answers((var(0), "a"), 7)
    assert [x.decode()[0] for x in got] == [7, 8, 9]


def test_subscribers_fire_on_prefix():
    t = Trie()
    t.subscribe((1,), "one")
    t.subscribe((), "all")
    t.check_insert(tokenize((1, 2)))
    t.check_insert(tokenize((2, 2)))
    assert sorted(t.fired) == ["all", "all", "one"]


# -- properties ----------------------------------------------------------------------


def _brute_force(inserted, template, after):
    out = []
    for ts, tup in inserted:
        m: dict = {}
        renamed = tuple(rename(x, m) for x in tup)
        if ts > after and unify_into(("t",) + tuple(template), ("t",) + renamed, {}, True):
            out.append(tup)
    return out


@PROPERTY
@given(st.lists(term_tuples(2, max_leaves=3), max_size=25), st.sampled_from([2, 3, 8]))
def test_timestamp_invariants(tuples, fanout):
    t = Trie(fanout=fanout)
    seen = {}
    for tup in tuples:
        c = canonical_tuple(tup)[0]
        leaf, new = t.check_insert(tokenize(c))
        assert new == (c not in seen)
        if new:
            seen[c] = t.ts
        assert leaf.ts == seen[c]
        assert leaf.decode() == c
    assert t.ts == len(seen) == t.count
    nodes = list(t.iter_nodes())
    assert len(nodes) == t.count_nodes()

    def check(node):
        kids = node.child_nodes()
        if not kids:
            return node.ts
        top = max(check(k) for k in kids)
        assert node.ts == top
        return top

    if seen:
        assert check(t.root) == t.ts


@PROPERTY
@given(st.lists(term_tuples(2, max_leaves=3), max_size=25), term_tuples(2, max_leaves=3),
       st.integers(0, 25), st.sampled_from([2, 8]))
def test_collect_matches_brute_force(tuples, template, after, fanout):
    t = Trie(fanout=fanout)
    inserted = []
    for tup in tuples:
        c = canonical_tuple(tup)[0]
        leaf, new = t.check_insert(tokenize(c))
        if new:
            inserted.append((t.ts, c))
    got = [x.decode() for x in t.collect_relevant_answers(template, after)]
    assert got == _brute_force(inserted, template, after)


def test_empty_tuple_lives_at_root():
    t = Trie()
    leaf, new = t.check_insert([])
    assert new and leaf is t.root and t.ts == 1 and t.count_nodes() == 0
    assert t.check_insert([]) == (t.root, False)
    assert [x.decode() for x in t.collect_relevant_answers((), 0)] == [()]
    assert t.leaves() == [t.root] and t.lookup([]) is t.root
    with pytest.raises(TrieError):
        t.check_insert(tokenize((1,)))
