from __future__ import annotations

from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxcomp.callgraph import build_call_graph
from ctxcomp.codemodel import DEFAULT_COUNTER, code_tokens, count_budget_tokens, extract_methods
from ctxcomp.contexts import (
    CLASS_SIGNATURES,
    CONTEXT_KINDS,
    METHOD_CALLS,
    MOST_SIMILAR_METHOD,
    ContextBlock,
    build_class_signatures_context,
    build_dev_invocations_context,
    build_dev_statements_context,
    build_issue_context,
    build_method_calls_context,
    build_most_similar_method_context,
    compose_input,
    rank_dev_statements,
    tag,
)
from ctxcomp.dataset import MARKER, mask_method
from ctxcomp.errors import EmptyPool, MethodOverBudget
from ctxcomp.mining import CommitRecord, DiffLine, IssueRecord
from ctxcomp.similarity import TrivialNGramSet, crystal_bleu, jaccard
from test_similarity import random_pool

T = datetime(2021, 1, 1, tzinfo=timezone.utc)
EMPTY = TrivialNGramSet.empty()

SRC = """
class A {
    int a(int x) {
        int y = x + 1;
        int z = b(y);
        return z;
    }
    int b(int v) {
        return v * 2;
    }
    void c() {
        int r = a(3);
        helper();
    }
    void helper() { }
}
class Lonely {
    void only() { int q = 0; }
}
"""


@pytest.fixture()
def methods():
    return extract_methods(SRC, "A.java", repo="r")


def named(methods, name):
    (m,) = [m for m in methods if m.name == name]
    return m


def instance_for(method, indices):
    (inst,) = [i for i in mask_method(method, indices, "sha", T, "Dev <d@x>") if set(i.masked_indices) == set(indices)]
    return inst


def commit(lines, k=0):
    return CommitRecord(f"c{k}", "Dev <d@x>", T, "m", tuple(DiffLine("added", t, "F.java") for t in lines), k)


# -- coding context ------------------------------------------------------------


def test_method_calls_format(methods):
    g = build_call_graph(methods)
    inst = instance_for(named(methods, "a"), [0])
    block = build_method_calls_context(inst, g)
    assert block.text == "<OUT> int b(int v) <IN> void c()"
    assert block.kind == METHOD_CALLS
    assert block.token_count == count_budget_tokens(block.text)


def test_masked_call_site_not_listed(methods):
    g = build_call_graph(methods)
    inst = instance_for(named(methods, "a"), [1])
    assert build_method_calls_context(inst, g).text == "<IN> void c()"


def test_isolated_method_gives_empty_block(methods):
    g = build_call_graph(methods)
    inst = instance_for(named(methods, "only"), [0])
    assert build_method_calls_context(inst, g).text == ""


def test_class_signatures_exclude_self(methods):
    inst = instance_for(named(methods, "a"), [0])
    block = build_class_signatures_context(inst, methods)
    assert block.kind == CLASS_SIGNATURES
    assert block.text == "int b(int v) void c() void helper()"
    lonely = instance_for(named(methods, "only"), [0])
    assert build_class_signatures_context(lonely, methods).text == ""


def test_most_similar_exact_duplicate():
    pool = random_pool(6, 21)
    target = pool[3]
    (src_copy,) = extract_methods("class Copy { " + target.text + " }", "Copy.java", repo="other")
    inst = mask_method(src_copy, [0], "s", T, "d")[0]
    block = build_most_similar_method_context(inst, pool, EMPTY)
    assert block.kind == MOST_SIMILAR_METHOD
    assert block.text == target.text


def test_most_similar_equals_two_stage_oracle():
    pool = random_pool(40, 22)
    queries = random_pool(15, 23)
    for q in queries:
        inst = mask_method(q, [1], "s", T, "d")[0]
        query = [t.text for t in code_tokens(inst.unmasked_text)]
        # stage one: top 20 by jaccard, earlier pool entries first on ties
        # the query's own method id (shared with a pool entry here) is never a candidate
        allowed = [i for i in range(len(pool)) if pool[i].id != inst.method_id]
        jac = sorted(allowed, key=lambda i: (-jaccard([t.text for t in code_tokens(pool[i].text)], query).value, i))
        shortlist = jac[:20]
        best = max(
            shortlist,
            key=lambda i: (
                crystal_bleu([t.text for t in code_tokens(pool[i].text)], query, EMPTY).value,
                jaccard([t.text for t in code_tokens(pool[i].text)], query).value,
                -i,
            ),
        )
        assert build_most_similar_method_context(inst, pool, EMPTY).text == pool[best].text


def test_most_similar_never_returns_outside_pool_or_self():
    pool = random_pool(10, 24)
    for m in pool:
        inst = mask_method(m, [0], "s", T, "d")[0]
        text = build_most_similar_method_context(inst, pool, EMPTY).text
        assert text in {p.text for p in pool if p.id != m.id}
    with pytest.raises(EmptyPool):
        build_most_similar_method_context(mask_method(pool[0], [0], "s", T, "d")[0], [], EMPTY)


# -- process context --------------------------------------------------------------


def test_issue_context(methods):
    inst = instance_for(named(methods, "a"), [0])
    ranked = [IssueRecord(1, "Fix NPE", "Stack trace here\n", T), IssueRecord(2, "Other", "x", T)]
    assert build_issue_context(inst, ranked, "title").text == "Fix NPE"
    assert build_issue_context(inst, ranked, "body").text == "Stack trace here"
    assert build_issue_context(inst, [], "title").text == ""
    with pytest.raises(ValueError):
        build_issue_context(inst, ranked, "labels")


# -- developer context --------------------------------------------------------------


def test_dev_statements_under_limit(methods):
    inst = instance_for(named(methods, "a"), [2])
    hist = [commit(["int y = x + 1;", "unrelated(q);", "return y;"])]
    ranked = rank_dev_statements(inst, hist)
    assert [t for _, t in ranked] == ["int y = x + 1;", "return y;", "unrelated(q);"]
    assert [s for s, _ in ranked] == [1.0, 1.0, 0.0]
    assert build_dev_statements_context(inst, hist).text == "int y = x + 1; <S> return y; <S> unrelated(q);"


def test_dev_statements_limit_and_identical_first(methods):
    inst = instance_for(named(methods, "a"), [2])
    lines = [f"foo{i}(bar{i});" for i in range(24)] + ["int z = b(y);"]
    hist = [commit(lines[:12], 0), commit(lines[12:], 1)]
    ranked = rank_dev_statements(inst, hist)
    assert len(ranked) == 10
    assert ranked[0] == (1.0, "int z = b(y);")
    assert build_dev_statements_context(inst, hist).text.count(" <S> ") == 9
    assert build_dev_statements_context(inst, []).text == ""


def test_dev_statement_ties_prefer_recent_commit(methods):
    inst = instance_for(named(methods, "a"), [2])
    hist = [commit(["return y;"], 0), commit(["int y;"], 1)]
    assert [t for _, t in rank_dev_statements(inst, hist)] == ["return y;", "int y;"]


words = st.sampled_from(["x", "y", "z", "b", "foo", "bar", "int", "return", "count"])


@settings(max_examples=100)
@given(st.lists(st.lists(st.lists(words, min_size=1, max_size=5).map(" ".join), max_size=6), max_size=4))
def test_dev_statement_scores_nonincreasing(commits):
    ms = extract_methods(SRC, "A.java", repo="r")
    inst = instance_for(named(ms, "a"), [0])
    hist = [commit(lines, k) for k, lines in enumerate(commits)]
    scores = [s for s, _ in rank_dev_statements(inst, hist)]
    assert scores == sorted(scores, reverse=True)
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_dev_invocations(methods):
    inst = instance_for(named(methods, "a"), [0])
    hist = [commit(["foo();", "x = foo() + bar();"], 0), commit(["foo(1);"], 1)]
    assert build_dev_invocations_context(inst, hist).text == "foo bar"
    assert build_dev_invocations_context(inst, [commit(["int x = 1;"])]).text == ""
    many = [commit([f"call{i}();" for i in range(150)])]
    names = build_dev_invocations_context(inst, many).text.split()
    assert names == [f"call{i}" for i in range(100)]


# -- composition ---------------------------------------------------------------------


def method_text(n_tokens):
    # the marker itself is four budget tokens
    return " ".join(["a"] * (n_tokens - 4)) + " " + MARKER


def block_with_suffix(kind, n_tokens):
    """A block whose tagged suffix is exactly ``n_tokens`` budget tokens."""
    tag_cost = DEFAULT_COUNTER.count(f" {tag(kind)} ")
    return ContextBlock.make(kind, " ".join(["w"] * (n_tokens - tag_cost)))


def test_truncation_example():
    im = method_text(550)
    assert count_budget_tokens(im) == 550
    block = block_with_suffix(METHOD_CALLS, 750)
    out = compose_input(im, [block])
    assert out.truncated_tokens == 276
    assert count_budget_tokens(out.text) == 1024
    assert out.text.startswith(im + " " + tag(METHOD_CALLS))


def test_no_truncation_under_budget():
    im = method_text(100)
    block = block_with_suffix(CLASS_SIGNATURES, 100)
    out = compose_input(im, [block])
    assert out.truncated_tokens == 0
    assert out.text == f"{im} {tag(CLASS_SIGNATURES)} {block.text}"
    assert out.context_kinds == (CLASS_SIGNATURES,)


def test_baseline_and_empty_blocks(methods):
    inst = instance_for(named(methods, "a"), [0])
    assert compose_input(inst, []).text == inst.im_text
    empty = ContextBlock.make(METHOD_CALLS, "")
    out = compose_input(inst, [empty])
    assert out.text == inst.im_text and out.context_kinds == ()


def test_method_over_budget():
    with pytest.raises(MethodOverBudget):
        compose_input(method_text(683), [])
    assert compose_input(method_text(682), []).truncated_tokens == 0


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        ContextBlock.make("weather", "sunny")
    assert len(CONTEXT_KINDS) == 7


@settings(max_examples=150, deadline=None)
@given(
    st.integers(4, 682),
    st.lists(st.tuples(st.sampled_from(CONTEXT_KINDS), st.integers(0, 600)), max_size=4),
)
def test_composition_properties(m, blocks):
    im = method_text(m) if m > 4 else MARKER
    bs = [ContextBlock.make(k, " ".join(["w"] * n)) for k, n in blocks]
    out = compose_input(im, bs)
    assert count_budget_tokens(out.text) <= 1024
    assert out.text.startswith(im)
    full = compose_input(im, bs, budget=10**6)
    assert full.truncated_tokens == 0
    assert out.truncated_tokens == count_budget_tokens(full.text) - count_budget_tokens(out.text)
    if out.truncated_tokens:
        assert count_budget_tokens(out.text) == 1024
        assert full.text.startswith(out.text)
