"""The seven context builders and the budgeted input composer.

Serialized input layout::

    <incomplete method> <CTX:kind1> <block 1 text> <CTX:kind2> <block 2 text> ...

Empty blocks are skipped.  When the whole input exceeds the budget, tokens
are cut from the end of the context part; the method is never truncated.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .callgraph import CallGraph, neighbors
from .codemodel import DEFAULT_COUNTER, MethodRecord, TokenCounter, code_tokens, invoked_names, preprocess_terms
from .dataset import MaskedInstance
from .errors import MethodOverBudget
from .mining.records import CommitRecord, IssueRecord
from .similarity import RetrievalIndex, TrivialNGramSet

METHOD_CALLS = "method_calls"
CLASS_SIGNATURES = "class_signatures"
MOST_SIMILAR_METHOD = "most_similar_method"
ISSUE_TITLE = "issue_title"
ISSUE_BODY = "issue_body"
DEV_SIMILAR_STATEMENTS = "dev_similar_statements"
DEV_FREQUENT_INVOCATIONS = "dev_frequent_invocations"

# coding, then process, then developer context
CONTEXT_KINDS = (
    METHOD_CALLS,
    CLASS_SIGNATURES,
    MOST_SIMILAR_METHOD,
    ISSUE_TITLE,
    ISSUE_BODY,
    DEV_SIMILAR_STATEMENTS,
    DEV_FREQUENT_INVOCATIONS,
)


def tag(kind: str) -> str:
    return f"<CTX:{kind}>"


@dataclass(frozen=True)
class ContextBlock:
    kind: str
    text: str
    token_count: int

    @classmethod
    def make(cls, kind: str, text: str, counter: TokenCounter = DEFAULT_COUNTER) -> ContextBlock:
        if kind not in CONTEXT_KINDS:
            raise ValueError(f"unknown context kind {kind!r}")
        return cls(kind, text, counter.count(text))


@dataclass(frozen=True)
class SerializedInput:
    text: str
    truncated_tokens: int
    context_kinds: tuple[str, ...] = ()


def build_method_calls_context(
    inst: MaskedInstance, graph: CallGraph, counter: TokenCounter = DEFAULT_COUNTER
) -> ContextBlock:
    callees, callers = neighbors(graph, inst.method_id, inst.masked_indices)
    parts = [f"<OUT> {s}" for s in callees] + [f"<IN> {s}" for s in callers]
    return ContextBlock.make(METHOD_CALLS, " ".join(parts), counter)


def build_class_signatures_context(
    inst: MaskedInstance, corpus: Iterable[MethodRecord], counter: TokenCounter = DEFAULT_COUNTER
) -> ContextBlock:
    """Signatures of the other methods of the instance's class, in declaration order."""
    own = None
    siblings = []
    for m in corpus:
        if m.id == inst.method_id:
            own = m
        siblings.append(m)
    if own is None:
        return ContextBlock.make(CLASS_SIGNATURES, "", counter)
    same = [
        m for m in siblings
        if m.id != own.id and m.repo == own.repo and m.file_path == own.file_path and m.class_name == own.class_name
    ]
    same.sort(key=lambda m: m.ordinal)
    return ContextBlock.make(CLASS_SIGNATURES, " ".join(m.signature for m in same), counter)


def build_most_similar_method_context(
    inst: MaskedInstance,
    training_pool: RetrievalIndex | Sequence[MethodRecord],
    trivial: TrivialNGramSet,
    k: int = 20,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> ContextBlock:
    """Full text of the training method most similar to the incomplete method.

    The query is the incomplete method without its masked statements; the
    instance's own method is never returned.
    """
    index = training_pool if isinstance(training_pool, RetrievalIndex) else RetrievalIndex(training_pool)
    hit = index.query(code_tokens(inst.unmasked_text), trivial, k, exclude=(inst.method_id,))
    return ContextBlock.make(MOST_SIMILAR_METHOD, hit.method.text, counter)


def build_issue_context(
    inst: MaskedInstance, ranked: Sequence[IssueRecord], part: str, counter: TokenCounter = DEFAULT_COUNTER
) -> ContextBlock:
    if part not in ("title", "body"):
        raise ValueError(f"issue part must be 'title' or 'body', got {part!r}")
    kind = ISSUE_TITLE if part == "title" else ISSUE_BODY
    if not ranked:
        return ContextBlock.make(kind, "", counter)
    top = ranked[0]
    return ContextBlock.make(kind, (top.title if part == "title" else top.body).strip(), counter)


def rank_dev_statements(
    inst: MaskedInstance, history: Sequence[CommitRecord], top_n: int = 10
) -> list[tuple[float, str]]:
    """Top diff lines by term overlap with the incomplete method: (score, line) pairs.

    Ties go to the more recent commit, then to the earlier line in its diff.
    Lines without any term are not candidates.
    """
    method_terms = set(preprocess_terms(inst.unmasked_text))
    scored = []
    for recency, commit in enumerate(history):
        for pos, line in enumerate(commit.diff):
            terms = set(preprocess_terms(line.text))
            if not terms:
                continue
            score = len(terms & method_terms) / len(terms)
            scored.append((-score, recency, pos, line.text.strip()))
    scored.sort(key=lambda x: x[:3])
    return [(-s, text) for s, _, _, text in scored[:top_n]]


def build_dev_statements_context(
    inst: MaskedInstance,
    history: Sequence[CommitRecord],
    top_n: int = 10,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> ContextBlock:
    ranked = rank_dev_statements(inst, history, top_n)
    return ContextBlock.make(DEV_SIMILAR_STATEMENTS, " <S> ".join(t for _, t in ranked), counter)


def frequent_invocations(history: Sequence[CommitRecord], top_n: int = 100) -> list[str]:
    counts: Counter[str] = Counter()
    first: dict[str, int] = {}
    for commit in history:
        for line in commit.diff:
            for name in invoked_names(line.text):
                counts[name] += 1
                first.setdefault(name, len(first))
    ordered = sorted(counts, key=lambda n: (-counts[n], first[n]))
    return ordered[:top_n]


def build_dev_invocations_context(
    inst: MaskedInstance,
    history: Sequence[CommitRecord],
    top_n: int = 100,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> ContextBlock:
    return ContextBlock.make(DEV_FREQUENT_INVOCATIONS, " ".join(frequent_invocations(history, top_n)), counter)


def compose_input(
    inst: MaskedInstance | str,
    blocks: Sequence[ContextBlock],
    budget: int = 1024,
    method_budget: int = 682,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> SerializedInput:
    """Incomplete method followed by tagged context blocks, cut to ``budget`` tokens."""
    im_text = inst if isinstance(inst, str) else inst.im_text
    m = counter.count(im_text)
    if m > method_budget:
        raise MethodOverBudget(f"method uses {m} tokens, budget is {method_budget}")
    used = [b for b in blocks if b.text]
    suffix = "".join(f" {tag(b.kind)} {b.text}" for b in used)
    room = max(budget - m, 0)
    c = counter.count(suffix)
    truncated = 0
    if c > room:
        suffix = counter.truncate(suffix, room)
        truncated = c - counter.count(suffix)
    return SerializedInput(im_text + suffix, truncated, tuple(b.kind for b in used))
