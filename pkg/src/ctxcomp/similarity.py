"""Code similarity metrics and most-similar-method retrieval.

Retrieval is two-stage: a cheap token-set Jaccard prefilter keeps the top
``k`` pool entries, which are then re-ranked by CrystalBLEU, i.e. BLEU with
the corpus' most frequent ("trivially shared") n-grams ignored.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .codemodel import MethodRecord, Token, code_tokens, preprocess_terms
from .errors import EmptyCorpus, EmptyPool, EmptySequence

TokenSeq = Sequence[Union[Token, str]]
NGram = tuple[str, ...]


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    metric: str  # jaccard | crystalbleu | statement_overlap

    def __float__(self) -> float:
        return self.value


def _texts(tokens: TokenSeq) -> list[str]:
    return [t.text if isinstance(t, Token) else t for t in tokens]


def jaccard_sets(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def jaccard(a: TokenSeq, b: TokenSeq) -> SimilarityScore:
    return SimilarityScore(jaccard_sets(set(_texts(a)), set(_texts(b))), "jaccard")


# -- CrystalBLEU ------------------------------------------------------------


@dataclass(frozen=True)
class TrivialNGramSet:
    n_max: int
    k_trivial: int
    ngrams: frozenset[NGram]

    def __contains__(self, ngram: NGram) -> bool:
        return ngram in self.ngrams

    def __len__(self) -> int:
        return len(self.ngrams)

    @classmethod
    def empty(cls, n_max: int = 4) -> TrivialNGramSet:
        return cls(n_max, 0, frozenset())

    def dumps(self) -> str:
        lines = [f"#crystalbleu n_max={self.n_max} k_trivial={self.k_trivial}"]
        lines.extend(sorted(" ".join(_escape(t) for t in g) for g in self.ngrams))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> TrivialNGramSet:
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#crystalbleu "):
            raise ValueError("not a trivial n-gram file")
        params = dict(kv.split("=") for kv in lines[0].split()[1:])
        grams = frozenset(tuple(_unescape(t) for t in ln.split(" ")) for ln in lines[1:] if ln)
        return cls(int(params["n_max"]), int(params["k_trivial"]), grams)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> TrivialNGramSet:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


_ESCAPES = {"\\": "\\\\", " ": "\\s", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape(tok: str) -> str:
    out = "".join(_ESCAPES.get(ch, ch) for ch in tok)
    return "\\" + out if out.startswith("#") else out


def _unescape(tok: str) -> str:
    out = []
    i = 0
    rev = {"\\": "\\", "s": " ", "n": "\n", "r": "\r", "t": "\t", "#": "#"}
    while i < len(tok):
        if tok[i] == "\\" and i + 1 < len(tok):
            out.append(rev.get(tok[i + 1], tok[i + 1]))
            i += 2
        else:
            out.append(tok[i])
            i += 1
    return "".join(out)


def ngram_counts(seq: Sequence[str], n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def trivially_shared_ngrams(
    corpus: Iterable[TokenSeq], n_max: int = 4, k_trivial: int = 500
) -> TrivialNGramSet:
    """The ``k_trivial`` most frequent n-grams for every order 1..``n_max``.

    Frequency ties are broken lexicographically on the n-gram tuple.
    """
    per_order = [Counter() for _ in range(n_max)]
    empty = True
    for snippet in corpus:
        empty = False
        seq = _texts(snippet)
        for n in range(1, n_max + 1):
            per_order[n - 1].update(ngram_counts(seq, n))
    if empty:
        raise EmptyCorpus("cannot compute trivially shared n-grams of an empty corpus")
    chosen: set[NGram] = set()
    for counts in per_order:
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        chosen.update(g for g, _ in ranked[:k_trivial])
    return TrivialNGramSet(n_max, k_trivial, frozenset(chosen))


def crystal_bleu(
    candidate: TokenSeq, reference: TokenSeq, trivial: TrivialNGramSet
) -> SimilarityScore:
    """Sentence-level CrystalBLEU of ``candidate`` against ``reference``.

    Per order n, trivially shared n-grams are dropped from both sides before
    clipped matching.  An order with zero matches contributes
    ``1 / (total + 1)`` instead of zero; orders where the candidate has no
    countable n-grams left are left out of the geometric mean.  The brevity
    penalty uses the unfiltered lengths.
    """
    cand = _texts(candidate)
    ref = _texts(reference)
    if not cand or not ref:
        raise EmptySequence("crystal_bleu needs two non-empty token sequences")
    log_sum = 0.0
    orders = 0
    for n in range(1, trivial.n_max + 1):
        c_counts = ngram_counts(cand, n)
        r_counts = ngram_counts(ref, n)
        if trivial.ngrams:
            for g in [g for g in c_counts if g in trivial.ngrams]:
                del c_counts[g]
            for g in [g for g in r_counts if g in trivial.ngrams]:
                del r_counts[g]
        total = sum(c_counts.values())
        if total == 0:
            continue
        matches = sum((c_counts & r_counts).values())
        p = matches / total if matches else 1.0 / (total + 1)
        log_sum += math.log(p)
        orders += 1
    if orders == 0:
        return SimilarityScore(0.0, "crystalbleu")
    c, r = len(cand), len(ref)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    value = bp * math.exp(log_sum / orders)
    return SimilarityScore(min(1.0, max(0.0, value)), "crystalbleu")


# -- retrieval ----------------------------------------------------------------


@dataclass(frozen=True)
class RetrievalHit:
    method: MethodRecord
    jaccard: float
    crystal_bleu: float
    pool_index: int


class RetrievalIndex:
    """Pre-tokenised pool for repeated most-similar-method queries."""

    def __init__(self, pool: Sequence[MethodRecord]):
        if not pool:
            raise EmptyPool("retrieval pool is empty")
        self.pool = list(pool)
        self.tokens = [[t.text for t in code_tokens(m.text)] for m in self.pool]
        self.sets = [set(t) for t in self.tokens]

    def query(
        self,
        query_tokens: TokenSeq,
        trivial: TrivialNGramSet,
        k: int = 20,
        exclude: Iterable[str] = (),
    ) -> RetrievalHit:
        q = _texts(query_tokens)
        qset = set(q)
        excluded = set(exclude)
        scored = [
            (jaccard_sets(qset, s), i)
            for i, s in enumerate(self.sets)
            if self.pool[i].id not in excluded
        ]
        if not scored:
            raise EmptyPool("every pool entry is excluded for this query")
        # top-k by Jaccard; stable sort keeps pool order on ties
        scored.sort(key=lambda js: -js[0])
        best: tuple | None = None
        for jac, i in scored[:k]:
            cb = crystal_bleu(self.tokens[i], q, trivial).value if self.tokens[i] and q else 0.0
            key = (cb, jac, -i)
            if best is None or key > best[0]:
                best = (key, i)
        (cb, jac, _), i = best
        return RetrievalHit(self.pool[i], jac, cb, i)


def retrieve_most_similar(
    query: TokenSeq,
    pool: Sequence[MethodRecord],
    k: int = 20,
    trivial: TrivialNGramSet | None = None,
) -> MethodRecord:
    """Most similar pool method to ``query`` (tokens with masked statements removed)."""
    trivial = trivial or TrivialNGramSet.empty()
    return RetrievalIndex(pool).query(query, trivial, k).method


def statement_overlap(statement: TokenSeq | str, method: TokenSeq | str) -> SimilarityScore:
    """Share of the statement's terms that also occur in the method."""
    s_terms = set(_terms(statement))
    if not s_terms:
        return SimilarityScore(0.0, "statement_overlap")
    m_terms = set(_terms(method))
    return SimilarityScore(len(s_terms & m_terms) / len(s_terms), "statement_overlap")


def _terms(x: TokenSeq | str) -> list[str]:
    if isinstance(x, str):
        return preprocess_terms(x)
    return preprocess_terms(" ".join(_texts(x)))
