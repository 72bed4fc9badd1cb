"""Issue ranking with pluggable scoring backends, and MRR evaluation."""

from __future__ import annotations

import json
import math
import shlex
import subprocess
import threading
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime
from typing import Protocol, runtime_checkable

import numpy as np

from .codemodel import preprocess_terms
from .dataset import MaskedInstance
from .errors import CtxError, RelevantMissing
from .mining.issues import link_commit_to_issue, open_issues_at
from .mining.records import CommitRecord, IssueRecord


@runtime_checkable
class RankerBackend(Protocol):
    """Scores a query against a batch of issues; higher is more relevant.

    Scoring takes the whole candidate set at once because corpus statistics
    (idf, embedding normalisation) depend on it.
    """

    name: str
    thread_safe: bool

    def scores(self, query_terms: Sequence[str], issue_terms: Sequence[Sequence[str]]) -> list[float]: ...


class TfidfBackend:
    """Cosine of raw-tf x ln(N/df) vectors, with idf taken over the candidate issues."""

    name = "tfidf"
    thread_safe = True

    def scores(self, query_terms, issue_terms):
        n = len(issue_terms)
        if n == 0:
            return []
        tfs = [Counter(t) for t in issue_terms]
        df: Counter[str] = Counter()
        for tf in tfs:
            df.update(tf.keys())
        idf = {term: math.log(n / d) for term, d in df.items()}
        q = {term: c * idf[term] for term, c in Counter(query_terms).items() if term in idf}
        qn = math.sqrt(sum(v * v for v in q.values()))
        out = []
        for tf in tfs:
            vec = {term: c * idf[term] for term, c in tf.items()}
            vn = math.sqrt(sum(v * v for v in vec.values()))
            if qn == 0 or vn == 0:
                out.append(0.0)
                continue
            dot = sum(w * vec.get(term, 0.0) for term, w in q.items())
            out.append(dot / (qn * vn))
        return out


class ExternalBackend:
    """Delegates scoring to a child process speaking line-delimited JSON.

    Request: ``{"query_terms": [...], "issue_terms": [[...], ...]}``;
    response: ``{"scores": [...]}``.  Calls are serialised over one pipe.
    """

    thread_safe = True

    def __init__(self, command: Sequence[str], name: str = "external"):
        self.name = name
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lock = threading.Lock()

    def scores(self, query_terms, issue_terms):
        request = {"query_terms": list(query_terms), "issue_terms": [list(t) for t in issue_terms]}
        with self._lock:
            if self._proc.poll() is not None:
                raise CtxError(f"ranker process exited with {self._proc.returncode}")
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        if not line:
            raise CtxError("ranker process closed its output")
        scores = json.loads(line).get("scores")
        if not isinstance(scores, list) or len(scores) != len(issue_terms):
            raise CtxError(f"ranker returned {scores!r} for {len(issue_terms)} issues")
        return [float(s) for s in scores]

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def make_backend(spec: str | Sequence[str] | None) -> RankerBackend:
    """``None``/``"tfidf"`` for the default, otherwise a command line for :class:`ExternalBackend`."""
    if spec is None or spec == "tfidf":
        return TfidfBackend()
    if isinstance(spec, str):
        spec = shlex.split(spec)
    return ExternalBackend(spec)


def issue_terms(issue: IssueRecord) -> list[str]:
    return preprocess_terms(issue.title + " " + issue.body)


def rank_issues(
    inst: MaskedInstance | str,
    open_issues: Sequence[IssueRecord],
    backend: RankerBackend | None = None,
) -> list[IssueRecord]:
    """Open issues by descending relevance to the incomplete method; ties by ascending id."""
    if not open_issues:
        return []
    backend = backend or TfidfBackend()
    text = inst if isinstance(inst, str) else inst.unmasked_text
    scores = backend.scores(preprocess_terms(text), [issue_terms(i) for i in open_issues])
    order = sorted(range(len(open_issues)), key=lambda k: (-scores[k], open_issues[k].id))
    return [open_issues[k] for k in order]


@dataclass(frozen=True)
class LinkedPair:
    instance_id: str
    issue_id: int
    t: datetime


def build_linked_pairs(
    instances: Iterable[MaskedInstance],
    issues: Sequence[IssueRecord],
    commits: Mapping[str, CommitRecord],
) -> list[LinkedPair]:
    """Instances whose last-change commit message references an issue open at t."""
    pairs = []
    for inst in instances:
        commit = commits.get(inst.commit_sha)
        if commit is None:
            continue
        issue_id = link_commit_to_issue(commit.message, open_issues_at(issues, inst.t))
        if issue_id is not None:
            pairs.append(LinkedPair(inst.instance_id, issue_id, inst.t))
    return pairs


def mean_reciprocal_rank(rankings: Iterable[tuple[Sequence, object]]) -> float:
    total = 0.0
    n = 0
    for ranked, relevant in rankings:
        ranked = list(ranked)
        if relevant not in ranked:
            raise RelevantMissing(f"relevant item {relevant!r} not in its ranking")
        total += 1.0 / (ranked.index(relevant) + 1)
        n += 1
    if n == 0:
        raise ValueError("mean reciprocal rank of zero queries")
    return total / n


def random_baseline_mrr(list_lengths: Sequence[int], trials: int = 10_000, seed: int = 0) -> float:
    """Monte-Carlo MRR when the relevant item sits at a uniformly random rank."""
    lengths = np.asarray(list(list_lengths), dtype=np.int64)
    if lengths.size == 0 or (lengths < 1).any():
        raise ValueError("list lengths must be >= 1")
    rng = np.random.default_rng(seed)
    ranks = rng.integers(1, lengths + 1, size=(trials, lengths.size))
    return float((1.0 / ranks).mean())


def ranking_mrr(
    pairs: Sequence[LinkedPair],
    instances: Mapping[str, MaskedInstance],
    issues: Sequence[IssueRecord],
    backend: RankerBackend | None = None,
) -> tuple[float, float]:
    """MRR of the backend on linked pairs, and the random-ranking baseline on the same lists."""
    rankings = []
    lengths = []
    for p in pairs:
        candidates = open_issues_at(issues, p.t)
        ranked = rank_issues(instances[p.instance_id], candidates, backend)
        rankings.append(([i.id for i in ranked], p.issue_id))
        lengths.append(len(candidates))
    if not rankings:
        raise ValueError("no linked pairs to evaluate")
    return mean_reciprocal_rank(rankings), random_baseline_mrr(lengths)
