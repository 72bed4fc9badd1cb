"""Blame-based last change of a method and a developer's recent activity."""

from __future__ import annotations

from ..codemodel import MethodRecord
from ..errors import NoChangeFound
from .git import GitRepo
from .records import CommitRecord, ReleaseRef, identity_key


def statements_by_commit(method: MethodRecord, line_shas: list[str]) -> dict[str, set[int]]:
    """Group statement indices by the commits blame attributes their lines to."""
    touched: dict[str, set[int]] = {}
    for st in method.statements:
        lo, hi = st.line_span
        for line in range(lo, hi + 1):
            if 1 <= line <= len(line_shas):
                touched.setdefault(line_shas[line - 1], set()).add(st.index)
    return touched


def last_change_commit(
    method: MethodRecord, release: ReleaseRef, history: GitRepo
) -> tuple[CommitRecord, set[int]]:
    """Latest commit before the release date that changed the method, and its statements.

    "Latest" follows date-order traversal (topological, committer date as
    tie-break).  Raises :class:`NoChangeFound` when no attributed commit
    predates the release.
    """
    line_shas = history.blame(release.sha, method.file_path)
    touched = statements_by_commit(method, line_shas)
    candidates = [
        history.commit(sha) for sha in touched if history.commit(sha).timestamp < release.date
    ]
    if not candidates:
        raise NoChangeFound(f"{method.id}: no change before {release.tag}")
    best = min(candidates, key=lambda c: c.order)
    return best, touched[best.sha]


def developer_history(
    author: str, before: CommitRecord, history: GitRepo, limit: int = 10
) -> list[CommitRecord]:
    """Up to ``limit`` earlier commits by ``author`` touching Java files, newest first, with diffs."""
    key = identity_key(author)
    out: list[CommitRecord] = []
    for c in history.commits()[before.order + 1 :]:
        if len(out) >= limit:
            break
        if identity_key(c.author) != key or not history.touches_java(c.sha):
            continue
        out.append(
            CommitRecord(c.sha, c.author, c.timestamp, c.message, history.diff(c.sha), c.order)
        )
    return out
