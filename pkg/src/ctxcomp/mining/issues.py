"""Issue-tracker exports and commit-to-issue links."""

from __future__ import annotations

import json
import re
from collections.abc import Iterable
from datetime import datetime
from pathlib import Path

from ..errors import SchemaError
from .records import IssueRecord

_REFERENCE = re.compile(r"(?:#|issues/)(\d+)\b")
_REQUIRED = ("id", "title", "body", "opened_at")


def load_issue_export(path: str | Path) -> list[IssueRecord]:
    """Read a JSON array of issues; malformed entries raise :class:`SchemaError`."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc.msg}", exc.lineno) from exc
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: expected a JSON array of issues")
    issues = []
    seen: set[int] = set()
    for pos, item in enumerate(raw):
        if not isinstance(item, dict) or any(k not in item for k in _REQUIRED):
            raise SchemaError(f"{path}: issue #{pos} lacks one of {_REQUIRED}")
        try:
            issue = IssueRecord.from_dict(item)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: issue #{pos}: {exc}") from exc
        if issue.closed_at is not None and issue.closed_at < issue.opened_at:
            raise SchemaError(f"{path}: issue {issue.id} closes before it opens")
        if issue.id in seen:
            raise SchemaError(f"{path}: duplicate issue id {issue.id}")
        seen.add(issue.id)
        issues.append(issue)
    return issues


def open_issues_at(issues: Iterable[IssueRecord], t: datetime) -> list[IssueRecord]:
    """Issues opened at or before ``t`` and not yet closed at ``t`` (closing is exclusive)."""
    return [i for i in issues if i.opened_at <= t and (i.closed_at is None or i.closed_at > t)]


def link_commit_to_issue(message: str, open_issues: Iterable[IssueRecord]) -> int | None:
    """Id of the first open issue referenced as ``#<id>`` or ``issues/<id>`` in ``message``."""
    ids = {i.id for i in open_issues}
    for m in _REFERENCE.finditer(message):
        n = int(m.group(1))
        if n in ids:
            return n
    return None
