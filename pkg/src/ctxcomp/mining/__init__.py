"""Commit history, blame attribution, developer activity and issue data."""

from .git import GitRepo
from .history import developer_history, last_change_commit, statements_by_commit
from .issues import link_commit_to_issue, load_issue_export, open_issues_at
from .records import (
    CommitRecord,
    DiffLine,
    IssueRecord,
    ReleaseRef,
    RepoMeta,
    format_instant,
    identity_key,
    parse_instant,
)
from .selection import is_test_path, sample_files, sample_paths, select_repositories

__all__ = [
    "CommitRecord",
    "DiffLine",
    "GitRepo",
    "IssueRecord",
    "ReleaseRef",
    "RepoMeta",
    "developer_history",
    "format_instant",
    "identity_key",
    "is_test_path",
    "last_change_commit",
    "link_commit_to_issue",
    "load_issue_export",
    "open_issues_at",
    "parse_instant",
    "sample_files",
    "sample_paths",
    "select_repositories",
    "statements_by_commit",
]
