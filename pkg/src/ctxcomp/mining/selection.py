"""Repository filters and production-file sampling."""

from __future__ import annotations

import os
import random
from collections.abc import Iterable
from pathlib import Path, PurePosixPath

from .records import RepoMeta


def select_repositories(
    candidates: Iterable[RepoMeta],
    min_commits: int = 100,
    min_contributors: int = 10,
    min_issues: int = 50,
    min_stars: int = 10,
) -> list[RepoMeta]:
    """Keep repositories with more than ``min_commits`` commits and at least the other minima."""
    return [
        r
        for r in candidates
        if r.commits > min_commits
        and r.contributors >= min_contributors
        and r.issues >= min_issues
        and r.stars >= min_stars
    ]


def is_test_path(path: str) -> bool:
    """True when the file name or any directory segment mentions "test"."""
    return any("test" in part.lower() for part in PurePosixPath(path).parts)


def sample_paths(paths: Iterable[str], cap: int = 1000, seed: int = 0, suffix: str = ".java") -> list[str]:
    """Uniform sample (without replacement) of non-test source files, sorted."""
    eligible = sorted(p for p in set(paths) if p.endswith(suffix) and not is_test_path(p))
    if len(eligible) <= cap:
        return eligible
    return sorted(random.Random(seed).sample(eligible, cap))


def sample_files(repo_root: str | Path, cap: int = 1000, seed: int = 0) -> list[Path]:
    """Sample Java files from a checked-out snapshot at ``repo_root``."""
    root = Path(repo_root)
    if not root.is_dir():
        raise OSError(f"cannot read repository snapshot {root}")
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d != ".git")
        for name in filenames:
            rel = (Path(dirpath) / name).relative_to(root)
            found.append(rel.as_posix())
    return [root / p for p in sample_paths(found, cap, seed)]
