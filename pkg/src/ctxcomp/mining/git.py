"""Thin wrapper over the ``git`` executable for a local clone.

All calls for one repository go through a lock, so a :class:`GitRepo` can be
shared between threads.  Results that are expensive and immutable (blame of a
file at a commit, commit metadata, diffs) are memoised.
"""

from __future__ import annotations

import logging
import os
import subprocess
import threading
from functools import cached_property
from pathlib import Path

from ..errors import GitError
from .records import CommitRecord, DiffLine, ReleaseRef, utc

log = logging.getLogger(__name__)

_RS = "\x1e"
_US = "\x1f"


class GitRepo:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not (self.path / ".git").exists() and not (self.path / "HEAD").exists():
            raise GitError(f"{self.path} is not a git repository")
        self._lock = threading.RLock()
        self._blame: dict[tuple[str, str], list[str]] = {}
        self._diffs: dict[str, tuple[DiffLine, ...]] = {}

    def run(self, *args: str) -> str:
        env = dict(os.environ, LC_ALL="C", GIT_PAGER="cat")
        with self._lock:
            proc = subprocess.run(
                ["git", "-C", str(self.path), *args],
                capture_output=True,
                env=env,
            )
        if proc.returncode != 0:
            raise GitError(f"git {' '.join(args)}: {proc.stderr.decode('utf-8', 'replace').strip()}")
        return proc.stdout.decode("utf-8", "replace")

    def resolve(self, rev: str) -> str:
        return self.run("rev-parse", "--verify", f"{rev}^{{commit}}").strip()

    # -- history ------------------------------------------------------------

    @cached_property
    def _log(self) -> tuple[list[CommitRecord], dict[str, CommitRecord], dict[str, bool]]:
        """Every commit reachable from any ref, newest first in date order."""
        fmt = f"{_RS}%H{_US}%an{_US}%ae{_US}%ct{_US}%B{_US}"
        out = self.run("log", "--all", "--date-order", f"--format={fmt}", "--name-only", "--no-renames")
        commits: list[CommitRecord] = []
        touches_java: dict[str, bool] = {}
        for order, chunk in enumerate(c for c in out.split(_RS) if c.strip()):
            sha, name, email, ct, message, files = chunk.split(_US, 5)
            commits.append(
                CommitRecord(
                    sha=sha,
                    author=f"{name} <{email}>",
                    timestamp=utc(int(ct)),
                    message=message.strip(),
                    order=order,
                )
            )
            touches_java[sha] = any(f.strip().endswith(".java") for f in files.splitlines())
        return commits, {c.sha: c for c in commits}, touches_java

    def commits(self) -> list[CommitRecord]:
        return self._log[0]

    def commit(self, sha: str) -> CommitRecord:
        try:
            return self._log[1][sha]
        except KeyError:
            full = self.resolve(sha)
            return self._log[1][full]

    def touches_java(self, sha: str) -> bool:
        return self._log[2].get(sha, False)

    def count_commits(self, rev: str = "HEAD") -> int:
        return int(self.run("rev-list", "--count", rev).strip())

    def contributors(self, rev: str = "HEAD") -> int:
        out = self.run("log", "--format=%ae", rev)
        return len({e.strip().lower() for e in out.splitlines() if e.strip()})

    # -- releases -----------------------------------------------------------

    def tags(self) -> list[ReleaseRef]:
        """Tags pointing at commits, newest first by creator date."""
        fmt = f"%(refname:short){_US}%(objectname){_US}%(*objectname){_US}%(creatordate:unix)"
        out = self.run("for-each-ref", "--sort=-creatordate", f"--format={fmt}", "refs/tags")
        refs = []
        for line in out.splitlines():
            if not line.strip():
                continue
            tag, obj, peeled, date = line.split(_US)
            refs.append(ReleaseRef(tag, peeled or obj, utc(int(date))))
        return refs

    def release(self, rev: str | None = None) -> ReleaseRef:
        """Resolve the release snapshot: a tag name, a revision, or the newest tag (else HEAD)."""
        tags = self.tags()
        if rev is None:
            if tags:
                return tags[0]
            rev = "HEAD"
        for t in tags:
            if t.tag == rev:
                return t
        sha = self.resolve(rev)
        return ReleaseRef(rev, sha, self.commit(sha).timestamp)

    # -- snapshot -----------------------------------------------------------

    def list_files(self, rev: str) -> list[str]:
        out = self.run("ls-tree", "-r", "--name-only", "-z", rev)
        return [p for p in out.split("\0") if p]

    def show_file(self, rev: str, path: str) -> str:
        return self.run("cat-file", "blob", f"{rev}:{path}")

    def blame(self, rev: str, path: str) -> list[str]:
        """Commit sha of each line (index 0 is line 1) of ``path`` at ``rev``."""
        key = (rev, path)
        if key not in self._blame:
            out = self.run("blame", "--porcelain", rev, "--", path)
            shas: list[str] = []
            expect_header = True
            for line in out.splitlines():
                if line.startswith("\t"):
                    expect_header = True
                    continue
                if expect_header:
                    parts = line.split(" ")
                    if len(parts) >= 3 and len(parts[0]) == 40:
                        shas.append(parts[0])
                        expect_header = False
            self._blame[key] = shas
        return self._blame[key]

    def diff(self, sha: str) -> tuple[DiffLine, ...]:
        """Java source lines added, deleted or modified by ``sha`` (first parent for merges).

        Within a hunk the i-th deleted line pairs with the i-th added line as
        one ``modified`` line carrying the new text.
        """
        if sha in self._diffs:
            return self._diffs[sha]
        out = self.run(
            "show", "--format=", "--unified=0", "--no-color", "--no-renames",
            "--first-parent", "-m", sha, "--", "*.java",
        )
        lines: list[DiffLine] = []
        path = ""
        deleted: list[str] = []
        added: list[str] = []

        def flush():
            for i in range(max(len(deleted), len(added))):
                if i < len(deleted) and i < len(added):
                    lines.append(DiffLine("modified", added[i], path))
                elif i < len(deleted):
                    lines.append(DiffLine("deleted", deleted[i], path))
                else:
                    lines.append(DiffLine("added", added[i], path))
            deleted.clear()
            added.clear()

        in_header = False
        for raw in out.splitlines():
            if raw.startswith("diff --git"):
                flush()
                in_header = True
            elif in_header and raw.startswith("--- "):
                source = raw[4:]
                path = source[2:] if source.startswith("a/") else source
            elif in_header and raw.startswith("+++ "):
                target = raw[4:]
                if target != "/dev/null":
                    path = target[2:] if target.startswith("b/") else target
            elif raw.startswith("@@"):
                flush()
                in_header = False
            elif in_header:
                continue
            elif raw.startswith("-"):
                deleted.append(raw[1:])
            elif raw.startswith("+"):
                added.append(raw[1:])
        flush()
        result = tuple(lines)
        self._diffs[sha] = result
        return result
