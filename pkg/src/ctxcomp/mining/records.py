from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone


def utc(ts: float | int) -> datetime:
    return datetime.fromtimestamp(ts, tz=timezone.utc)


def parse_instant(s: str) -> datetime:
    """ISO-8601 to an aware UTC datetime (a trailing ``Z`` is accepted)."""
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_instant(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat()


def identity_key(author: str) -> str:
    """Matching key for a ``Name <email>`` identity: the lowercased email, else the name."""
    if "<" in author and author.endswith(">"):
        email = author[author.rindex("<") + 1 : -1].strip().lower()
        if email:
            return email
        return author[: author.rindex("<")].strip()
    return author.strip()


@dataclass(frozen=True)
class DiffLine:
    kind: str  # added | deleted | modified
    text: str
    file_path: str


@dataclass(frozen=True)
class CommitRecord:
    sha: str
    author: str
    timestamp: datetime  # committer time
    message: str
    diff: tuple[DiffLine, ...] = ()
    order: int = 0  # position in date-order traversal; 0 is newest

    def to_dict(self) -> dict:
        return {
            "sha": self.sha,
            "author": self.author,
            "timestamp": format_instant(self.timestamp),
            "message": self.message,
            "diff": [[d.kind, d.text, d.file_path] for d in self.diff],
            "order": self.order,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CommitRecord:
        return cls(
            sha=d["sha"],
            author=d["author"],
            timestamp=parse_instant(d["timestamp"]),
            message=d["message"],
            diff=tuple(DiffLine(*x) for x in d.get("diff", [])),
            order=d.get("order", 0),
        )


@dataclass(frozen=True)
class IssueRecord:
    id: int
    title: str
    body: str
    opened_at: datetime
    closed_at: datetime | None = None
    url: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "body": self.body,
            "opened_at": format_instant(self.opened_at),
            "closed_at": format_instant(self.closed_at) if self.closed_at else None,
            "url": self.url,
        }

    @classmethod
    def from_dict(cls, d: dict) -> IssueRecord:
        return cls(
            id=int(d["id"]),
            title=d.get("title") or "",
            body=d.get("body") or "",
            opened_at=parse_instant(d["opened_at"]),
            closed_at=parse_instant(d["closed_at"]) if d.get("closed_at") else None,
            url=d.get("url") or "",
        )


@dataclass(frozen=True)
class ReleaseRef:
    tag: str
    sha: str
    date: datetime

    def to_dict(self) -> dict:
        return {"tag": self.tag, "sha": self.sha, "date": format_instant(self.date)}

    @classmethod
    def from_dict(cls, d: dict) -> ReleaseRef:
        return cls(d["tag"], d["sha"], parse_instant(d["date"]))


@dataclass(frozen=True)
class RepoMeta:
    name: str
    commits: int = 0
    contributors: int = 0
    issues: int = 0
    stars: int = 0
    releases: tuple[ReleaseRef, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "commits": self.commits,
            "contributors": self.contributors,
            "issues": self.issues,
            "stars": self.stars,
            "releases": [r.to_dict() for r in self.releases],
        }
