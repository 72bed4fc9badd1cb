"""Declarative pipeline configuration (a JSON file; CLI flags override fields)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .contexts import CONTEXT_KINDS
from .errors import ConfigError


@dataclass
class RepoSpec:
    name: str
    path: str
    issues: str | None = None  # JSON issue export
    release: str | None = None  # tag or revision; newest tag (else HEAD) when omitted
    stars: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> RepoSpec:
        _check_keys(cls, d, "repos[]")
        return cls(**d)


@dataclass
class PipelineConfig:
    repos: list[RepoSpec] = field(default_factory=list)
    min_commits: int = 100
    min_contributors: int = 10
    min_issues: int = 50
    min_stars: int = 10
    max_files: int = 1000
    max_method_tokens: int = 682
    budget: int = 1024
    context_kinds: list[str] = field(default_factory=lambda: list(CONTEXT_KINDS))
    combinations: list[list[str]] = field(default_factory=list)
    retrieval_k: int = 20
    crystal_n_max: int = 4
    crystal_k_trivial: int = 500
    history_limit: int = 10
    dev_statements_top: int = 10
    dev_invocations_top: int = 100
    split_ratios: list[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    seed: int = 0
    ranker: str = "tfidf"
    token_counter: str = "lexer"
    model_priority: list[str] = field(default_factory=list)
    baseline_model: str | None = None
    workers: int = 1
    store: str = "store"
    out: str = "datasets"

    def validate(self) -> PipelineConfig:
        if self.budget <= 0 or self.max_method_tokens <= 0:
            raise ConfigError("budgets must be positive")
        if self.max_method_tokens > self.budget:
            raise ConfigError("method budget exceeds the total budget")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split_ratios must be three values summing to 1, got {self.split_ratios}")
        if any(r < 0 for r in self.split_ratios):
            raise ConfigError("split ratios must be non-negative")
        if not self.context_kinds:
            raise ConfigError("context_kinds is empty")
        for kind in self.context_kinds + [k for combo in self.combinations for k in combo]:
            if kind not in CONTEXT_KINDS:
                raise ConfigError(f"unknown context kind {kind!r}")
        if len(set(self.context_kinds)) != len(self.context_kinds):
            raise ConfigError("context_kinds has duplicates")
        for combo in self.combinations:
            if len(combo) < 2 or len(set(combo)) != len(combo):
                raise ConfigError(f"a combination needs two or more distinct kinds: {combo}")
        names = [r.name for r in self.repos]
        if len(set(names)) != len(names):
            raise ConfigError("repository names must be unique")
        for r in self.repos:
            if not r.name or "/" in r.name or r.name.startswith("."):
                raise ConfigError(f"bad repository name {r.name!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def variants(self) -> list[tuple[str, tuple[str, ...]]]:
        """(dataset name, context kinds) for the baseline, each kind, and each combination."""
        out = [("baseline", ())]
        out += [(k, (k,)) for k in self.context_kinds]
        out += [("+".join(c), tuple(c)) for c in self.combinations]
        return out

    def needed_kinds(self) -> list[str]:
        seen = list(self.context_kinds)
        for combo in self.combinations:
            seen += [k for k in combo if k not in seen]
        return seen

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        _check_keys(cls, d, "config")
        d = dict(d)
        d["repos"] = [RepoSpec.from_dict(r) for r in d.get("repos", [])]
        return cls(**d).validate()

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        cfg = cls.from_dict(raw)
        base = Path(path).resolve().parent
        # relative repository and export paths are relative to the config file
        for r in cfg.repos:
            r.path = str((base / r.path).resolve()) if not Path(r.path).is_absolute() else r.path
            if r.issues and not Path(r.issues).is_absolute():
                r.issues = str((base / r.issues).resolve())
        return cfg


def _check_keys(cls, d: dict, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
