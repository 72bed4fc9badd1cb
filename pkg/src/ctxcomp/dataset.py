"""Masked instances, deduplication, intersection, splitting and dataset JSONL.

A masked instance replaces one or two consecutive statements of a method
with the literal ``<MISSING CODE>`` marker.  The masked span is the exact
character slice of the rendered method covering those statements, so
putting the target back in place of the marker gives the method text again.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .codemodel import MethodRecord
from .errors import SchemaError
from .mining.records import format_instant, parse_instant

MARKER = "<MISSING CODE>"


@dataclass(frozen=True)
class MaskedInstance:
    instance_id: str
    method_id: str
    im_text: str
    target: str
    masked_indices: tuple[int, ...]
    commit_sha: str
    t: datetime
    developer: str
    repo: str = ""
    mask_start: int = 0  # offset of the marker in im_text

    @property
    def unmasked_text(self) -> str:
        """The incomplete method with the marker dropped (what context builders may look at)."""
        end = self.mask_start + len(MARKER)
        return f"{self.im_text[: self.mask_start]} {self.im_text[end:]}".strip()

    def reconstruct(self) -> str:
        end = self.mask_start + len(MARKER)
        return self.im_text[: self.mask_start] + self.target + self.im_text[end:]

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "method_id": self.method_id,
            "im_text": self.im_text,
            "target": self.target,
            "masked_indices": list(self.masked_indices),
            "commit_sha": self.commit_sha,
            "t": format_instant(self.t),
            "developer": self.developer,
            "repo": self.repo,
            "mask_start": self.mask_start,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MaskedInstance:
        return cls(
            instance_id=d["instance_id"],
            method_id=d["method_id"],
            im_text=d["im_text"],
            target=d["target"],
            masked_indices=tuple(d["masked_indices"]),
            commit_sha=d["commit_sha"],
            t=parse_instant(d["t"]),
            developer=d["developer"],
            repo=d.get("repo", ""),
            mask_start=d.get("mask_start", 0),
        )


def instance_key(method_id: str, indices: Iterable[int]) -> str:
    raw = method_id + "|" + ",".join(str(i) for i in sorted(indices))
    return hashlib.sha1(raw.encode("utf-8")).hexdigest()[:16]


def chunk_changed(changed: Iterable[int]) -> list[tuple[int, ...]]:
    """Greedy pairs of consecutive indices; a gap or an odd leftover gives a singleton."""
    idx = sorted(set(changed))
    chunks: list[tuple[int, ...]] = []
    i = 0
    while i < len(idx):
        if i + 1 < len(idx) and idx[i + 1] == idx[i] + 1:
            chunks.append((idx[i], idx[i + 1]))
            i += 2
        else:
            chunks.append((idx[i],))
            i += 1
    return chunks


def mask_method(
    method: MethodRecord,
    changed: Iterable[int],
    commit: str,
    t: datetime,
    developer: str,
) -> list[MaskedInstance]:
    """One instance per chunk of at most two consecutive changed statements.

    ``commit`` is the sha of the last-change commit.
    """
    out = []
    for chunk in chunk_changed(changed):
        for i in chunk:
            if not 0 <= i < len(method.statements):
                raise IndexError(f"{method.id}: no statement {i}")
        start = method.statements[chunk[0]].span[0]
        end = method.statements[chunk[-1]].span[1]
        out.append(
            MaskedInstance(
                instance_id=instance_key(method.id, chunk),
                method_id=method.id,
                im_text=method.text[:start] + MARKER + method.text[end:],
                target=method.text[start:end],
                masked_indices=chunk,
                commit_sha=commit,
                t=t,
                developer=developer,
                repo=method.repo,
                mask_start=start,
            )
        )
    return out


def dedup_instances(instances: Iterable[MaskedInstance]) -> list[MaskedInstance]:
    """Keep the first instance for each distinct incomplete-method text."""
    seen: set[str] = set()
    out = []
    for inst in instances:
        if inst.im_text not in seen:
            seen.add(inst.im_text)
            out.append(inst)
    return out


def intersect_datasets(datasets: Mapping[str, Iterable]) -> set[str]:
    """Instance ids present in every dataset (items are instances or plain ids)."""
    common: set[str] | None = None
    for items in datasets.values():
        ids = {x if isinstance(x, str) else x.instance_id for x in items}
        common = ids if common is None else common & ids
    return common or set()


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    eval: tuple[str, ...]
    test: tuple[str, ...]

    def of(self) -> dict[str, str]:
        """instance id -> split name."""
        where = {}
        for name in ("train", "eval", "test"):
            for iid in getattr(self, name):
                where[iid] = name
        return where


def split_dataset(
    instances: Sequence[MaskedInstance],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Split by method: shuffled methods fill eval, then test, up to their targets; train takes the rest."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    by_method: dict[str, list[str]] = {}
    for inst in instances:
        by_method.setdefault(inst.method_id, []).append(inst.instance_id)
    methods = sorted(by_method)
    random.Random(seed).shuffle(methods)
    n = len(instances)
    targets = {"eval": int(n * ratios[1] + 1e-9), "test": int(n * ratios[2] + 1e-9)}
    parts: dict[str, list[str]] = {"train": [], "eval": [], "test": []}
    for mid in methods:
        if len(parts["eval"]) < targets["eval"]:
            dest = "eval"
        elif len(parts["test"]) < targets["test"]:
            dest = "test"
        else:
            dest = "train"
        parts[dest].extend(by_method[mid])
    return DatasetSplit(tuple(parts["train"]), tuple(parts["eval"]), tuple(parts["test"]))


# -- dataset files ------------------------------------------------------------


@dataclass(frozen=True)
class DatasetRecord:
    instance_id: str
    method_id: str
    input: str
    target: str
    context_kinds: tuple[str, ...] = field(default=())
    truncated_tokens: int = 0
    repo: str = ""
    commit_sha: str = ""
    t: str = ""

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "method_id": self.method_id,
            "input": self.input,
            "target": self.target,
            "context_kinds": list(self.context_kinds),
            "truncated_tokens": self.truncated_tokens,
            "repo": self.repo,
            "commit_sha": self.commit_sha,
            "t": self.t,
        }


_FIELDS = {
    "instance_id": str,
    "method_id": str,
    "input": str,
    "target": str,
    "context_kinds": list,
    "truncated_tokens": int,
    "repo": str,
    "commit_sha": str,
    "t": str,
}


def write_dataset(records: Iterable[DatasetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(d, dict):
                raise SchemaError(f"{path}: expected an object", lineno)
            for key, typ in _FIELDS.items():
                v = d.get(key)
                if not isinstance(v, typ) or (typ is int and isinstance(v, bool)):
                    raise SchemaError(f"{path}: field {key!r} missing or not {typ.__name__}", lineno)
            if not all(isinstance(k, str) for k in d["context_kinds"]):
                raise SchemaError(f"{path}: context_kinds must be strings", lineno)
            d["context_kinds"] = tuple(d["context_kinds"])
            out.append(DatasetRecord(**{k: d[k] for k in _FIELDS}))
    return out
