"""Static, source-level call graph over the extracted corpus methods.

Calls are resolved by name and arity only:

* unqualified, ``this.`` or ``super.`` calls: the caller's own class, then
  its file, then a unique corpus-wide match;
* ``Type.m(...)`` where ``Type`` names a corpus class: methods of that class;
* ``new Type(...)``: constructors of classes named ``Type``;
* any other receiver: a unique corpus-wide match.

Ambiguous candidates at the deciding stage produce no edge.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .codemodel import MethodRecord, call_sites, code_tokens
from .errors import UnknownMethod


@dataclass(frozen=True)
class Edge:
    caller: str
    callee: str
    statement: int  # call-site statement index in the caller


@dataclass
class CallGraph:
    nodes: dict[str, MethodRecord] = field(default_factory=dict)
    out_edges: dict[str, list[Edge]] = field(default_factory=dict)
    in_edges: dict[str, list[Edge]] = field(default_factory=dict)

    def edges(self) -> list[Edge]:
        return [e for es in self.out_edges.values() for e in es]

    def dump(self, path: str | Path) -> None:
        lines = [f"{e.caller}\t{e.callee}\t{e.statement}\n" for e in self.edges()]
        Path(path).write_text("".join(lines), encoding="utf-8")

    @staticmethod
    def read_dump(path: str | Path) -> list[Edge]:
        edges = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line:
                caller, callee, stmt = line.split("\t")
                edges.append(Edge(caller, callee, int(stmt)))
        return edges


def statement_of(method: MethodRecord, offset: int) -> int | None:
    """Index of the statement whose span contains character ``offset``."""
    starts = [s.span[0] for s in method.statements]
    k = bisect.bisect_right(starts, offset) - 1
    if k >= 0 and offset < method.statements[k].span[1]:
        return method.statements[k].index
    return None


def _unique(cands: list[MethodRecord]) -> MethodRecord | None:
    return cands[0] if len(cands) == 1 else None


def build_call_graph(corpus: Sequence[MethodRecord]) -> CallGraph:
    graph = CallGraph()
    by_sig: dict[tuple[str, int], list[MethodRecord]] = defaultdict(list)
    class_names: set[str] = set()
    for m in corpus:
        graph.nodes[m.id] = m
        graph.out_edges[m.id] = []
        graph.in_edges[m.id] = []
        by_sig[(m.name, m.arity)].append(m)
        class_names.add(m.simple_class_name)

    for caller in corpus:
        tokens = code_tokens(caller.text)
        for site in call_sites(tokens):
            stmt = statement_of(caller, tokens[site.index].start)
            if stmt is None:
                continue
            cands = by_sig.get((site.name, site.arity), [])
            if not cands:
                continue
            target = _resolve(caller, site, cands, class_names)
            if target is None:
                continue
            edge = Edge(caller.id, target.id, stmt)
            graph.out_edges[caller.id].append(edge)
            graph.in_edges[target.id].append(edge)
    return graph


def _resolve(caller, site, cands, class_names) -> MethodRecord | None:
    if site.constructor:
        return _unique([c for c in cands if c.is_constructor and c.simple_class_name == site.name])
    cands = [c for c in cands if not c.is_constructor]
    q = site.qualifier
    if q is None or q in ("this", "super"):
        same_class = [c for c in cands if c.file_path == caller.file_path and c.repo == caller.repo
                      and c.class_name == caller.class_name]
        if same_class:
            return _unique(same_class)
        same_file = [c for c in cands if c.file_path == caller.file_path and c.repo == caller.repo]
        if same_file:
            return _unique(same_file)
        return _unique(cands)
    if q[:1].isupper() and q in class_names:
        return _unique([c for c in cands if c.simple_class_name == q])
    return _unique(cands)


def neighbors(
    graph: CallGraph, method_id: str, exclude_statements: Iterable[int] = ()
) -> tuple[list[str], list[str]]:
    """Callee and caller signatures of a method, deduplicated in first-seen order.

    Calls made from statements in ``exclude_statements`` (the masked ones) are
    left out.
    """
    if method_id not in graph.nodes:
        raise UnknownMethod(method_id)
    excluded = set(exclude_statements)
    callees = _dedup(
        graph.nodes[e.callee].signature
        for e in graph.out_edges[method_id]
        if e.statement not in excluded
    )
    callers = _dedup(
        graph.nodes[e.caller].signature
        for e in graph.in_edges[method_id]
        if not (e.caller == method_id and e.statement in excluded)
    )
    return callees, callers


def _dedup(items: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out
