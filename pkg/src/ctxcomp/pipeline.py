"""End-to-end stages: mine a corpus store, build the datasets, evaluate predictions.

Store layout (one directory per mined repository, every file written with
sorted keys so reruns are byte-identical)::

    store/index.json                 mined and skipped repositories
    store/<repo>/meta.json           RepoMeta with the release used
    store/<repo>/methods.jsonl       every extracted method of the sampled files
    store/<repo>/changes.jsonl       last-change commit and changed statements per method
    store/<repo>/commits.jsonl       referenced commits (last changes and histories, with diffs)
    store/<repo>/history.jsonl       developer history (commit shas) per last-change commit
    store/<repo>/issues.jsonl        the issue export

Dataset layout::

    out/manifest.json
    out/<variant>/{train,eval,test}.jsonl
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .callgraph import build_call_graph
from .codemodel import MethodRecord, code_tokens, extract_methods, filter_by_length, get_counter
from .config import PipelineConfig, RepoSpec
from .contexts import (
    CLASS_SIGNATURES,
    DEV_FREQUENT_INVOCATIONS,
    DEV_SIMILAR_STATEMENTS,
    ISSUE_BODY,
    ISSUE_TITLE,
    METHOD_CALLS,
    MOST_SIMILAR_METHOD,
    ContextBlock,
    build_class_signatures_context,
    build_dev_invocations_context,
    build_dev_statements_context,
    build_issue_context,
    build_method_calls_context,
    compose_input,
)
from .dataset import (
    DatasetRecord,
    MaskedInstance,
    dedup_instances,
    intersect_datasets,
    mask_method,
    read_dataset,
    split_dataset,
    write_dataset,
)
from .errors import CtxError, EmptyIntersection, NoChangeFound, ParseError, SchemaError
from .evaluation import build_report, ensemble_select, group_by_model, read_predictions, write_predictions, write_report
from .mining import (
    CommitRecord,
    GitRepo,
    IssueRecord,
    ReleaseRef,
    RepoMeta,
    developer_history,
    last_change_commit,
    load_issue_export,
    open_issues_at,
    sample_paths,
    select_repositories,
)
from .mining.records import format_instant
from .ranker import build_linked_pairs, make_backend, rank_issues, ranking_mrr
from .similarity import RetrievalIndex, TrivialNGramSet, trivially_shared_ngrams

log = logging.getLogger(__name__)

NOTE_UNMASKED = "unmasked chunks of a multi-chunk edit are left in their post-edit form"
NOTE_TIME = "t is the committer time of the last-change commit"
NOTE_TRIVIAL = "CrystalBLEU trivial n-grams are computed over training-split methods only"


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(_dump(r) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path}: {exc.msg}", lineno) from None
    return out


# -- mine ---------------------------------------------------------------------


def mine_repo(spec: RepoSpec, cfg: PipelineConfig, store: Path) -> dict:
    """Mine one repository into ``store/<name>``; returns its index entry."""
    g = GitRepo(spec.path)
    issues = load_issue_export(spec.issues) if spec.issues else []
    release = g.release(spec.release)
    meta = RepoMeta(
        name=spec.name,
        commits=g.count_commits(release.sha),
        contributors=g.contributors(release.sha),
        issues=len(issues),
        stars=spec.stars,
        releases=(release,),
    )
    if not select_repositories([meta], cfg.min_commits, cfg.min_contributors, cfg.min_issues, cfg.min_stars):
        return {"name": spec.name, "status": "filtered", "meta": meta.to_dict()}

    counter = get_counter(cfg.token_counter)
    methods: list[MethodRecord] = []
    for path in sample_paths(g.list_files(release.sha), cfg.max_files, cfg.seed):
        try:
            methods.extend(extract_methods(g.show_file(release.sha, path), path, repo=spec.name, counter=counter))
        except ParseError as exc:
            log.warning("%s: skipping %s: %s", spec.name, path, exc)

    changes = []
    commits: dict[str, CommitRecord] = {}
    histories: dict[str, list[str]] = {}
    for m in filter_by_length(methods, cfg.max_method_tokens):
        try:
            commit, changed = last_change_commit(m, release, g)
        except NoChangeFound:
            continue
        changes.append({"method_id": m.id, "commit": commit.sha, "statements": sorted(changed)})
        if commit.sha not in histories:
            commits[commit.sha] = commit
            past = developer_history(commit.author, commit, g, cfg.history_limit)
            histories[commit.sha] = [c.sha for c in past]
            for c in past:
                commits[c.sha] = c

    out = store / spec.name
    if out.exists():
        shutil.rmtree(out)
    out.mkdir(parents=True)
    (out / "meta.json").write_text(_dump(meta.to_dict()) + "\n", encoding="utf-8")
    _write_jsonl(out / "methods.jsonl", (m.to_dict() for m in methods))
    _write_jsonl(out / "changes.jsonl", changes)
    _write_jsonl(out / "commits.jsonl", (commits[s].to_dict() for s in sorted(commits)))
    _write_jsonl(out / "history.jsonl", ({"commit": s, "history": histories[s]} for s in sorted(histories)))
    _write_jsonl(out / "issues.jsonl", (i.to_dict() for i in sorted(issues, key=lambda i: i.id)))
    return {
        "name": spec.name,
        "status": "mined",
        "methods": len(methods),
        "changed_methods": len(changes),
        "release": release.to_dict(),
    }


def _mine_task(args) -> dict:
    spec, cfg, store = args
    try:
        return mine_repo(spec, cfg, Path(store))
    except (CtxError, OSError) as exc:
        log.error("%s: mining failed: %s", spec.name, exc)
        return {"name": spec.name, "status": "failed", "error": str(exc)}


def cmd_mine(cfg: PipelineConfig, store: str | Path | None = None, workers: int | None = None) -> dict:
    store = Path(store or cfg.store)
    store.mkdir(parents=True, exist_ok=True)
    workers = workers or cfg.workers
    tasks = [(spec, cfg, str(store)) for spec in cfg.repos]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_mine_task, tasks))
    else:
        entries = [_mine_task(t) for t in tasks]
    for e in entries:
        # a repository that fails or is filtered now must not linger from an older run
        if e["status"] != "mined" and (store / e["name"]).is_dir():
            shutil.rmtree(store / e["name"])
    index = {"repos": sorted(entries, key=lambda e: e["name"])}
    (store / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index


# -- store --------------------------------------------------------------------


@dataclass
class RepoData:
    name: str
    release: ReleaseRef
    methods: list[MethodRecord]
    changes: list[dict]
    commits: dict[str, CommitRecord]
    history: dict[str, list[str]]
    issues: list[IssueRecord]

    def developer_commits(self, sha: str) -> list[CommitRecord]:
        return [self.commits[s] for s in self.history.get(sha, [])]


def load_store(store: str | Path) -> list[RepoData]:
    store = Path(store)
    index_path = store / "index.json"
    if not index_path.exists():
        raise CtxError(f"{store} has no index.json; run 'mine' first")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    repos = []
    for entry in index["repos"]:
        if entry["status"] != "mined":
            continue
        d = store / entry["name"]
        meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
        repos.append(
            RepoData(
                name=entry["name"],
                release=ReleaseRef.from_dict(meta["releases"][0]),
                methods=[MethodRecord.from_dict(x) for x in _read_jsonl(d / "methods.jsonl")],
                changes=_read_jsonl(d / "changes.jsonl"),
                commits={c["sha"]: CommitRecord.from_dict(c) for c in _read_jsonl(d / "commits.jsonl")},
                history={h["commit"]: h["history"] for h in _read_jsonl(d / "history.jsonl")},
                issues=[IssueRecord.from_dict(x) for x in _read_jsonl(d / "issues.jsonl")],
            )
        )
    return repos


def collect_instances(repos: Sequence[RepoData], cfg: PipelineConfig) -> list[MaskedInstance]:
    counter = get_counter(cfg.token_counter)
    out = []
    for repo in repos:
        by_id = {m.id: m for m in repo.methods}
        for ch in repo.changes:
            commit = repo.commits[ch["commit"]]
            for inst in mask_method(by_id[ch["method_id"]], ch["statements"], commit.sha, commit.timestamp, commit.author):
                # the marker can make a method at the cap grow past it
                if counter.count(inst.im_text) <= cfg.max_method_tokens:
                    out.append(inst)
    return dedup_instances(out)


# -- build --------------------------------------------------------------------

_RETRIEVAL: tuple[RetrievalIndex, TrivialNGramSet, int] | None = None


def _init_retrieval(pool, trivial, k):
    global _RETRIEVAL
    _RETRIEVAL = (RetrievalIndex(pool), trivial, k)


def _retrieve(inst: MaskedInstance) -> str:
    index, trivial, k = _RETRIEVAL
    hit = index.query(code_tokens(inst.unmasked_text), trivial, k, exclude=(inst.method_id,))
    return hit.method.id


def _cache_dir() -> Path | None:
    path = os.environ.get("CTX_CACHE")
    return Path(path) if path else None


def training_trivial_set(pool: Sequence[MethodRecord], cfg: PipelineConfig) -> TrivialNGramSet:
    key = hashlib.sha1(
        _dump([cfg.crystal_n_max, cfg.crystal_k_trivial, [m.id for m in pool], [m.text for m in pool]]).encode()
    ).hexdigest()[:20]
    cache = _cache_dir()
    path = cache / f"trivial-{key}.txt" if cache else None
    if path and path.exists():
        return TrivialNGramSet.load(path)
    trivial = trivially_shared_ngrams(
        (code_tokens(m.text) for m in pool), cfg.crystal_n_max, cfg.crystal_k_trivial
    )
    if path:
        path.parent.mkdir(parents=True, exist_ok=True)
        trivial.save(path)
    return trivial


def most_similar(
    instances: Sequence[MaskedInstance],
    pool: Sequence[MethodRecord],
    trivial: TrivialNGramSet,
    cfg: PipelineConfig,
    workers: int,
) -> dict[str, str]:
    """instance id -> id of the most similar training method."""
    key = hashlib.sha1(
        _dump([trivial.dumps(), cfg.retrieval_k, [m.id for m in pool], [m.text for m in pool],
               [[i.instance_id, i.im_text] for i in instances]]).encode()
    ).hexdigest()[:20]
    cache = _cache_dir()
    path = cache / f"retrieval-{key}.json" if cache else None
    if path and path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    if workers > 1 and len(instances) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_retrieval, initargs=(pool, trivial, cfg.retrieval_k)) as ex:
            hits = list(ex.map(_retrieve, instances, chunksize=max(1, len(instances) // (4 * workers))))
    else:
        _init_retrieval(pool, trivial, cfg.retrieval_k)
        hits = [_retrieve(i) for i in instances]
    result = {i.instance_id: h for i, h in zip(instances, hits)}
    if path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(_dump(result) + "\n", encoding="utf-8")
    return result


def cmd_build(
    cfg: PipelineConfig,
    store: str | Path | None = None,
    out: str | Path | None = None,
    workers: int | None = None,
    seed: int | None = None,
) -> dict:
    """Build every configured dataset variant; returns the manifest."""
    store = Path(store or cfg.store)
    out = Path(out or cfg.out)
    workers = workers or cfg.workers
    seed = cfg.seed if seed is None else seed
    counter = get_counter(cfg.token_counter)
    kinds = cfg.needed_kinds()
    backend = make_backend(cfg.ranker)

    repos = load_store(store)
    instances = collect_instances(repos, cfg)
    repo_of = {}
    methods: dict[str, MethodRecord] = {}
    for repo in repos:
        for m in repo.methods:
            methods[m.id] = m
            repo_of[m.id] = repo

    # contexts that do not depend on the split
    blocks: dict[str, dict[str, ContextBlock]] = {k: {} for k in kinds}
    membership: dict[str, set[str]] = {"baseline": {i.instance_id for i in instances}}
    graphs = {r.name: build_call_graph(r.methods) for r in repos} if METHOD_CALLS in kinds else {}
    by_file: dict[tuple[str, str], list[MethodRecord]] = {}
    for m in methods.values():
        by_file.setdefault((m.repo, m.file_path), []).append(m)
    for inst in instances:
        repo = repo_of[inst.method_id]
        iid = inst.instance_id
        if METHOD_CALLS in kinds:
            blocks[METHOD_CALLS][iid] = build_method_calls_context(inst, graphs[repo.name], counter)
        if CLASS_SIGNATURES in kinds:
            m = methods[inst.method_id]
            blocks[CLASS_SIGNATURES][iid] = build_class_signatures_context(inst, by_file[(m.repo, m.file_path)], counter)
        if ISSUE_TITLE in kinds or ISSUE_BODY in kinds:
            ranked = rank_issues(inst, open_issues_at(repo.issues, inst.t), backend)
            for kind, part in ((ISSUE_TITLE, "title"), (ISSUE_BODY, "body")):
                if kind in kinds and ranked:
                    blocks[kind][iid] = build_issue_context(inst, ranked, part, counter)
        history = repo.developer_commits(inst.commit_sha)
        if DEV_SIMILAR_STATEMENTS in kinds:
            blocks[DEV_SIMILAR_STATEMENTS][iid] = build_dev_statements_context(inst, history, cfg.dev_statements_top, counter)
        if DEV_FREQUENT_INVOCATIONS in kinds:
            blocks[DEV_FREQUENT_INVOCATIONS][iid] = build_dev_invocations_context(
                inst, history, cfg.dev_invocations_top, counter
            )
    close = getattr(backend, "close", None)
    if close:
        close()

    variants = cfg.variants()
    for name, vkinds in variants[1:]:
        ids = set(membership["baseline"])
        for k in vkinds:
            if k in (ISSUE_TITLE, ISSUE_BODY):
                ids &= set(blocks[k])
        membership[name] = ids
    common = intersect_datasets(membership)
    counts = {name: len(ids) for name, ids in membership.items()}
    if not common:
        raise EmptyIntersection(f"no instance survives the intersection of datasets: {counts}")
    kept = [i for i in instances if i.instance_id in common]
    split = split_dataset(kept, tuple(cfg.split_ratios), seed)
    where = split.of()

    if MOST_SIMILAR_METHOD in kinds:
        pool_ids = list(dict.fromkeys(i.method_id for i in kept if where[i.instance_id] == "train"))
        pool = [methods[m] for m in pool_ids]
        trivial = training_trivial_set(pool, cfg)
        chosen = most_similar(kept, pool, trivial, cfg, workers)
        for inst in kept:
            blocks[MOST_SIMILAR_METHOD][inst.instance_id] = ContextBlock.make(
                MOST_SIMILAR_METHOD, methods[chosen[inst.instance_id]].text, counter
            )

    by_id = {i.instance_id: i for i in kept}
    tmp = out.with_name(out.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    try:
        truncated = {}
        for name, vkinds in variants:
            d = tmp / name
            d.mkdir()
            cut = 0
            for part in ("train", "eval", "test"):
                rows = []
                for iid in getattr(split, part):
                    inst = by_id[iid]
                    chosen_blocks = [blocks[k][iid] for k in vkinds]
                    ser = compose_input(inst, chosen_blocks, cfg.budget, cfg.max_method_tokens, counter)
                    cut += ser.truncated_tokens > 0
                    rows.append(
                        DatasetRecord(
                            instance_id=iid,
                            method_id=inst.method_id,
                            input=ser.text,
                            target=inst.target,
                            context_kinds=vkinds,
                            truncated_tokens=ser.truncated_tokens,
                            repo=inst.repo,
                            commit_sha=inst.commit_sha,
                            t=format_instant(inst.t),
                        )
                    )
                write_dataset(rows, d / f"{part}.jsonl")
            truncated[name] = cut
        manifest = {
            "variants": {name: list(vk) for name, vk in variants},
            "instances": len(kept),
            "methods": len({i.method_id for i in kept}),
            "split": {p: len(getattr(split, p)) for p in ("train", "eval", "test")},
            "before_intersection": counts,
            "truncated_instances": truncated,
            "seed": seed,
            # worker count is an execution detail; outputs must not depend on it
            "config": {k: v for k, v in cfg.to_dict().items() if k != "workers"},
            "notes": [NOTE_UNMASKED, NOTE_TIME, NOTE_TRIVIAL],
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    tmp.rename(out)
    return manifest


# -- issue ranking ------------------------------------------------------------


def cmd_rank_issues(cfg: PipelineConfig, store: str | Path | None = None, out: str | Path | None = None) -> dict:
    """MRR of the configured ranker on commit-linked issues, next to the random baseline."""
    repos = load_store(Path(store or cfg.store))
    backend = make_backend(cfg.ranker)
    result = {"ranker": cfg.ranker, "repos": {}}
    try:
        for repo in repos:
            instances = collect_instances([repo], cfg)
            pairs = build_linked_pairs(instances, repo.issues, repo.commits)
            entry = {"instances": len(instances), "linked": len(pairs)}
            if pairs:
                mrr, rnd = ranking_mrr(pairs, {i.instance_id: i for i in instances}, repo.issues, backend)
                entry.update(mrr=round(mrr, 4), random_mrr=round(rnd, 4))
            result["repos"][repo.name] = entry
    finally:
        close = getattr(backend, "close", None)
        if close:
            close()
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


# -- evaluation ---------------------------------------------------------------


def load_references(dataset: str | Path) -> dict[str, str]:
    return {r.instance_id: r.target for r in read_dataset(dataset)}


def load_predictions(paths: Sequence[str | Path]) -> dict[str, list]:
    grouped: dict[str, list] = {}
    for p in paths:
        for model, preds in group_by_model(read_predictions(p)).items():
            if model in grouped:
                raise SchemaError(f"model {model!r} appears in more than one prediction file")
            grouped[model] = preds
    return grouped


def cmd_eval(
    cfg: PipelineConfig,
    dataset: str | Path,
    predictions: Sequence[str | Path],
    out: str | Path,
    baseline: str | None = None,
    ensemble: bool = True,
):
    refs = load_references(dataset)
    per_model = load_predictions(predictions)
    priority = cfg.model_priority or list(per_model)
    baseline = baseline or cfg.baseline_model or priority[0]
    report = build_report(refs, per_model, baseline, ensemble=ensemble, priority=priority)
    write_report(report, out)
    return report


def cmd_ensemble(cfg: PipelineConfig, predictions: Sequence[str | Path], out: str | Path, name: str = "ensemble"):
    per_model = load_predictions(predictions)
    chosen = ensemble_select(per_model, cfg.model_priority or list(per_model), name=name)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_predictions(chosen, out)
    return chosen


__all__ = [
    "cmd_build",
    "cmd_ensemble",
    "cmd_eval",
    "cmd_mine",
    "cmd_rank_issues",
    "collect_instances",
    "load_store",
    "mine_repo",
]
