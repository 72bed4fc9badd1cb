"""Command-line entry point: ``ctxcomp <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig
from .errors import CoverageGap, CtxError
from .evaluation import EvalReport

log = logging.getLogger("ctxcomp")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.workers is not None:
        cfg.workers = args.workers
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline configuration (JSON)")
    p.add_argument("--workers", type=int, help="worker processes (overrides the config)")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--out", help="output location")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxcomp", description="Context-augmented code completion datasets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="mine repositories into a corpus store")
    _common(p)

    p = sub.add_parser("build", help="build the dataset variants from a corpus store")
    _common(p)
    p.add_argument("--store", help="corpus store directory (default: config 'store')")

    p = sub.add_parser("rank-issues", help="MRR of the issue ranker on commit-linked issues")
    _common(p)
    p.add_argument("--store", help="corpus store directory (default: config 'store')")

    p = sub.add_parser("eval", help="score prediction files against a dataset split")
    _common(p)
    p.add_argument("--dataset", required=True, help="dataset split JSONL (normally test.jsonl)")
    p.add_argument("--predictions", nargs="+", required=True, help="prediction JSONL files")
    p.add_argument("--baseline", help="baseline model name")
    p.add_argument("--no-ensemble", action="store_true", help="skip the confidence-based ensemble")

    p = sub.add_parser("ensemble", help="write the confidence-based ensemble predictions")
    _common(p)
    p.add_argument("--predictions", nargs="+", required=True, help="prediction JSONL files")
    p.add_argument("--name", default="ensemble", help="model name of the emitted records")

    p = sub.add_parser("report", help="print a saved report (JSON) as a text table")
    _common(p)
    p.add_argument("report", help="report JSON written by 'eval'")
    p.add_argument("--csv", action="store_true", help="print the confidence-bucket CSV instead")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    from . import pipeline

    try:
        cfg = _load_config(args)
        if args.command == "mine":
            index = pipeline.cmd_mine(cfg, args.out or cfg.store)
            for e in index["repos"]:
                print(f"{e['name']}: {e['status']}" + (f" ({e['methods']} methods)" if "methods" in e else ""))
            if not any(e["status"] == "mined" for e in index["repos"]):
                print("no repository was mined", file=sys.stderr)
                return 1
        elif args.command == "build":
            manifest = pipeline.cmd_build(cfg, args.store, args.out)
            split = manifest["split"]
            print(
                f"{manifest['instances']} instances in {len(manifest['variants'])} datasets "
                f"(train {split['train']}, eval {split['eval']}, test {split['test']})"
            )
        elif args.command == "rank-issues":
            result = pipeline.cmd_rank_issues(cfg, args.store, args.out)
            print(json.dumps(result, indent=2, sort_keys=True))
        elif args.command == "eval":
            report = pipeline.cmd_eval(
                cfg, args.dataset, args.predictions, args.out or "report",
                baseline=args.baseline, ensemble=not args.no_ensemble,
            )
            print(report.to_text(), end="")
        elif args.command == "ensemble":
            out = args.out or "ensemble.jsonl"
            chosen = pipeline.cmd_ensemble(cfg, args.predictions, out, args.name)
            print(f"{len(chosen)} predictions written to {out}")
        elif args.command == "report":
            report = EvalReport.from_dict(json.loads(Path(args.report).read_text(encoding="utf-8")))
            text = report.buckets_csv() if args.csv else report.to_text()
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
            else:
                print(text, end="")
    except CoverageGap as exc:
        print(f"error: {exc}", file=sys.stderr)
        for model, iid in exc.gaps:
            print(f"  missing {model} {iid}", file=sys.stderr)
        return 2
    except (CtxError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
