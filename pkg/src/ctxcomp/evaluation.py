"""Scoring of prediction files and the paired statistical comparison of models."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from scipy import stats

from .errors import CoverageGap, EmptyUnion, MissingInstance, PositiveLogLik, SchemaError

EXACT_BELOW = 25
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class PredictionRecord:
    instance_id: str
    model_name: str
    prediction: str
    log_likelihood: float

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "model": self.model_name,
            "prediction": self.prediction,
            "log_likelihood": self.log_likelihood,
        }


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    out = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = PredictionRecord(
                    str(d["instance_id"]), str(d["model"]), str(d["prediction"]), float(d["log_likelihood"])
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: malformed prediction ({exc})", lineno) from None
            if rec.log_likelihood > 0 or math.isnan(rec.log_likelihood):
                raise SchemaError(f"{path}: log_likelihood must be <= 0", lineno)
            key = (rec.instance_id, rec.model_name)
            if key in seen:
                raise SchemaError(f"{path}: duplicate prediction for {key}", lineno)
            seen.add(key)
            out.append(rec)
    return out


def write_predictions(preds: Iterable[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in preds:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def group_by_model(preds: Iterable[PredictionRecord]) -> dict[str, list[PredictionRecord]]:
    grouped: dict[str, list[PredictionRecord]] = {}
    for p in preds:
        grouped.setdefault(p.model_name, []).append(p)
    return grouped


# -- correctness --------------------------------------------------------------


def normalize_spaces(s: str) -> str:
    return _WS.sub(" ", s).strip()


def is_correct(prediction: str, reference: str) -> bool:
    """Exact match after collapsing whitespace runs and trimming."""
    return normalize_spaces(prediction) == normalize_spaces(reference)


def percent(count: int, total: int) -> float:
    """``count / total`` as a percentage rounded half-up to two decimals."""
    if total == 0:
        return 0.0
    q = Decimal(count) * 100 / Decimal(total)
    return float(q.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def correct_ids(preds: Iterable[PredictionRecord], references: Mapping[str, str]) -> set[str]:
    out = set()
    for p in preds:
        if p.instance_id not in references:
            raise MissingInstance(p.instance_id)
        if is_correct(p.prediction, references[p.instance_id]):
            out.add(p.instance_id)
    return out


def accuracy(preds: Sequence[PredictionRecord], references: Mapping[str, str]) -> tuple[int, float]:
    """Number of correct predictions and their share of all predictions in percent."""
    n = len(correct_ids(preds, references))
    return n, percent(n, len(preds))


# -- paired statistics --------------------------------------------------------


@dataclass(frozen=True)
class McNemarResult:
    b: int  # only A correct
    c: int  # only B correct
    statistic: float
    p_value: float
    odds_ratio: float
    method: str  # chi_square_cc | exact_binomial
    degenerate: bool = False


def mcnemar_from_counts(b: int, c: int, exact_below: int = EXACT_BELOW) -> McNemarResult:
    n = b + c
    if n == 0:
        return McNemarResult(0, 0, 0.0, 1.0, math.nan, "exact_binomial", degenerate=True)
    odds = c / b if b else math.inf
    if n >= exact_below:
        # continuity correction clamped at zero, so b == c cannot look significant
        stat = max(abs(b - c) - 1, 0) ** 2 / n
        p = float(stats.chi2.sf(stat, 1))
        return McNemarResult(b, c, stat, min(1.0, p), odds, "chi_square_cc")
    k = min(b, c)
    p = min(1.0, 2.0 * float(stats.binom.cdf(k, n, 0.5)))
    return McNemarResult(b, c, float(k), p, odds, "exact_binomial")


def mcnemar_test(a_correct: set[str], b_correct: set[str], universe: set[str] | None = None) -> McNemarResult:
    """McNemar's test of model B against model A; OR > 1 favours B."""
    if universe is not None and not (a_correct <= universe and b_correct <= universe):
        raise MissingInstance("correct sets must be subsets of the universe")
    return mcnemar_from_counts(len(a_correct - b_correct), len(b_correct - a_correct))


def holm_adjust(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, in input order."""
    m = len(p_values)
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value out of range: {p}")
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p_values[i]))
        adjusted[i] = running
    return adjusted


def complementarity(a_correct: set[str], b_correct: set[str]) -> tuple[float, float, float]:
    """(shared, only A, only B) as percentages of the union of correct predictions."""
    union = len(a_correct | b_correct)
    if union == 0:
        raise EmptyUnion("neither model has a correct prediction")
    return (
        percent(len(a_correct & b_correct), union),
        percent(len(a_correct - b_correct), union),
        percent(len(b_correct - a_correct), union),
    )


# -- confidence ---------------------------------------------------------------


def confidence(log_likelihood: float) -> float:
    if log_likelihood > 0:
        raise PositiveLogLik(f"log-likelihood {log_likelihood} > 0")
    return math.exp(log_likelihood)


def bucket_of(conf: float, n_buckets: int = 10) -> int:
    """1-based right-closed bucket: the smallest i with conf <= i / n_buckets."""
    for i in range(1, n_buckets + 1):
        if conf <= i / n_buckets:
            return i
    return n_buckets


@dataclass(frozen=True)
class BucketRow:
    bucket: int
    low: float
    high: float
    n: int
    correct: int
    percent: float | None


def bucket_by_confidence(
    preds: Sequence[PredictionRecord], references: Mapping[str, str], n_buckets: int = 10
) -> list[BucketRow]:
    right = correct_ids(preds, references)
    n = [0] * (n_buckets + 1)
    ok = [0] * (n_buckets + 1)
    for p in preds:
        b = bucket_of(confidence(p.log_likelihood), n_buckets)
        n[b] += 1
        ok[b] += p.instance_id in right
    return [
        BucketRow(i, (i - 1) / n_buckets, i / n_buckets, n[i], ok[i], percent(ok[i], n[i]) if n[i] else None)
        for i in range(1, n_buckets + 1)
    ]


# -- ensemble -----------------------------------------------------------------


def check_coverage(per_model: Mapping[str, Sequence[PredictionRecord]], instance_ids: Iterable[str]) -> None:
    ids = list(instance_ids)
    gaps = []
    for model, preds in per_model.items():
        have = {p.instance_id for p in preds}
        gaps.extend((model, i) for i in ids if i not in have)
    if gaps:
        raise CoverageGap(gaps)


def ensemble_select(
    per_model: Mapping[str, Sequence[PredictionRecord]],
    priority: Sequence[str] | None = None,
    name: str | None = None,
) -> list[PredictionRecord]:
    """Per instance, the prediction with the highest log-likelihood.

    Ties go to the model listed first in ``priority`` (default: mapping
    order).  The emitted record keeps the winning model's name unless
    ``name`` is given.
    """
    models = list(priority) if priority is not None else list(per_model)
    missing = [m for m in per_model if m not in models]
    models.extend(missing)
    by_model = {m: {p.instance_id: p for p in per_model[m]} for m in models if m in per_model}
    ids: list[str] = []
    seen: set[str] = set()
    for m in by_model:
        for p in per_model[m]:
            if p.instance_id not in seen:
                seen.add(p.instance_id)
                ids.append(p.instance_id)
    check_coverage(per_model, ids)
    out = []
    for iid in ids:
        best = None
        for m in by_model:
            p = by_model[m][iid]
            if best is None or p.log_likelihood > best.log_likelihood:
                best = p
        if name is not None:
            best = PredictionRecord(best.instance_id, name, best.prediction, best.log_likelihood)
        out.append(best)
    return out


# -- report -------------------------------------------------------------------


@dataclass
class ModelRow:
    model: str
    correct: int
    total: int
    percent: float


@dataclass
class ComparisonRow:
    model: str
    baseline: str
    b: int
    c: int
    statistic: float
    method: str
    p_value: float
    p_holm: float | None
    odds_ratio: float
    shared: float | None
    only_baseline: float | None
    only_model: float | None
    degenerate: bool = False


@dataclass
class EvalReport:
    baseline: str
    models: list[ModelRow]
    comparisons: list[ComparisonRow]
    buckets: dict[str, list[BucketRow]]
    ensemble: ModelRow | None = None
    ensemble_comparison: ComparisonRow | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _finite(
            {
                "baseline": self.baseline,
                "models": [asdict(r) for r in self.models],
                "comparisons": [asdict(r) for r in self.comparisons],
                "buckets": {m: [asdict(r) for r in rows] for m, rows in self.buckets.items()},
                "ensemble": asdict(self.ensemble) if self.ensemble else None,
                "ensemble_comparison": asdict(self.ensemble_comparison) if self.ensemble_comparison else None,
                "notes": list(self.notes),
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> EvalReport:
        def comp(x):
            if x is None:
                return None
            x = dict(x)
            x["odds_ratio"] = _unfinite(x["odds_ratio"])
            return ComparisonRow(**x)

        return cls(
            baseline=d["baseline"],
            models=[ModelRow(**r) for r in d["models"]],
            comparisons=[comp(c) for c in d["comparisons"]],
            buckets={m: [BucketRow(**r) for r in rows] for m, rows in d["buckets"].items()},
            ensemble=ModelRow(**d["ensemble"]) if d.get("ensemble") else None,
            ensemble_comparison=comp(d.get("ensemble_comparison")),
            notes=list(d.get("notes", [])),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"baseline: {self.baseline}", "", "accuracy"]
        rows = self.models + ([self.ensemble] if self.ensemble else [])
        width = max(len(r.model) for r in rows)
        for r in rows:
            lines.append(f"  {r.model:<{width}}  {r.correct:>7d}/{r.total:<7d} {r.percent:6.2f}%")
        comps = self.comparisons + ([self.ensemble_comparison] if self.ensemble_comparison else [])
        if comps:
            lines += ["", "versus baseline (b = baseline only, c = model only)"]
            for c in comps:
                holm = f"{c.p_holm:.4g}" if c.p_holm is not None else "-"
                shared = (
                    f"{c.shared:.2f}/{c.only_baseline:.2f}/{c.only_model:.2f}" if c.shared is not None else "-"
                )
                lines.append(
                    f"  {c.model:<{width}}  b={c.b} c={c.c} {c.method} p={c.p_value:.4g} "
                    f"holm={holm} OR={_fmt(c.odds_ratio)} shared/base/model%={shared}"
                )
        lines += ["", "confidence buckets (n, % correct)"]
        for model, rows_ in self.buckets.items():
            cells = " ".join(f"{r.n}:{'-' if r.percent is None else f'{r.percent:.1f}'}" for r in rows_)
            lines.append(f"  {model:<{width}}  {cells}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"

    def buckets_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "bucket", "low", "high", "n", "correct", "percent"])
        for model, rows in self.buckets.items():
            for r in rows:
                w.writerow([model, r.bucket, f"{r.low:.2f}", f"{r.high:.2f}", r.n, r.correct,
                            "" if r.percent is None else f"{r.percent:.2f}"])
        return buf.getvalue()


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf"
    return f"{x:.3f}"


def _finite(obj):
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [_finite(v) for v in obj]
    return obj


def _unfinite(x):
    if x is None:
        return math.nan
    if isinstance(x, str):
        return float(x)
    return x


def _compare(name, baseline, base_ok, model_ok) -> ComparisonRow:
    r = mcnemar_test(base_ok, model_ok)
    try:
        shared, only_b, only_m = complementarity(base_ok, model_ok)
    except EmptyUnion:
        shared = only_b = only_m = None
    return ComparisonRow(name, baseline, r.b, r.c, r.statistic, r.method, r.p_value, None,
                         r.odds_ratio, shared, only_b, only_m, r.degenerate)


def build_report(
    references: Mapping[str, str],
    per_model: Mapping[str, Sequence[PredictionRecord]],
    baseline: str,
    ensemble: bool = True,
    priority: Sequence[str] | None = None,
) -> EvalReport:
    """Accuracy, McNemar/Holm/OR and complementarity against ``baseline``, buckets, ensemble.

    Holm's correction covers the family of model-versus-baseline tests; the
    ensemble comparison is reported separately, outside that family.
    """
    if baseline not in per_model:
        raise KeyError(f"baseline model {baseline!r} has no predictions")
    models = list(priority) if priority else list(per_model)
    models += [m for m in per_model if m not in models]
    models = [m for m in models if m in per_model]
    check_coverage(per_model, references)
    ok = {m: correct_ids(per_model[m], references) for m in models}
    total = len(references)
    rows = [ModelRow(m, len(ok[m]), total, percent(len(ok[m]), total)) for m in models]
    comps = [_compare(m, baseline, ok[baseline], ok[m]) for m in models if m != baseline]
    for row, adj in zip(comps, holm_adjust([c.p_value for c in comps])):
        row.p_holm = adj
    buckets = {m: bucket_by_confidence(per_model[m], references) for m in models}
    report = EvalReport(baseline, rows, comps, buckets)
    report.notes.append("t is anchored on committer time")
    if ensemble and len(models) > 1:
        chosen = ensemble_select({m: per_model[m] for m in models}, models, name="ensemble")
        ens_ok = correct_ids(chosen, references)
        report.ensemble = ModelRow("ensemble", len(ens_ok), total, percent(len(ens_ok), total))
        report.ensemble_comparison = _compare("ensemble", baseline, ok[baseline], ens_ok)
        report.buckets["ensemble"] = bucket_by_confidence(chosen, references)
    return report


def write_report(report: EvalReport, out_dir: str | Path, stem: str = "report") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.txt", out / f"{stem}.json", out / f"{stem}_buckets.csv"]
    for path, text in zip(paths, (report.to_text(), report.to_json(), report.buckets_csv())):
        path.write_text(text, encoding="utf-8")
    return paths
