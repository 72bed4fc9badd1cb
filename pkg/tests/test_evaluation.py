from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.contingency_tables import mcnemar as sm_mcnemar
from statsmodels.stats.multitest import multipletests

from ctxcomp.errors import CoverageGap, EmptyUnion, MissingInstance, PositiveLogLik, SchemaError
from ctxcomp.evaluation import (
    EvalReport,
    PredictionRecord,
    accuracy,
    bucket_by_confidence,
    bucket_of,
    build_report,
    complementarity,
    confidence,
    correct_ids,
    ensemble_select,
    holm_adjust,
    is_correct,
    mcnemar_from_counts,
    mcnemar_test,
    percent,
    read_predictions,
    write_predictions,
    write_report,
)


def P(iid, model, pred, ll=-1.0):
    return PredictionRecord(iid, model, pred, ll)


# -- correctness ---------------------------------------------------------------


def test_is_correct_examples():
    assert not is_correct("x=1 ;", "x = 1;")
    assert is_correct("a  +  b", "a + b")
    assert is_correct("  a\t+\nb ", "a + b")
    assert is_correct("return x;", "return x;")
    assert not is_correct("x=1;", "x=2;")


@given(st.text(alphabet="ab \t\n;", max_size=12), st.text(alphabet="ab \t\n;", max_size=12))
def test_is_correct_symmetric_and_reflexive(a, b):
    assert is_correct(a, a)
    assert is_correct(a, b) == is_correct(b, a)


def test_accuracy_examples():
    refs = {str(i): "ok" for i in range(8525)}
    preds = [P(str(i), "m", "ok" if i < 2607 else "no") for i in range(8525)]
    assert accuracy(preds, refs) == (2607, 30.58)
    assert percent(3191, 8525) == 37.43
    assert accuracy([P("0", "m", "no")], refs) == (0, 0.0)
    with pytest.raises(MissingInstance):
        accuracy([P("zzz", "m", "ok")], refs)


def test_percent_rounds_half_up():
    assert percent(1, 8) == 12.5
    assert percent(1, 800) == 0.13  # 0.125 rounds up
    assert percent(0, 0) == 0.0


# -- McNemar -------------------------------------------------------------------


def test_odds_ratio_examples():
    assert round(mcnemar_from_counts(829, 1359).odds_ratio, 2) == 1.64
    assert round(mcnemar_from_counts(940, 1157).odds_ratio, 2) == 1.23


def test_exact_small_table():
    r = mcnemar_from_counts(0, 10)
    assert r.method == "exact_binomial"
    assert r.p_value == pytest.approx(2 * 0.5**10)
    assert r.odds_ratio == math.inf


def test_degenerate_table():
    r = mcnemar_from_counts(0, 0)
    assert r.degenerate and r.p_value == 1.0 and math.isnan(r.odds_ratio)


@pytest.mark.parametrize("b,c", [(3, 9), (0, 24), (12, 12), (1, 5), (24, 0)])
def test_exact_matches_statsmodels(b, c):
    ref = sm_mcnemar(np.array([[5, b], [c, 5]]), exact=True)
    ours = mcnemar_from_counts(b, c)
    assert ours.method == "exact_binomial"
    assert ours.p_value == pytest.approx(min(1.0, ref.pvalue), abs=1e-12)
    assert ours.statistic == ref.statistic


@settings(max_examples=200)
@given(st.integers(0, 400), st.integers(0, 400))
def test_chi_square_matches_statsmodels(b, c):
    if b + c < 25 or b == c:
        return  # exact region, or the clamped |b - c| - 1 < 0 case
    ref = sm_mcnemar(np.array([[0, b], [c, 0]]), exact=False, correction=True)
    ours = mcnemar_from_counts(b, c)
    assert ours.method == "chi_square_cc"
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-300)


def test_equal_discordant_counts_not_significant():
    r = mcnemar_from_counts(30, 30)
    assert r.statistic == 0.0 and r.p_value == 1.0


@given(st.sets(st.integers(0, 60)), st.sets(st.integers(0, 60)))
def test_swap_inverts_odds_ratio(a, b):
    ab, ba = mcnemar_test(a, b), mcnemar_test(b, a)
    assert ab.p_value == pytest.approx(ba.p_value)
    assert 0.0 <= ab.p_value <= 1.0
    if ab.b and ab.c:
        assert ab.odds_ratio == pytest.approx(1 / ba.odds_ratio)


def test_universe_check():
    with pytest.raises(MissingInstance):
        mcnemar_test({"a"}, {"b"}, universe={"a"})
    assert mcnemar_test({"a"}, {"b"}, universe={"a", "b"}).b == 1


# -- Holm ----------------------------------------------------------------------


def test_holm_examples():
    assert holm_adjust([0.01, 0.04, 0.02]) == pytest.approx([0.03, 0.04, 0.04])
    assert holm_adjust([0.2]) == [0.2]
    assert holm_adjust([0.9, 0.9]) == [1.0, 1.0]
    assert holm_adjust([]) == []
    with pytest.raises(ValueError):
        holm_adjust([1.5])


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_holm_matches_statsmodels_and_bounds(ps):
    ours = holm_adjust(ps)
    ref = multipletests(ps, method="holm")[1]
    assert ours == pytest.approx(list(ref), abs=1e-12)
    m = len(ps)
    for p, q in zip(ps, ours):
        assert p - 1e-15 <= q <= min(1.0, p * m) + 1e-15
    order = sorted(range(m), key=lambda i: ps[i])
    assert [ours[i] for i in order] == sorted(ours)


# -- complementarity, confidence, buckets ------------------------------------------


def test_complementarity_examples():
    a = set(range(2607))
    b = set(range(2607 - 2502, 2607 - 2502 + 3191))
    assert len(a & b) == 2502 and len(a | b) == 3296
    assert complementarity(a, b) == (75.91, 3.19, 20.9)
    assert complementarity({1, 2}, {1, 2}) == (100.0, 0.0, 0.0)
    assert complementarity({1}, {2, 3, 4}) == (0.0, 25.0, 75.0)
    with pytest.raises(EmptyUnion):
        complementarity(set(), set())


@given(st.sets(st.integers(0, 50)), st.sets(st.integers(0, 50)))
def test_complementarity_sums_to_hundred(a, b):
    if a | b:
        assert sum(complementarity(a, b)) == pytest.approx(100, abs=0.02)


def test_confidence():
    assert round(confidence(-1), 4) == 0.3679
    assert confidence(0) == 1.0
    assert round(confidence(-2), 4) == 0.1353
    with pytest.raises(PositiveLogLik):
        confidence(0.5)


def test_bucket_boundaries():
    assert bucket_of(0.05) == 1
    assert bucket_of(0.10) == 1
    assert bucket_of(0.1000001) == 2
    assert bucket_of(0.0) == 1
    assert bucket_of(1.0) == 10
    assert bucket_of(0.95) == 10


def test_bucket_rows():
    refs = {"a": "x", "b": "x", "c": "x"}
    preds = [P("a", "m", "x", math.log(0.05)), P("b", "m", "x", math.log(0.5)), P("c", "m", "x", 0.0)]
    rows = bucket_by_confidence(preds, refs)
    assert len(rows) == 10
    assert [(r.bucket, r.n) for r in rows if r.n] == [(1, 1), (5, 1), (10, 1)]
    assert all(r.percent == 100.0 for r in rows if r.n)
    assert all(r.percent is None for r in rows if not r.n)


# -- ensemble ----------------------------------------------------------------------


def test_ensemble_argmax_and_ties():
    per = {
        "A": [P("i", "A", "a", math.log(0.8)), P("j", "A", "a", -1.0)],
        "B": [P("i", "B", "b", math.log(0.6)), P("j", "B", "b", -1.0)],
    }
    out = {p.instance_id: p for p in ensemble_select(per)}
    assert out["i"].model_name == "A"
    assert out["j"].model_name == "A"
    assert {p.instance_id: p.model_name for p in ensemble_select(per, ["B", "A"])}["j"] == "B"
    assert all(p.model_name == "ens" for p in ensemble_select(per, name="ens"))


def test_ensemble_coverage_gap():
    per = {"A": [P("i", "A", "a"), P("j", "A", "a")], "B": [P("i", "B", "b")]}
    with pytest.raises(CoverageGap) as err:
        ensemble_select(per)
    assert err.value.gaps == [("B", "j")]


def test_ensemble_bounded_by_union_oracle():
    refs = {"1": "ok", "2": "ok", "3": "ok", "4": "ok"}
    per = {
        "A": [P("1", "A", "ok", -0.1), P("2", "A", "no", -0.2), P("3", "A", "no", -3.0), P("4", "A", "no", -1.0)],
        "B": [P("1", "B", "no", -2.0), P("2", "B", "ok", -0.5), P("3", "B", "ok", -0.3), P("4", "B", "no", -0.1)],
    }
    ens = correct_ids(ensemble_select(per), refs)
    union = correct_ids(per["A"], refs) | correct_ids(per["B"], refs)
    assert ens == {"1", "3"}
    assert len(ens) <= len(union) == 3


# -- report ------------------------------------------------------------------------


def four_instance_fixture():
    refs = {"1": "a;", "2": "b;", "3": "c;", "4": "d;"}
    per = {
        "base": [P("1", "base", "a;", -0.1), P("2", "base", "x", -2.0), P("3", "base", "c;", -0.5),
                 P("4", "base", "x", -0.05)],
        "calls": [P("1", "calls", "a;", -0.3), P("2", "calls", "b;", -0.2), P("3", "calls", "x", -3.0),
                  P("4", "calls", "d;", -0.9)],
    }
    return refs, per


def test_report_cells_recomputed_by_hand(tmp_path):
    refs, per = four_instance_fixture()
    rep = build_report(refs, per, "base")
    assert [(r.model, r.correct, r.percent) for r in rep.models] == [("base", 2, 50.0), ("calls", 3, 75.0)]
    (c,) = rep.comparisons
    # base-only {3}, calls-only {2, 4}
    assert (c.b, c.c, c.method) == (1, 2, "exact_binomial")
    assert c.p_value == 1.0 and c.p_holm == 1.0 and c.odds_ratio == 2.0
    assert (c.shared, c.only_baseline, c.only_model) == (25.0, 25.0, 50.0)
    # ensemble picks base for 1 (-0.1), calls for 2 (-0.2), base for 3 (-0.5), base for 4 (-0.05)
    assert (rep.ensemble.correct, rep.ensemble.percent) == (3, 75.0)
    assert rep.ensemble_comparison.c == 1
    assert set(rep.buckets) == {"base", "calls", "ensemble"}
    back = EvalReport.from_dict(json.loads(rep.to_json()))
    assert back.to_dict() == rep.to_dict()
    paths = write_report(rep, tmp_path)
    assert [p.name for p in paths] == ["report.txt", "report.json", "report_buckets.csv"]
    assert "calls" in paths[0].read_text()
    assert paths[2].read_text().splitlines()[0] == "model,bucket,low,high,n,correct,percent"


def test_report_single_model_and_errors():
    refs, per = four_instance_fixture()
    rep = build_report(refs, {"base": per["base"]}, "base")
    assert rep.comparisons == [] and rep.ensemble is None
    with pytest.raises(KeyError):
        build_report(refs, per, "nope")
    short = {"base": per["base"][:3], "calls": per["calls"]}
    with pytest.raises(CoverageGap):
        build_report(refs, short, "base")


def test_report_infinite_odds_serialise():
    refs = {"1": "a", "2": "b"}
    per = {"base": [P("1", "base", "x"), P("2", "base", "x")], "m": [P("1", "m", "a"), P("2", "m", "b")]}
    rep = build_report(refs, per, "base", ensemble=False)
    d = json.loads(rep.to_json())
    assert d["comparisons"][0]["odds_ratio"] == "inf"
    assert EvalReport.from_dict(d).comparisons[0].odds_ratio == math.inf


# -- files -------------------------------------------------------------------------


def test_prediction_io(tmp_path):
    preds = [P("1", "m", "a;", -0.5), P("2", "m", "b ;", 0.0)]
    path = tmp_path / "p.jsonl"
    write_predictions(preds, path)
    assert read_predictions(path) == preds
    assert set(json.loads(path.read_text().splitlines()[0])) == {"instance_id", "model", "prediction", "log_likelihood"}


@pytest.mark.parametrize(
    "bad",
    [
        '{"instance_id": "1", "model": "m", "prediction": "x", "log_likelihood": 0.2}',
        '{"instance_id": "1", "model": "m", "prediction": "x"}',
        '{"instance_id": "0", "model": "m", "prediction": "x", "log_likelihood": -1}',
        "nonsense",
    ],
)
def test_prediction_schema_errors(tmp_path, bad):
    path = tmp_path / "p.jsonl"
    path.write_text('{"instance_id": "0", "model": "m", "prediction": "x", "log_likelihood": -1}\n' + bad + "\n")
    with pytest.raises(SchemaError) as err:
        read_predictions(path)
    assert err.value.line == 2
