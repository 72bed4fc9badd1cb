from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxcomp.codemodel import extract_methods
from ctxcomp.dataset import (
    MARKER,
    DatasetRecord,
    MaskedInstance,
    chunk_changed,
    dedup_instances,
    instance_key,
    intersect_datasets,
    mask_method,
    read_dataset,
    split_dataset,
    write_dataset,
)
from ctxcomp.errors import SchemaError

T = datetime(2021, 1, 1, tzinfo=timezone.utc)
FIVE = "class C { int f(int n) { int a = n; a++; if (a > 2) { a--; } return a; } }"


def five():
    (m,) = extract_methods(FIVE, "C.java", repo="r")
    assert len(m.statements) == 5
    return m


def inst(iid, method_id="m", im="x", target="y"):
    return MaskedInstance(iid, method_id, im, target, (0,), "sha", T, "dev")


# -- masking -------------------------------------------------------------------


def test_five_changed_statements_give_three_instances():
    m = five()
    out = mask_method(m, [0, 1, 2, 3, 4], "c", T, "Alice <a@x>")
    assert [i.masked_indices for i in out] == [(0, 1), (2, 3), (4,)]
    assert out[2].target == "return a;"
    assert out[0].target == "int a = n; a++;"
    assert out[2].im_text.count(MARKER) == 1
    assert out[2].im_text.endswith(f"{MARKER} }}")


def test_single_and_gapped_changes():
    m = five()
    (one,) = mask_method(m, [1], "c", T, "d")
    assert one.masked_indices == (1,) and one.target == "a++;"
    gapped = mask_method(m, {0, 3}, "c", T, "d")
    assert [i.masked_indices for i in gapped] == [(0,), (3,)]


def test_mask_rejects_out_of_range():
    with pytest.raises(IndexError):
        mask_method(five(), [7], "c", T, "d")


def test_instance_fields_and_reconstruct():
    m = five()
    for i in mask_method(m, range(5), "sha1", T, "dev"):
        assert i.reconstruct() == m.text
        assert i.instance_id == instance_key(m.id, i.masked_indices)
        assert i.method_id == m.id and i.repo == "r" and i.commit_sha == "sha1"
        assert MARKER not in i.unmasked_text
        assert MaskedInstance.from_dict(i.to_dict()) == i


@given(st.sets(st.integers(0, 30)))
def test_chunks_are_disjoint_consecutive_and_cover(changed):
    chunks = chunk_changed(changed)
    flat = [i for c in chunks for i in c]
    assert sorted(flat) == sorted(changed) and len(flat) == len(set(flat))
    for c in chunks:
        assert len(c) in (1, 2)
        if len(c) == 2:
            assert c[1] == c[0] + 1


def test_instance_key_ignores_order():
    assert instance_key("m", [3, 2]) == instance_key("m", (2, 3))
    assert instance_key("m", [2]) != instance_key("n", [2])
    assert len(instance_key("m", [1])) == 16


# -- dedup and intersection ---------------------------------------------------------


def test_dedup():
    a, b = inst("1", im="same"), inst("2", im="same")
    c = inst("3", im="other", target="y")
    assert dedup_instances([a, b, c]) == [a, c]
    assert dedup_instances([inst("1", im="p"), inst("2", im="q")]) == [inst("1", im="p"), inst("2", im="q")]
    assert dedup_instances([]) == []


def test_intersect():
    assert intersect_datasets({"a": ["1", "2", "3"], "b": ["2", "3", "4"]}) == {"2", "3"}
    same = [inst("1"), inst("2")]
    assert intersect_datasets({"a": same, "b": same}) == {"1", "2"}
    # an instance without an open issue is missing from the issue variant
    assert intersect_datasets({"baseline": same, "issue_title": same[1:]}) == {"2"}
    assert intersect_datasets({}) == set()


# -- splitting ---------------------------------------------------------------------


def test_split_ten_single_instance_methods():
    xs = [inst(str(i), method_id=f"m{i}") for i in range(10)]
    s = split_dataset(xs, seed=1)
    assert (len(s.train), len(s.eval), len(s.test)) == (8, 1, 1)


def test_split_keeps_methods_together():
    xs = [inst(f"a{i}", method_id="big") for i in range(3)] + [inst(str(i), method_id=f"m{i}") for i in range(7)]
    for seed in range(10):
        where = split_dataset(xs, seed=seed).of()
        assert len({where[f"a{i}"] for i in range(3)}) == 1


def test_split_is_deterministic_and_rejects_bad_ratios():
    xs = [inst(str(i), method_id=f"m{i % 13}") for i in range(40)]
    assert split_dataset(xs, seed=5) == split_dataset(xs, seed=5)
    assert split_dataset(xs, seed=5) != split_dataset(xs, seed=6)
    with pytest.raises(ValueError):
        split_dataset(xs, (0.5, 0.5, 0.5))


@settings(max_examples=100)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=60), st.integers(0, 1000))
def test_split_properties(sizes, seed):
    xs = [inst(f"{m}-{k}", method_id=f"m{m}") for m, n in enumerate(sizes) for k in range(n)]
    s = split_dataset(xs, seed=seed)
    parts = [set(s.train), set(s.eval), set(s.test)]
    assert sum(map(len, parts)) == len(xs) and set().union(*parts) == {x.instance_id for x in xs}
    n = len(xs)
    biggest = max(sizes)
    for got, ratio in ((len(s.eval), 0.1), (len(s.test), 0.1)):
        target = int(n * ratio + 1e-9)
        assert target <= got < target + biggest or (got == 0 and target == 0)


# -- files -------------------------------------------------------------------------


def record(i):
    return DatasetRecord(f"id{i}", "m", f"in {i} é", "out", ("method_calls",), i, "r", "sha", "2021-01-01T00:00:00+00:00")


def test_round_trip(tmp_path):
    recs = [record(i) for i in range(5)]
    path = tmp_path / "d.jsonl"
    write_dataset(recs, path)
    assert read_dataset(path) == recs
    for line in path.read_text(encoding="utf-8").splitlines():
        keys = list(json.loads(line))
        assert keys == sorted(keys)


def test_empty_file(tmp_path):
    path = tmp_path / "d.jsonl"
    write_dataset([], path)
    assert path.read_text() == ""
    assert read_dataset(path) == []


@pytest.mark.parametrize("bad", ["{not json", "[1, 2]", json.dumps({"instance_id": "x"}),
                                 json.dumps({**record(0).to_dict(), "truncated_tokens": True})])
def test_malformed_line_named(tmp_path, bad):
    path = tmp_path / "d.jsonl"
    good = json.dumps(record(0).to_dict())
    path.write_text("\n".join([good, good, bad, good]) + "\n")
    with pytest.raises(SchemaError) as err:
        read_dataset(path)
    assert err.value.line == 3
    assert "line 3" in str(err.value)
