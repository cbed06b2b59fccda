"""Schema loading, bucketization, ingestion, and exact predicate counts."""

import numpy as np
import pytest

from entsum.errors import IngestError, SchemaError
from entsum.schema import bucketize, count_predicate, ingest, load_schema

from conftest import handle_from_rows, make_schema, random_rows, write_csv


def test_load_schema_three_binary_categoricals():
    doc = {"attributes": [
        {"name": "A", "kind": "categorical", "values": ["a1", "a2"]},
        {"name": "B", "kind": "categorical", "values": ["b1", "b2"]},
        {"name": "C", "kind": "categorical", "values": ["c1", "c2"]},
    ]}
    schema = load_schema(doc)
    assert schema.d == 8
    assert schema.sizes == (2, 2, 2)
    assert [a.name for a in schema.attributes] == ["A", "B", "C"]


def test_load_schema_flights_coarse_sizes():
    sizes = (307, 54, 54, 62, 81)
    doc = {"attributes": [
        {"name": f"x{i}", "kind": "numeric", "lo": 0, "hi": s, "buckets": s}
        for i, s in enumerate(sizes)
    ]}
    schema = load_schema(doc)
    assert schema.d == 307 * 54 * 54 * 62 * 81
    assert 4.4e9 < schema.d < 4.6e9


def test_load_schema_degenerate_single_bucket():
    schema = load_schema({"attributes": [
        {"name": "only", "kind": "numeric", "lo": 0, "hi": 1, "buckets": 1},
    ]})
    assert schema.d == 1


def test_load_schema_rejects_duplicates_and_bad_buckets():
    with pytest.raises(SchemaError):
        load_schema({"attributes": [
            {"name": "A", "kind": "categorical", "values": ["x"]},
            {"name": "A", "kind": "categorical", "values": ["y"]},
        ]})
    with pytest.raises(SchemaError):
        load_schema({"attributes": [
            {"name": "A", "kind": "numeric", "lo": 0, "hi": 1, "buckets": 0},
        ]})
    with pytest.raises(SchemaError):
        load_schema({"attributes": [
            {"name": "A", "kind": "numeric", "lo": 2, "hi": 1, "buckets": 3},
        ]})
    with pytest.raises(SchemaError):
        load_schema("not json at all {")


def test_bucketize_equi_width():
    schema = load_schema({"attributes": [
        {"name": "A", "kind": "numeric", "lo": 0, "hi": 100, "buckets": 10},
    ]})
    assert bucketize(schema, 0, 37) == 3
    assert bucketize(schema, 0, 0) == 0
    assert bucketize(schema, 0, 99.999) == 9


def test_bucketize_clamps_out_of_range():
    schema = load_schema({"attributes": [
        {"name": "A", "kind": "numeric", "lo": 0, "hi": 100, "buckets": 10},
    ]})
    assert bucketize(schema, 0, 100) == 9     # raw == hi
    assert bucketize(schema, 0, 1234.5) == 9
    assert bucketize(schema, 0, -3) == 0


def test_bucketize_categorical_and_errors():
    schema = make_schema([2], categorical=True)
    assert bucketize(schema, 0, "a2") == 1
    with pytest.raises(SchemaError):
        bucketize(schema, 0, "zz")
    num = make_schema([4])
    with pytest.raises(SchemaError):
        bucketize(num, 0, float("nan"))


def test_bucketize_is_stable():
    schema = make_schema([7])
    rng = np.random.default_rng(7)
    for raw in rng.uniform(0, 7, size=200):
        assert bucketize(schema, 0, raw) == bucketize(schema, 0, raw)


def test_ingest_example_instance(ex1_schema, ex1_instance_csv):
    data = ingest(ex1_schema, ex1_instance_csv)
    assert data.row_count == 10
    assert ex1_schema.n == 10
    assert len(data.cell_counts) == 2
    assert data.cell_counts[(0, 0, 0)] == 1
    assert data.cell_counts[(0, 1, 1)] == 9


def test_ingest_drops_null_rows(tmp_path, ex1_schema):
    path = write_csv(tmp_path / "nulls.csv", ["A", "B", "C"], [
        ("a1", "b1", "c1"),
        ("a2", "", "c2"),
        ("a2", "b2", "c2"),
    ])
    data = ingest(ex1_schema, path)
    assert data.row_count == 2
    assert data.dropped_nulls == 1


def test_ingest_errors(tmp_path, ex1_schema):
    empty = write_csv(tmp_path / "empty.csv", ["A", "B", "C"], [])
    with pytest.raises(IngestError):
        ingest(ex1_schema, empty)
    missing = write_csv(tmp_path / "missing.csv", ["A", "B"], [("a1", "b1")])
    with pytest.raises(IngestError):
        ingest(ex1_schema, missing)
    with pytest.raises(IngestError):
        ingest(ex1_schema, tmp_path / "nonexistent.csv")


def test_count_predicate_worked_instance(ex1_schema, ex1_instance_csv):
    data = ingest(ex1_schema, ex1_instance_csv)
    m = ex1_schema.m
    assert count_predicate(data, (None,) * m) == 10
    assert count_predicate(data, ((0, 0), None, None)) == 10   # A=a1
    assert count_predicate(data, (None, (1, 1), None)) == 9    # B=b2
    assert count_predicate(data, (None, None, (0, 0))) == 1    # C=c1


def test_count_predicate_matches_row_scan(tmp_path):
    rng = np.random.default_rng(42)
    schema = make_schema([4, 3, 5])
    rows = random_rows(rng, schema.sizes, 50)
    data = handle_from_rows(schema, rows, tmp_path)
    for _ in range(40):
        pred = tuple(
            None if rng.random() < 0.3 else
            (lambda u, v: (min(u, v), max(u, v)))(
                int(rng.integers(0, size)), int(rng.integers(0, size)))
            for size in schema.sizes
        )
        expected = count_predicate(data, pred, via="scan")
        assert count_predicate(data, pred, via="cells") == expected
        assert count_predicate(data, pred) == expected


def test_one_d_counts_sum_to_n(tmp_path):
    rng = np.random.default_rng(3)
    schema = make_schema([6, 2, 4])
    data = handle_from_rows(schema, random_rows(rng, schema.sizes, 77), tmp_path)
    for i, attr in enumerate(schema.attributes):
        total = sum(
            count_predicate(
                data,
                tuple((v, v) if ii == i else None for ii in range(schema.m)))
            for v in range(attr.size)
        )
        assert total == 77


def test_count_predicate_rejects_out_of_bounds(tmp_path):
    schema = make_schema([3, 3])
    data = handle_from_rows(
        schema, np.array([[0, 0], [1, 2]]), tmp_path)
    with pytest.raises(SchemaError):
        count_predicate(data, ((0, 3), None))


def test_linear_index_bijection():
    schema = make_schema([3, 4, 2])
    seen = set()
    for lin in range(schema.d):
        coords = schema.coords_of(lin)
        assert schema.linear_index(coords) == lin
        seen.add(coords)
    assert len(seen) == schema.d


def test_ingest_clamps_and_counts(tmp_path):
    schema = make_schema([4])
    path = write_csv(tmp_path / "clamp.csv", ["A"], [("0",), ("4",), ("-1",), ("3.5",)])
    data = ingest(schema, path)
    assert data.row_count == 4
    assert data.clamped == 2
    assert data.freq[0].tolist() == [2, 0, 0, 2]
