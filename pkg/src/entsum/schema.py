"""Bucketized single-table schemas, CSV ingestion, and exact predicate counting.

The engine models one relation whose attributes each have a small discrete
active domain: either an explicit category list or an equi-width bucketization
of a numeric range.  A row maps to a vector of bucket indices; the cross
product of all attribute domains is the space of possible tuples, of size d.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import IngestError, SchemaError

logger = logging.getLogger(__name__)

# One per-attribute constraint: None means unconstrained, otherwise a closed
# interval [u, v] of bucket indices.  Used for statistics and query predicates.
Range = Optional[tuple[int, int]]
Ranges = tuple[Range, ...]

# Above this many possible tuples the exact cell-count map is not materialized
# and predicate counts always fall back to row scans.
CELL_MAP_CAP = 10_000_000


@dataclass(frozen=True)
class AttributeDomain:
    """One attribute's active domain: categories or equi-width numeric buckets."""

    name: str
    kind: str  # "categorical" | "numeric"
    values: tuple[str, ...] = ()
    lo: float = 0.0
    hi: float = 0.0
    buckets: int = 0

    def __post_init__(self):
        if self.kind == "categorical":
            if not self.values:
                raise SchemaError(f"attribute {self.name!r}: empty category list")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"attribute {self.name!r}: duplicate category labels")
        elif self.kind == "numeric":
            if self.buckets < 1:
                raise SchemaError(f"attribute {self.name!r}: bucket count must be >= 1")
            if not (self.lo < self.hi):
                raise SchemaError(f"attribute {self.name!r}: requires lo < hi")
        else:
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")

    @property
    def size(self) -> int:
        """Number of distinct domain values (N_i)."""
        if self.kind == "categorical":
            return len(self.values)
        return self.buckets

    @cached_property
    def _label_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.values)}

    def value_label(self, index: int) -> str:
        """Human-readable label for one bucket index."""
        if self.kind == "categorical":
            return self.values[index]
        width = (self.hi - self.lo) / self.buckets
        return f"[{self.lo + index * width:g},{self.lo + (index + 1) * width:g})"

    def to_dict(self) -> dict:
        if self.kind == "categorical":
            return {"name": self.name, "kind": "categorical", "values": list(self.values)}
        return {
            "name": self.name,
            "kind": "numeric",
            "lo": self.lo,
            "hi": self.hi,
            "buckets": self.buckets,
        }


@dataclass
class Schema:
    """Ordered attribute list plus the ingested relation cardinality n."""

    attributes: tuple[AttributeDomain, ...]
    n: int = 0

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute name in schema")
        if not self.attributes:
            raise SchemaError("schema needs at least one attribute")

    @property
    def m(self) -> int:
        return len(self.attributes)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.attributes)

    @property
    def d(self) -> int:
        """Total number of possible tuples; python ints never overflow."""
        out = 1
        for a in self.attributes:
            out *= a.size
        return out

    def attr_index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise SchemaError(f"unknown attribute {name!r}")

    def linear_index(self, coords: Sequence[int]) -> int:
        """Row-major linear index of a tuple, in [0, d)."""
        idx = 0
        for c, a in zip(coords, self.attributes):
            if not 0 <= c < a.size:
                raise SchemaError(f"coordinate {c} out of range for {a.name!r}")
            idx = idx * a.size + c
        return idx

    def coords_of(self, linear: int) -> tuple[int, ...]:
        """Inverse of linear_index."""
        if not 0 <= linear < self.d:
            raise SchemaError(f"linear index {linear} out of range")
        coords = [0] * self.m
        for i in range(self.m - 1, -1, -1):
            size = self.attributes[i].size
            coords[i] = linear % size
            linear //= size
        return tuple(coords)

    def all_true(self) -> Ranges:
        return (None,) * self.m

    def to_dict(self) -> dict:
        return {"attributes": [a.to_dict() for a in self.attributes]}


def load_schema(spec: Union[str, Path, dict]) -> Schema:
    """Build a Schema from a JSON document (path, JSON text, or parsed dict).

    Document shape: {"attributes": [{"name", "kind", "values" | "lo"/"hi"/"buckets"}]}.
    Attribute order in the document is the engine's attribute order.
    """
    if isinstance(spec, (str, Path)):
        p = Path(spec)
        if p.exists():
            text = p.read_text(encoding="utf-8")
        elif isinstance(spec, str) and spec.lstrip().startswith("{"):
            text = spec
        else:
            raise SchemaError(f"schema file not found: {spec}")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"malformed schema document: {e}") from e
    else:
        doc = spec
    if not isinstance(doc, dict) or "attributes" not in doc:
        raise SchemaError("schema document must contain an 'attributes' list")
    attrs = []
    for entry in doc["attributes"]:
        try:
            name = entry["name"]
            kind = entry.get("kind", "categorical" if "values" in entry else "numeric")
        except (TypeError, KeyError) as e:
            raise SchemaError(f"malformed attribute entry: {entry!r}") from e
        if kind == "categorical":
            attrs.append(AttributeDomain(name=name, kind="categorical",
                                         values=tuple(str(v) for v in entry["values"])))
        elif kind == "numeric":
            try:
                attrs.append(AttributeDomain(
                    name=name, kind="numeric",
                    lo=float(entry["lo"]), hi=float(entry["hi"]),
                    buckets=int(entry["buckets"]),
                ))
            except (KeyError, ValueError) as e:
                raise SchemaError(f"malformed numeric attribute {name!r}: {e}") from e
        else:
            raise SchemaError(f"attribute {name!r}: unknown kind {kind!r}")
    return Schema(attributes=tuple(attrs))


def bucketize(schema: Schema, attr_index: int, raw: Union[str, float, int]) -> int:
    """Map a raw value to its bucket index in [0, N_i).

    Numeric values use the equi-width rule floor((raw - lo) / width) over
    [lo, hi).  Values at or beyond hi clamp to the last bucket, values below
    lo clamp to bucket 0; both are counted by the caller as out-of-range.
    """
    attr = schema.attributes[attr_index]
    if attr.kind == "categorical":
        label = str(raw)
        try:
            return attr._label_index[label]
        except KeyError:
            raise SchemaError(f"unknown category {label!r} for attribute {attr.name!r}")
    value = float(raw)
    if math.isnan(value):
        raise SchemaError(f"NaN value for attribute {attr.name!r}")
    if value < attr.lo or value >= attr.hi:
        return 0 if value < attr.lo else attr.buckets - 1
    width = (attr.hi - attr.lo) / attr.buckets
    # min() guards the rare float case where (raw - lo) / width rounds up to N.
    return min(int((value - attr.lo) / width), attr.buckets - 1)


def _in_range(value: float, attr: AttributeDomain) -> bool:
    return attr.lo <= value < attr.hi


@dataclass
class DatasetHandle:
    """Immutable view of one ingested CSV: bucketized rows plus count caches."""

    source: str
    schema: Schema
    rows: np.ndarray  # shape (row_count, m), bucket indices
    row_count: int
    freq: list[np.ndarray] = field(default_factory=list)
    cell_counts: Optional[dict[tuple[int, ...], int]] = None
    dropped_nulls: int = 0
    clamped: int = 0

    def contingency(self, pair: tuple[int, int]) -> np.ndarray:
        """Exact 2D cell-count table for an attribute pair."""
        i1, i2 = pair
        n1, n2 = self.schema.attributes[i1].size, self.schema.attributes[i2].size
        flat = self.rows[:, i1].astype(np.int64) * n2 + self.rows[:, i2]
        return np.bincount(flat, minlength=n1 * n2).reshape(n1, n2)

    def marginal(self, attrs: Sequence[int]) -> np.ndarray:
        """Exact cell-count array over an arbitrary attribute subset."""
        sizes = [self.schema.attributes[i].size for i in attrs]
        flat = np.zeros(self.row_count, dtype=np.int64)
        for i, size in zip(attrs, sizes):
            flat = flat * size + self.rows[:, i]
        total = 1
        for s in sizes:
            total *= s
        return np.bincount(flat, minlength=total).reshape(sizes)


def ingest(
    schema: Schema,
    csv_path: Union[str, Path],
    cell_map_cap: int = CELL_MAP_CAP,
) -> DatasetHandle:
    """Read a CSV with header, bucketize every row, and build count caches.

    Rows containing a null (empty field) are dropped.  Numeric values outside
    [lo, hi) are clamped into the boundary bucket and counted in `clamped`.
    Sets schema.n to the number of kept rows.  The exact cell-count map is
    materialized only while the tuple space stays within cell_map_cap;
    beyond it every count comes from a row scan.
    """
    path = Path(csv_path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as e:
        raise IngestError(f"cannot read {path}: {e}") from e
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file")
        col_of = {}
        for attr in schema.attributes:
            if attr.name not in header:
                raise IngestError(f"{path}: missing column {attr.name!r}")
            col_of[attr.name] = header.index(attr.name)
        cols = [col_of[a.name] for a in schema.attributes]

        kept = []
        dropped = 0
        clamped = 0
        for row in reader:
            if not row:
                continue
            fields = [row[c] if c < len(row) else "" for c in cols]
            if any(f == "" for f in fields):
                dropped += 1
                continue
            coords = []
            for i, f in enumerate(fields):
                attr = schema.attributes[i]
                try:
                    if attr.kind == "numeric" and not _in_range(float(f), attr):
                        clamped += 1
                    coords.append(bucketize(schema, i, f))
                except ValueError as e:
                    raise IngestError(
                        f"{path}: row {reader.line_num}: bad value {f!r} "
                        f"for attribute {attr.name!r}"
                    ) from e
            kept.append(coords)

    if not kept:
        raise IngestError(f"{path}: zero usable rows after null filtering")
    if clamped:
        logger.warning("%s: %d values outside declared ranges were clamped", path, clamped)

    rows = np.asarray(kept, dtype=np.int64)
    freq = [
        np.bincount(rows[:, i], minlength=schema.attributes[i].size)
        for i in range(schema.m)
    ]
    cell_counts = None
    if schema.d <= cell_map_cap:
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        cell_counts = {tuple(int(x) for x in u): int(c) for u, c in zip(uniq, counts)}
    schema.n = len(kept)
    return DatasetHandle(
        source=str(path),
        schema=schema,
        rows=rows,
        row_count=len(kept),
        freq=freq,
        cell_counts=cell_counts,
        dropped_nulls=dropped,
        clamped=clamped,
    )


def count_predicate(data: DatasetHandle, predicate: Ranges, via: str = "auto") -> int:
    """Exact number of rows satisfying a conjunction of per-attribute ranges.

    `via` selects the counting path: "cells" uses the materialized cell map,
    "scan" scans the row matrix, "auto" prefers the cell map when present.
    Both paths agree by construction and are cross-checked in tests.
    """
    for r, attr in zip(predicate, data.schema.attributes):
        if r is not None:
            u, v = r
            if not (0 <= u <= v < attr.size):
                raise SchemaError(f"predicate range {r} out of bounds for {attr.name!r}")
    if via == "auto":
        via = "cells" if data.cell_counts is not None else "scan"
    if via == "cells":
        if data.cell_counts is None:
            raise IngestError("cell map not materialized for this dataset")
        total = 0
        for coords, c in data.cell_counts.items():
            if all(r is None or r[0] <= coords[i] <= r[1] for i, r in enumerate(predicate)):
                total += c
        return total
    if via != "scan":
        raise ValueError(f"unknown counting path {via!r}")
    mask = np.ones(data.row_count, dtype=bool)
    for i, r in enumerate(predicate):
        if r is not None:
            col = data.rows[:, i]
            mask &= (col >= r[0]) & (col <= r[1])
    return int(mask.sum())
