"""Counting queries against a fitted summary.

A query is a conjunction of per-attribute constraints.  Answering never
touches the data: set every 1D variable whose value fails its attribute's
constraint to zero, evaluate the polynomial, and scale by n over the cached
unrestricted value.  2D variables are never zeroed.  Group-by enumerates one
zeroing per group.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ParseError, PlanTooLargeError, SummaryFormatError
from .polynomial import (
    Assignment,
    CompressedPolynomial,
    VariableStore,
    build_compressed,
    evaluate,
)
from .schema import Ranges, Schema, bucketize, load_schema
from .stats import Statistic, StatisticSet

FORMAT_VERSION = 1

# A group-by plan enumerating more groups than this is rejected outright.
MAX_GROUPS = 100_000


@dataclass
class Summary:
    """The queryable artifact: statistics, fitted values, and cached P."""

    stats: StatisticSet
    store: VariableStore
    n: int
    p_value: float
    poly: CompressedPolynomial
    meta: dict = field(default_factory=dict)

    @property
    def schema(self) -> Schema:
        return self.stats.schema

    @classmethod
    def from_solution(cls, poly, state, meta=None) -> "Summary":
        return cls(
            stats=poly.stats,
            store=state.store,
            n=state.n,
            p_value=state.p_value,
            poly=poly,
            meta=dict(meta or {}),
        )


@dataclass(frozen=True)
class QueryPlan:
    predicates: Ranges
    group_by: tuple[int, ...] = ()
    order_desc_limit: Optional[int] = None


@dataclass(frozen=True)
class GroupRow:
    values: tuple[str, ...]
    raw: float
    rounded: int


@dataclass
class QueryAnswer:
    rows: list[GroupRow]
    wall_ms: float

    @property
    def total_raw(self) -> float:
        return sum(r.raw for r in self.rows)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>-?\d+(?:\.\d+)?)|(?P<str>'(?:[^']|'')*')"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<sym>[(),=\[\]*]))"
)

_KEYWORDS = {
    "select", "count", "from", "where", "and", "in",
    "group", "by", "order", "desc", "limit", "as",
}


def _tokenize(sql: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:
            if sql[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {sql[pos]!r} at offset {pos}")
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num")))
        elif m.lastgroup == "str":
            tokens.append(("str", m.group("str")[1:-1].replace("''", "'")))
        elif m.lastgroup == "name":
            word = m.group("name")
            if word.lower() in _KEYWORDS:
                tokens.append(("kw", word.lower()))
            else:
                tokens.append(("name", word))
        else:
            tokens.append(("sym", m.group("sym")))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind, value=None):
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            raise ParseError(f"expected {value or kind}, found {v!r}")
        return v

    def accept(self, kind, value=None):
        k, v = self.peek()
        if k == kind and (value is None or v == value):
            self.pos += 1
            return True
        return False


def parse_query(sql: str, schema: Schema) -> QueryPlan:
    """Parse one counting query into per-attribute bucket constraints.

    Grammar: SELECT [attrs,] COUNT(*) [AS name] FROM name
             [WHERE attr = lit | attr IN [lit, lit] AND ...]
             [GROUP BY attrs] [ORDER BY name DESC LIMIT k].
    Literals convert to bucket indices; a numeric range keeps every bucket it
    touches.  Attributes without constraints stay unconstrained.
    """
    p = _Parser(_tokenize(sql))
    p.expect("kw", "select")
    select_attrs = []
    while True:
        kind, value = p.peek()
        if kind == "kw" and value == "count":
            p.next()
            p.expect("sym", "(")
            p.expect("sym", "*")
            p.expect("sym", ")")
            if p.accept("kw", "as"):
                if not p.accept("name"):
                    p.expect("kw")  # alias may collide with a keyword
            break
        if kind == "name":
            select_attrs.append(value)
            p.next()
            p.expect("sym", ",")
            continue
        raise ParseError(f"expected attribute or COUNT(*), found {value!r}")
    p.expect("kw", "from")
    if not p.accept("name"):
        raise ParseError("expected relation name after FROM")

    constraints: dict[int, tuple[int, int]] = {}
    if p.accept("kw", "where"):
        while True:
            name = p.expect("name")
            attr_idx = _resolve_attr(schema, name)
            if p.accept("sym", "="):
                kind, value = p.next()
                if kind not in ("num", "str"):
                    raise ParseError(f"expected literal after =, found {value!r}")
                v = bucketize(schema, attr_idx, value)
                interval = (v, v)
            elif p.accept("kw", "in"):
                p.expect("sym", "[")
                lo = _literal(p)
                p.expect("sym", ",")
                hi = _literal(p)
                p.expect("sym", "]")
                u = bucketize(schema, attr_idx, lo)
                v = bucketize(schema, attr_idx, hi)
                if u > v:
                    raise ParseError(f"empty range for attribute {name!r}")
                interval = (u, v)
            else:
                raise ParseError(f"expected = or IN for attribute {name!r}")
            if attr_idx in constraints:
                old = constraints[attr_idx]
                u, v = max(old[0], interval[0]), min(old[1], interval[1])
                if u > v:
                    raise ParseError(f"contradictory constraints on {name!r}")
                interval = (u, v)
            constraints[attr_idx] = interval
            if not p.accept("kw", "and"):
                break

    group_by: list[int] = []
    if p.accept("kw", "group"):
        p.expect("kw", "by")
        group_by.append(_resolve_attr(schema, p.expect("name")))
        while p.accept("sym", ","):
            group_by.append(_resolve_attr(schema, p.expect("name")))

    limit = None
    if p.accept("kw", "order"):
        p.expect("kw", "by")
        if not (p.accept("name") or p.accept("kw", "count")):
            raise ParseError("expected sort column after ORDER BY")
        p.expect("kw", "desc")
        p.expect("kw", "limit")
        limit = int(p.expect("num"))
        if limit < 1:
            raise ParseError("LIMIT must be positive")

    kind, value = p.peek()
    if kind is not None:
        raise ParseError(f"unexpected trailing input at {value!r}")

    for name in select_attrs:
        idx = _resolve_attr(schema, name)
        if idx not in group_by:
            raise ParseError(f"selected attribute {name!r} must appear in GROUP BY")
    for idx in group_by:
        if idx in constraints:
            raise ParseError(
                f"attribute {schema.attributes[idx].name!r} is both grouped and constrained")

    predicates = tuple(constraints.get(i) for i in range(schema.m))
    return QueryPlan(
        predicates=predicates,
        group_by=tuple(group_by),
        order_desc_limit=limit,
    )


def _resolve_attr(schema: Schema, name: str) -> int:
    for i, a in enumerate(schema.attributes):
        if a.name == name:
            return i
    raise ParseError(f"unknown attribute {name!r}")


def _literal(p: _Parser):
    kind, value = p.next()
    if kind not in ("num", "str"):
        raise ParseError(f"expected literal, found {value!r}")
    return value


def _zero_ids_for(stats: StatisticSet, attr: int, keep: tuple[int, int]) -> list[int]:
    off = stats.one_d_offsets[attr]
    size = stats.schema.attributes[attr].size
    u, v = keep
    return list(range(off, off + u)) + list(range(off + v + 1, off + size))


def answer(summary: Summary, plan: QueryPlan) -> QueryAnswer:
    """Evaluate a plan: one polynomial evaluation per group, scaled by n/P."""
    schema = summary.schema
    stats = summary.stats
    t0 = time.perf_counter()

    base_zeros: list[int] = []
    for i, pred in enumerate(plan.predicates):
        if pred is not None:
            base_zeros.extend(_zero_ids_for(stats, i, pred))

    group_sizes = [schema.attributes[i].size for i in plan.group_by]
    group_count = math.prod(group_sizes) if group_sizes else 1
    if group_count > MAX_GROUPS:
        raise PlanTooLargeError(
            f"plan enumerates {group_count} groups (limit {MAX_GROUPS})")

    assign = Assignment(store=summary.store)
    scale = summary.n / summary.p_value
    rows: list[GroupRow] = []
    if not plan.group_by:
        value = evaluate(summary.poly, assign.with_zeros(base_zeros))
        raw = max(scale * value, 0.0)
        rows.append(GroupRow(values=(), raw=raw, rounded=_round_half_away(raw)))
    else:
        for combo in itertools.product(*(range(s) for s in group_sizes)):
            zeros = list(base_zeros)
            labels = []
            for attr, v in zip(plan.group_by, combo):
                zeros.extend(_zero_ids_for(stats, attr, (v, v)))
                labels.append(schema.attributes[attr].value_label(v))
            value = evaluate(summary.poly, assign.with_zeros(zeros))
            raw = max(scale * value, 0.0)
            rows.append(GroupRow(values=tuple(labels), raw=raw,
                                 rounded=_round_half_away(raw)))
    if plan.order_desc_limit is not None:
        rows.sort(key=lambda r: -r.raw)
        rows = rows[: plan.order_desc_limit]
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return QueryAnswer(rows=rows, wall_ms=wall_ms)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def _canonical(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def save_summary(summary: Summary, path: Union[str, Path]) -> None:
    """Write the summary as canonical JSON with an integrity checksum.

    Only statistics and fitted values are stored; the term structure is a
    pure function of the statistics and is rebuilt at load.
    """
    body = {
        "format_version": FORMAT_VERSION,
        "schema": summary.schema.to_dict(),
        "n": summary.n,
        "statistics": [st.to_dict() for st in summary.stats.statistics],
        "alpha": [float(v) for v in summary.store.values],
        "p": float(summary.p_value),
        "solver_meta": summary.meta,
    }
    canonical = _canonical(body)
    doc = {"body": body, "sha256": hashlib.sha256(canonical.encode()).hexdigest()}
    Path(path).write_text(_canonical(doc), encoding="utf-8")


def load_summary(path: Union[str, Path]) -> Summary:
    """Read, verify, and rebuild a summary file.

    Rejects version mismatches, checksum failures, count mismatches, and any
    recomputed P that disagrees with the stored value beyond 1e-9 relative.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
        doc = json.loads(text)
    except OSError as e:
        raise SummaryFormatError(f"cannot read summary {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SummaryFormatError(f"summary {path} is corrupt: {e}") from e
    if not isinstance(doc, dict) or "body" not in doc or "sha256" not in doc:
        raise SummaryFormatError(f"summary {path} is missing body or checksum")
    body = doc["body"]
    digest = hashlib.sha256(_canonical(body).encode()).hexdigest()
    if digest != doc["sha256"]:
        raise SummaryFormatError(f"summary {path} failed its checksum")
    if body.get("format_version") != FORMAT_VERSION:
        raise SummaryFormatError(
            f"summary {path} has format_version {body.get('format_version')}, "
            f"expected {FORMAT_VERSION}")

    schema = load_schema(body["schema"])
    statistics = []
    for entry in body["statistics"]:
        ranges = tuple(tuple(r) if r is not None else None for r in entry["ranges"])
        statistics.append(Statistic(id=int(entry["id"]), ranges=ranges, s=int(entry["s"])))
    if len(body["alpha"]) != len(statistics):
        raise SummaryFormatError(
            f"summary {path}: {len(body['alpha'])} values for "
            f"{len(statistics)} statistics")
    pairs = []
    for st in statistics:
        if len(st.dims) == 2 and st.dims not in pairs:
            pairs.append(st.dims)
    stats = StatisticSet(
        schema=schema, statistics=statistics, pairs=pairs,
        b_a=int(body["solver_meta"].get("b_a", len(pairs))),
        b_s=int(body["solver_meta"].get("b_s", 0)),
    )
    n = int(body["n"])
    schema.n = n
    stats.validate(n)
    store = VariableStore(stats=stats, values=np.array(body["alpha"], dtype=np.float64))
    poly = build_compressed(stats)
    recomputed = evaluate(poly, Assignment(store=store))
    stored = float(body["p"])
    if abs(recomputed - stored) > 1e-9 * max(abs(stored), 1e-300):
        raise SummaryFormatError(
            f"summary {path}: recomputed partition value {recomputed!r} "
            f"disagrees with stored {stored!r}")
    return Summary(
        stats=stats, store=store, n=n, p_value=stored, poly=poly,
        meta=dict(body["solver_meta"]),
    )
