"""Shared fixtures: the two worked-example statistic sets, matching CSV data,
and random fixture generators used by the property and oracle tests."""

from __future__ import annotations

import csv
import itertools
from pathlib import Path

import numpy as np
import pytest

from entsum.schema import AttributeDomain, Schema, ingest
from entsum.stats import Statistic, StatisticSet


def make_schema(sizes, names=None, categorical=False):
    """Schema with the given domain sizes.  Numeric attributes use identity
    bucketization (lo=0, hi=N, N buckets) so raw values equal bucket indices."""
    attrs = []
    for i, size in enumerate(sizes):
        name = names[i] if names else chr(ord("A") + i)
        if categorical:
            attrs.append(AttributeDomain(
                name=name, kind="categorical",
                values=tuple(f"{name.lower()}{v + 1}" for v in range(size)),
            ))
        else:
            attrs.append(AttributeDomain(
                name=name, kind="numeric", lo=0.0, hi=float(size), buckets=size,
            ))
    return Schema(attributes=tuple(attrs))


def make_stats(schema, one_d_s, two_d=(), n=None):
    """StatisticSet from explicit 1D targets and 2D (ranges-map, s) entries."""
    statistics = []
    next_id = 0
    for i, targets in enumerate(one_d_s):
        assert len(targets) == schema.attributes[i].size
        for v, s in enumerate(targets):
            ranges = tuple((v, v) if ii == i else None for ii in range(schema.m))
            statistics.append(Statistic(id=next_id, ranges=ranges, s=int(s)))
            next_id += 1
    pairs = []
    for ranges_map, s in two_d:
        ranges = tuple(ranges_map.get(i) for i in range(schema.m))
        st = Statistic(id=next_id, ranges=ranges, s=int(s))
        if st.dims not in pairs:
            pairs.append(st.dims)
        statistics.append(st)
        next_id += 1
    out = StatisticSet(
        schema=schema, statistics=statistics, pairs=pairs,
        b_a=len(pairs), b_s=max((1 for _ in two_d), default=0),
    )
    if n is None:
        n = sum(one_d_s[0])
    out.validate(n)
    return out


@pytest.fixture
def ex1_schema():
    return make_schema([2, 2, 2], names=["A", "B", "C"], categorical=True)


@pytest.fixture
def ex1_stats(ex1_schema):
    """Three binary attributes, n=10, 1D statistics only."""
    ex1_schema.n = 10
    return make_stats(ex1_schema, [(3, 7), (8, 2), (6, 4)])


@pytest.fixture
def ex2_stats(ex1_schema):
    """The 1D set plus four 2D point statistics on (A,B) and (B,C)."""
    ex1_schema.n = 10
    return make_stats(
        ex1_schema,
        [(3, 7), (8, 2), (6, 4)],
        two_d=[
            ({0: (0, 0), 1: (0, 0)}, 2),   # A=a1 and B=b1
            ({0: (1, 1), 1: (1, 1)}, 1),   # A=a2 and B=b2
            ({1: (0, 0), 2: (0, 0)}, 5),   # B=b1 and C=c1
            ({1: (1, 1), 2: (0, 0)}, 1),   # B=b2 and C=c1
        ],
    )


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def ex1_instance_csv(tmp_path):
    """The worked instance: one (a1,b1,c1) row and nine (a1,b2,c2) rows."""
    rows = [("a1", "b1", "c1")] + [("a1", "b2", "c2")] * 9
    return write_csv(tmp_path / "ex1_instance.csv", ["A", "B", "C"], rows)


@pytest.fixture
def ex_marginals_csv(tmp_path):
    """A 10-row table matching all Example-set statistic values: marginals
    (3,7)/(8,2)/(6,4) and 2D counts AB11=2, AB22=1, BC11=5, BC21=1."""
    cells = {
        ("a1", "b1", "c1"): 1,
        ("a1", "b1", "c2"): 1,
        ("a1", "b2", "c2"): 1,
        ("a2", "b1", "c1"): 4,
        ("a2", "b1", "c2"): 2,
        ("a2", "b2", "c1"): 1,
    }
    rows = [cell for cell, k in cells.items() for _ in range(k)]
    return write_csv(tmp_path / "ex_marginals.csv", ["A", "B", "C"], rows)


def random_rows(rng, sizes, n, skew=1.0):
    """Random bucket-index rows with mildly skewed independent marginals."""
    cols = []
    for size in sizes:
        p = (1.0 / np.arange(1, size + 1) ** skew)
        p /= p.sum()
        cols.append(rng.choice(size, size=n, p=p))
    return np.stack(cols, axis=1)


def handle_from_rows(schema, rows, tmp_path, name="rand.csv"):
    """Write rows (bucket indices) as raw numeric values and ingest them."""
    path = write_csv(tmp_path / name, [a.name for a in schema.attributes], rows.tolist())
    return ingest(schema, path)


def random_disjoint_rects(rng, n1, n2, count):
    """Up to `count` pairwise disjoint rectangles on an n1 x n2 grid."""
    rects = []
    for _ in range(count * 20):
        if len(rects) == count:
            break
        u1 = int(rng.integers(0, n1))
        v1 = int(rng.integers(u1, min(n1, u1 + max(1, n1 // 2))))
        u2 = int(rng.integers(0, n2))
        v2 = int(rng.integers(u2, min(n2, u2 + max(1, n2 // 2))))
        if all(max(u1, r[0]) > min(v1, r[1]) or max(u2, r[2]) > min(v2, r[3])
               for r in rects):
            rects.append((u1, v1, u2, v2))
    return rects


def random_stat_set(rng, max_d=10_000, with_two_d=True):
    """Random schema + statistic set with consistent targets from random data."""
    m = int(rng.integers(2, 4))
    sizes = []
    budget = max_d
    for i in range(m):
        hi = max(2, min(12, budget))
        size = int(rng.integers(2, hi + 1))
        sizes.append(size)
        budget //= size
    schema = make_schema(sizes)
    n = int(rng.integers(5, 40))
    rows = random_rows(rng, sizes, n)
    one_d = [np.bincount(rows[:, i], minlength=sizes[i]).tolist() for i in range(m)]
    two_d = []
    if with_two_d and m >= 2:
        pair_count = int(rng.integers(1, min(3, m * (m - 1) // 2) + 1))
        pairs = [tuple(sorted(p)) for p in
                 rng.permutation(list(itertools.combinations(range(m), 2)))[:pair_count]]
        for i1, i2 in pairs:
            for u1, v1, u2, v2 in random_disjoint_rects(
                    rng, sizes[i1], sizes[i2], int(rng.integers(1, 4))):
                mask = ((rows[:, i1] >= u1) & (rows[:, i1] <= v1)
                        & (rows[:, i2] >= u2) & (rows[:, i2] <= v2))
                two_d.append(({i1: (u1, v1), i2: (u2, v2)}, int(mask.sum())))
    schema.n = n
    return make_stats(schema, one_d, two_d, n=n)


def random_assignment(rng, stats, lo=0.1, hi=2.0):
    """Random positive variable values in [lo, hi]."""
    from entsum.polynomial import Assignment, VariableStore

    values = rng.uniform(lo, hi, size=stats.k)
    return Assignment(store=VariableStore(stats=stats, values=values))


def small_random_stats(rng):
    """Random statistic set on a domain with d <= 8, targets from random rows."""
    sizes = [(2, 2, 2), (2, 4), (4, 2), (2, 3), (2, 2)][int(rng.integers(0, 5))]
    schema = make_schema(list(sizes))
    n = int(rng.integers(1, 4))
    rows = np.stack([rng.integers(0, s, size=n) for s in sizes], axis=1)
    one_d = [np.bincount(rows[:, i], minlength=sizes[i]).tolist()
             for i in range(len(sizes))]
    two_d = []
    if len(sizes) >= 2 and rng.random() < 0.7:
        i1, i2 = 0, 1
        u1 = int(rng.integers(0, sizes[i1]))
        u2 = int(rng.integers(0, sizes[i2]))
        mask = (rows[:, i1] == u1) & (rows[:, i2] == u2)
        two_d.append(({i1: (u1, u1), i2: (u2, u2)}, int(mask.sum())))
    schema.n = n
    return make_stats(schema, one_d, two_d, n=n), n


def make_summary(stats, threshold=1e-9, max_iterations=200, meta=None):
    """Solve a statistic set and wrap it as a queryable summary."""
    from entsum.polynomial import build_compressed
    from entsum.query import Summary
    from entsum.solver import SolverConfig, solve

    poly = build_compressed(stats)
    state = solve(poly, stats, SolverConfig(
        threshold=threshold, max_iterations=max_iterations))
    return Summary.from_solution(poly, state, meta=meta)
