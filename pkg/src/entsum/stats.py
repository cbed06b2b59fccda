"""Statistic selection: complete 1D point statistics plus budgeted 2D statistics.

Every summary carries one point statistic per attribute value (the model's
overcomplete backbone).  2D statistics are chosen per attribute pair under a
budget: B_a pairs, up to B_s rectangles each, with three selection heuristics
and two pair-selection strategies.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import StatisticsError
from .schema import DatasetHandle, Ranges, Schema

# Exhaustive cover search is used while the number of candidate subsets stays
# below this; beyond it a greedy approximation takes over.
_COVER_SEARCH_CAP = 200_000


@dataclass(frozen=True)
class Statistic:
    """One conjunctive range predicate with its exact target count."""

    id: int
    ranges: Ranges
    s: int

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.ranges) if r is not None)

    @property
    def is_1d(self) -> bool:
        d = self.dims
        return len(d) == 1 and self.ranges[d[0]][0] == self.ranges[d[0]][1]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "ranges": [list(r) if r is not None else None for r in self.ranges],
            "s": self.s,
        }


@dataclass(frozen=True)
class PairScore:
    pair: tuple[int, int]
    chi2: float


@dataclass
class StatisticSet:
    """All statistics of one summary, in stable id order.

    Ids are assigned attribute-major for the 1D block (attribute 0's values,
    then attribute 1's, ...), followed by 2D statistics in (pair order,
    rectangle order).  The layout makes the 1D id of (attribute i, value v)
    computable as offset[i] + v.
    """

    schema: Schema
    statistics: list[Statistic]
    pairs: list[tuple[int, int]]
    b_a: int = 0
    b_s: int = 0

    def __post_init__(self):
        self.one_d_offsets = []
        off = 0
        for a in self.schema.attributes:
            self.one_d_offsets.append(off)
            off += a.size
        self.one_d_count = off

    @property
    def k(self) -> int:
        return len(self.statistics)

    def one_d_id(self, attr: int, value: int) -> int:
        return self.one_d_offsets[attr] + value

    def one_d_ids(self, attr: int) -> range:
        off = self.one_d_offsets[attr]
        return range(off, off + self.schema.attributes[attr].size)

    def attr_value_of(self, j: int) -> tuple[int, int]:
        """Inverse of one_d_id; only valid for ids in the 1D block."""
        if not 0 <= j < self.one_d_count:
            raise StatisticsError(f"id {j} is not a 1D statistic")
        attr = bisect.bisect_right(self.one_d_offsets, j) - 1
        return attr, j - self.one_d_offsets[attr]

    @property
    def two_d(self) -> list[Statistic]:
        return self.statistics[self.one_d_count:]

    def validate(self, n: int) -> None:
        """Check the structural invariants: completeness, sums, disjointness."""
        for j, st in enumerate(self.statistics):
            if st.id != j:
                raise StatisticsError(f"statistic ids not contiguous at {j}")
            if st.s > n:
                raise StatisticsError(f"statistic {j}: s={st.s} exceeds n={n}")
        for i, attr in enumerate(self.schema.attributes):
            ids = self.one_d_ids(i)
            total = 0
            for v, j in enumerate(ids):
                st = self.statistics[j]
                if st.dims != (i,) or st.ranges[i] != (v, v):
                    raise StatisticsError(
                        f"1D block broken: id {j} should be attribute {i} value {v}"
                    )
                total += st.s
            if total != n:
                raise StatisticsError(
                    f"attribute {i}: 1D statistic counts sum to {total}, expected n={n}"
                )
        by_pair: dict[tuple[int, ...], list[Statistic]] = {}
        for st in self.two_d:
            if len(st.dims) != 2:
                raise StatisticsError(f"statistic {st.id}: expected 2 constrained attributes")
            by_pair.setdefault(st.dims, []).append(st)
        for dims, group in by_pair.items():
            for a, b in itertools.combinations(group, 2):
                if _rects_overlap(a, b, dims):
                    raise StatisticsError(
                        f"statistics {a.id} and {b.id} overlap on attribute pair {dims}"
                    )


def _rects_overlap(a: Statistic, b: Statistic, dims: tuple[int, ...]) -> bool:
    for i in dims:
        (u1, v1), (u2, v2) = a.ranges[i], b.ranges[i]
        if max(u1, u2) > min(v1, v2):
            return False
    return True


def build_1d(data: DatasetHandle) -> list[Statistic]:
    """One point statistic per attribute value, with exact counts from the data."""
    schema = data.schema
    stats = []
    next_id = 0
    for i, attr in enumerate(schema.attributes):
        counts = data.freq[i]
        for v in range(attr.size):
            ranges = tuple((v, v) if ii == i else None for ii in range(schema.m))
            stats.append(Statistic(id=next_id, ranges=ranges, s=int(counts[v])))
            next_id += 1
    return stats


def score_pairs(data: DatasetHandle) -> list[PairScore]:
    """Pearson chi-squared per unordered attribute pair, sorted descending.

    Cells whose expected count is zero (an empty marginal row or column) are
    skipped, so degenerate tables score 0.  Ties break by attribute order.
    """
    schema = data.schema
    scores = []
    for i1, i2 in itertools.combinations(range(schema.m), 2):
        table = data.contingency((i1, i2)).astype(np.float64)
        n = table.sum()
        row = table.sum(axis=1, keepdims=True)
        col = table.sum(axis=0, keepdims=True)
        expected = row * col / n
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.where(expected > 0, (table - expected) ** 2 / expected, 0.0)
        scores.append(PairScore(pair=(i1, i2), chi2=float(contrib.sum())))
    scores.sort(key=lambda s: (-s.chi2, s.pair))
    return scores


def select_pairs(
    scores: Sequence[PairScore], b_a: int, strategy: str = "cover"
) -> list[tuple[int, int]]:
    """Choose up to b_a attribute pairs for 2D statistics.

    "correlation": walk pairs in descending score and keep a pair when it has
    at least one attribute absent from every pair kept so far.

    "cover": pick the subset of size <= b_a that covers the most attributes,
    breaking ties by total score, then by pair order.  The search is exhaustive
    up to a combination cap; past it a greedy (most new attributes, then score)
    stands in.
    """
    if b_a < 1:
        raise StatisticsError("pair budget must be >= 1")
    ranked = sorted(scores, key=lambda s: (-s.chi2, s.pair))
    if b_a >= len(ranked):
        return [s.pair for s in ranked]
    if strategy == "correlation":
        taken: list[tuple[int, int]] = []
        covered: set[int] = set()
        for s in ranked:
            if len(taken) == b_a:
                break
            if not covered or set(s.pair) - covered:
                taken.append(s.pair)
                covered.update(s.pair)
        return taken
    if strategy != "cover":
        raise StatisticsError(f"unknown pair selection strategy {strategy!r}")
    if math.comb(len(ranked), b_a) <= _COVER_SEARCH_CAP:
        best = None
        for combo in itertools.combinations(range(len(ranked)), b_a):
            covered = len({a for idx in combo for a in ranked[idx].pair})
            total = sum(ranked[idx].chi2 for idx in combo)
            key = (covered, total, tuple(-i for i in combo))
            if best is None or key > best[0]:
                best = (key, combo)
        return [ranked[idx].pair for idx in best[1]]
    taken = []
    covered = set()
    remaining = list(ranked)
    while len(taken) < b_a and remaining:
        remaining.sort(key=lambda s: (-len(set(s.pair) - covered), -s.chi2, s.pair))
        choice = remaining.pop(0)
        taken.append(choice.pair)
        covered.update(choice.pair)
    return taken


def _point_stats(
    schema: Schema, pair: tuple[int, int], cells: Iterable[tuple[int, int, int]]
) -> list[Statistic]:
    i1, i2 = pair
    out = []
    for idx, (u1, u2, count) in enumerate(cells):
        ranges = tuple(
            (u1, u1) if i == i1 else (u2, u2) if i == i2 else None
            for i in range(schema.m)
        )
        out.append(Statistic(id=idx, ranges=ranges, s=count))
    return out


def heuristic_large(data: DatasetHandle, pair: tuple[int, int], b_s: int) -> list[Statistic]:
    """The b_s most populated single cells of the pair's 2D histogram."""
    table = data.contingency(pair)
    n1, n2 = table.shape
    order = sorted(
        ((int(table[r, c]), r, c) for r in range(n1) for c in range(n2)),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    chosen = order[: min(b_s, n1 * n2)]
    return _point_stats(data.schema, pair, [(r, c, cnt) for cnt, r, c in chosen])


def heuristic_zero(data: DatasetHandle, pair: tuple[int, int], b_s: int) -> list[Statistic]:
    """Up to b_s empty cells (s = 0) in index order; any shortfall is filled
    with the most populated remaining cells."""
    table = data.contingency(pair)
    n1, n2 = table.shape
    zeros = [(r, c, 0) for r in range(n1) for c in range(n2) if table[r, c] == 0]
    chosen = zeros[: min(b_s, n1 * n2)]
    if len(chosen) < min(b_s, n1 * n2):
        fill = sorted(
            ((int(table[r, c]), r, c) for r in range(n1) for c in range(n2)
             if table[r, c] > 0),
            key=lambda t: (-t[0], t[1], t[2]),
        )
        for cnt, r, c in fill[: min(b_s, n1 * n2) - len(chosen)]:
            chosen.append((r, c, cnt))
    return _point_stats(data.schema, pair, chosen)


class _KdLeaf:
    __slots__ = ("u1", "v1", "u2", "v2", "depth", "order", "split")

    def __init__(self, u1, v1, u2, v2, depth, order):
        self.u1, self.v1, self.u2, self.v2 = u1, v1, u2, v2
        self.depth = depth
        self.order = order
        self.split = False

    @property
    def single_cell(self):
        return self.u1 == self.v1 and self.u2 == self.v2


def heuristic_composite(data: DatasetHandle, pair: tuple[int, int], b_s: int) -> list[Statistic]:
    """Partition the pair's plane into b_s disjoint rectangles with a KD split.

    Split dimensions alternate with depth, starting with the pair's first
    attribute.  Each split minimizes the summed squared deviation of cell
    counts from their side means; under ties the median boundary wins.  The
    leaf with the largest within-leaf squared error splits next, so budgets
    need not be powers of two.  Single cells never split; when every leaf is
    a single cell the partition stops early.
    """
    if b_s < 1:
        raise StatisticsError("rectangle budget must be >= 1")
    table = data.contingency(pair).astype(np.float64)
    n1, n2 = table.shape
    b_s = min(b_s, n1 * n2)

    # Integral images give O(1) rectangle sums for counts and squared counts.
    cum = np.zeros((n1 + 1, n2 + 1))
    cum[1:, 1:] = table.cumsum(axis=0).cumsum(axis=1)
    cum2 = np.zeros((n1 + 1, n2 + 1))
    cum2[1:, 1:] = (table ** 2).cumsum(axis=0).cumsum(axis=1)

    def rect_sum(c, u1, v1, u2, v2):
        return c[v1 + 1, u2] - c[u1, u2] - c[v1 + 1, v2 + 1] + c[u1, v2 + 1]

    def sums(u1, v1, u2, v2):
        s = cum[v1 + 1, v2 + 1] - cum[u1, v2 + 1] - cum[v1 + 1, u2] + cum[u1, u2]
        s2 = cum2[v1 + 1, v2 + 1] - cum2[u1, v2 + 1] - cum2[v1 + 1, u2] + cum2[u1, u2]
        return s, s2

    def sse(u1, v1, u2, v2):
        s, s2 = sums(u1, v1, u2, v2)
        cells = (v1 - u1 + 1) * (v2 - u2 + 1)
        return max(s2 - s * s / cells, 0.0)

    def best_split(leaf: _KdLeaf):
        """Returns (dim, boundary) or None when the leaf is a single cell."""
        dims = []
        if leaf.v1 > leaf.u1:
            dims.append(0)
        if leaf.v2 > leaf.u2:
            dims.append(1)
        if not dims:
            return None
        preferred = leaf.depth % 2
        dim = preferred if preferred in dims else dims[0]
        if dim == 0:
            candidates = range(leaf.u1, leaf.v1)
            costs = [
                sse(leaf.u1, b, leaf.u2, leaf.v2) + sse(b + 1, leaf.v1, leaf.u2, leaf.v2)
                for b in candidates
            ]
        else:
            candidates = range(leaf.u2, leaf.v2)
            costs = [
                sse(leaf.u1, leaf.v1, leaf.u2, b) + sse(leaf.u1, leaf.v1, b + 1, leaf.v2)
                for b in candidates
            ]
        lo = min(costs)
        if all(abs(c - lo) <= 1e-12 * max(1.0, abs(lo)) for c in costs):
            boundary = candidates[(len(costs) - 1) // 2]
        else:
            boundary = candidates[costs.index(lo)]
        return dim, boundary

    order = itertools.count()
    root = _KdLeaf(0, n1 - 1, 0, n2 - 1, 0, next(order))
    nodes = [root]
    heap: list[tuple[float, int, _KdLeaf]] = []
    if not root.single_cell:
        heapq.heappush(heap, (-sse(root.u1, root.v1, root.u2, root.v2),
                              root.order, root))
    leaf_count = 1
    while leaf_count < b_s and heap:
        _, _, leaf = heapq.heappop(heap)
        dim, b = best_split(leaf)
        if dim == 0:
            children = [
                _KdLeaf(leaf.u1, b, leaf.u2, leaf.v2, leaf.depth + 1, next(order)),
                _KdLeaf(b + 1, leaf.v1, leaf.u2, leaf.v2, leaf.depth + 1, next(order)),
            ]
        else:
            children = [
                _KdLeaf(leaf.u1, leaf.v1, leaf.u2, b, leaf.depth + 1, next(order)),
                _KdLeaf(leaf.u1, leaf.v1, b + 1, leaf.v2, leaf.depth + 1, next(order)),
            ]
        leaf.split = True
        leaf_count += 1
        for child in children:
            nodes.append(child)
            if not child.single_cell:
                heapq.heappush(heap, (-sse(child.u1, child.v1, child.u2, child.v2),
                                      child.order, child))

    leaves = [l for l in nodes if not l.split]
    leaves.sort(key=lambda l: (l.u1, l.v1, l.u2, l.v2))
    i1, i2 = pair
    out = []
    for idx, l in enumerate(leaves):
        count = int(round(sums(l.u1, l.v1, l.u2, l.v2)[0]))
        ranges = tuple(
            (l.u1, l.v1) if i == i1 else (l.u2, l.v2) if i == i2 else None
            for i in range(data.schema.m)
        )
        out.append(Statistic(id=idx, ranges=ranges, s=count))
    return out


_HEURISTICS = {
    "large": heuristic_large,
    "zero": heuristic_zero,
    "composite": heuristic_composite,
}


def build_statistic_set(
    data: DatasetHandle,
    pairs: Sequence[tuple[int, int]] = (),
    b_s: int = 0,
    heuristic: str = "composite",
) -> StatisticSet:
    """Assemble the complete statistic set: 1D block plus per-pair 2D statistics."""
    if heuristic not in _HEURISTICS:
        raise StatisticsError(f"unknown heuristic {heuristic!r}")
    schema = data.schema
    stats = build_1d(data)
    next_id = len(stats)
    for pair in pairs:
        for st in _HEURISTICS[heuristic](data, tuple(pair), b_s):
            stats.append(replace(st, id=next_id))
            next_id += 1
    out = StatisticSet(
        schema=schema,
        statistics=stats,
        pairs=[tuple(p) for p in pairs],
        b_a=len(pairs),
        b_s=b_s,
    )
    out.validate(data.row_count)
    return out
