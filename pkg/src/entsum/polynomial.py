"""Compressed partition polynomial: build, evaluate, differentiate.

The model's partition polynomial has one monomial per possible tuple, which is
far too large to materialize.  Because every 1D block is complete and the 2D
rectangles on one attribute pair are disjoint, the polynomial factorizes into
a base product of per-attribute variable sums plus one inclusion-exclusion
term per intersecting set of 2D statistics:

    sum over attribute sets I of
        (product over i not in I of the full 1D sum on i)
      * sum over intersecting 2D sets S with combined attributes I of
            (product over i in I of the 1D sum restricted to the rectangle
             intersection of S on i)
          * (product over j in S of (alpha_j - 1))

Every variable has degree 1, so all derivatives reduce to evaluations: the
weighted derivative on a 1D variable is the evaluation with its siblings set
to 0, and a general derivative is the difference of the evaluations at 1 and 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import PolynomialError
from .stats import Statistic, StatisticSet

# Term groups at least this large are evaluated with vectorized prefix-sum
# gathers; smaller groups use exact memoized per-interval sums.  The vector
# path trades up to ~1e-11 relative error (tiny interval inside a huge total)
# for an order of magnitude less per-term overhead.
_VECTOR_MIN_MEMBERS = 64

# Fast-path results beyond this magnitude are recomputed in signed log space.
_OVERFLOW_GUARD = 1e300


@dataclass
class VariableStore:
    """One value per statistic id, in id order."""

    stats: StatisticSet
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.stats.k,):
            raise PolynomialError(
                f"expected {self.stats.k} variable values, got {self.values.shape}"
            )
        if np.any(self.values < 0):
            raise PolynomialError("variable values must be non-negative")

    @classmethod
    def all_ones(cls, stats: StatisticSet) -> "VariableStore":
        return cls(stats=stats, values=np.ones(stats.k))

    def copy(self) -> "VariableStore":
        return VariableStore(stats=self.stats, values=self.values.copy())


@dataclass(frozen=True)
class Assignment:
    """A variable store plus per-evaluation zeroing and overrides.

    zero_set forces 1D variables to 0 (the query-answering mechanism);
    override pins any variable to an explicit value (the derivative
    mechanism).  The two never touch the same id.
    """

    store: VariableStore
    zero_set: frozenset = frozenset()
    override: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "zero_set", frozenset(self.zero_set))
        one_d = self.store.stats.one_d_count
        for j in self.zero_set:
            if not 0 <= j < one_d:
                raise PolynomialError(f"zero_set id {j} is not a 1D statistic")
        if self.zero_set & set(self.override):
            raise PolynomialError("zero_set and override must be disjoint")

    def effective_values(self) -> np.ndarray:
        """Variable values with zeroing and overrides applied."""
        eff = self.store.values.copy()
        if self.zero_set:
            eff[np.fromiter(self.zero_set, dtype=np.int64)] = 0.0
        for j, val in self.override.items():
            eff[j] = val
        return eff

    def with_zeros(self, ids) -> "Assignment":
        ids = set(ids)
        override = {j: v for j, v in self.override.items() if j not in ids}
        return Assignment(self.store, self.zero_set | ids, override)

    def with_override(self, j: int, value: float) -> "Assignment":
        override = dict(self.override)
        override[j] = value
        return Assignment(self.store, self.zero_set - {j}, override)


@dataclass(frozen=True)
class CompressionTerm:
    """One inclusion-exclusion term: an attribute set, the 2D statistic set
    whose combined attributes it is, and the per-attribute rectangle
    intersection the 1D sums are restricted to."""

    attrs: tuple[int, ...]
    stat_ids: tuple[int, ...]
    intervals: tuple[tuple[int, int], ...]  # aligned with attrs

    @property
    def is_base(self) -> bool:
        return not self.attrs


class _TermGroup:
    """Evaluation-ready view of all terms sharing one attribute set."""

    __slots__ = ("attrs", "members", "u_mat", "v_mat", "sid_flat", "sid_offsets")

    def __init__(self, attrs: tuple[int, ...], members: list[CompressionTerm]):
        self.attrs = attrs
        self.members = members
        if attrs:
            self.u_mat = np.array(
                [[iv[0] for iv in t.intervals] for t in members], dtype=np.int64
            )
            self.v_mat = np.array(
                [[iv[1] for iv in t.intervals] for t in members], dtype=np.int64
            )
            self.sid_flat = np.array(
                [j for t in members for j in t.stat_ids], dtype=np.int64
            )
            self.sid_offsets = np.cumsum(
                [0] + [len(t.stat_ids) for t in members[:-1]], dtype=np.int64
            )


@dataclass
class CompressedPolynomial:
    """Factorized partition polynomial over a statistic set."""

    stats: StatisticSet
    terms: list[CompressionTerm]
    groups: list[_TermGroup] = field(default_factory=list, repr=False)

    @property
    def schema(self):
        return self.stats.schema


def _check_disjoint(stats: StatisticSet, dims, group) -> None:
    """Rectangles of one pair must not overlap: verified by stamping each
    rectangle into an occupancy grid (quadratic fallback for huge planes)."""
    i1, i2 = dims
    n1 = stats.schema.attributes[i1].size
    n2 = stats.schema.attributes[i2].size
    if n1 * n2 <= 50_000_000:
        occupancy = np.zeros((n1, n2), dtype=np.uint8)
        for st in group:
            (u1, v1), (u2, v2) = st.ranges[i1], st.ranges[i2]
            area = occupancy[u1: v1 + 1, u2: v2 + 1]
            if area.any():
                raise PolynomialError(
                    f"2D statistic {st.id} overlaps another on pair {dims}")
            area[:] = 1
        return
    for a_idx in range(len(group)):
        for b_idx in range(a_idx + 1, len(group)):
            a, b = group[a_idx], group[b_idx]
            if _intersect({i: a.ranges[i] for i in a.dims}, b) is not None:
                raise PolynomialError(
                    f"2D statistics {a.id} and {b.id} overlap on pair {dims}")


def _intersect(
    intervals: dict[int, tuple[int, int]], st: Statistic
) -> Optional[dict[int, tuple[int, int]]]:
    """Per-attribute interval intersection of a set's rectangle with one more
    statistic; None when any attribute's intersection is empty."""
    merged = dict(intervals)
    for i in st.dims:
        u2, v2 = st.ranges[i]
        if i in merged:
            u1, v1 = merged[i]
            u, v = max(u1, u2), min(v1, v2)
            if u > v:
                return None
            merged[i] = (u, v)
        else:
            merged[i] = (u2, v2)
    return merged


def build_compressed(stats: StatisticSet) -> CompressedPolynomial:
    """Build the factorized polynomial for a statistic set.

    Starts from each 2D statistic as a singleton set and closes under unions
    with non-empty rectangle intersection; every set in the closure becomes
    one term.  Sets are extended only by statistics with a larger id, which
    reaches every valid set exactly once and fixes the term order.
    """
    two_d = stats.two_d
    by_dims: dict[tuple[int, ...], list[Statistic]] = {}
    for st in two_d:
        by_dims.setdefault(st.dims, []).append(st)
    for dims, group in by_dims.items():
        _check_disjoint(stats, dims, group)

    # Extending a set with a statistic on a pair it already uses always gives
    # an empty intersection (same-pair statistics are disjoint), so candidate
    # statistics are grouped by pair and whole pairs are skipped.
    dims_order = list(by_dims)
    found: dict[tuple[int, ...], dict[int, tuple[int, int]]] = {}
    frontier: list[tuple[tuple[int, ...], frozenset]] = []
    for st in two_d:
        key = (st.id,)
        found[key] = {i: st.ranges[i] for i in st.dims}
        frontier.append((key, frozenset((st.dims,))))
    while frontier:
        next_frontier = []
        for key, used_dims in frontier:
            intervals = found[key]
            last = key[-1]
            for dims in dims_order:
                if dims in used_dims:
                    continue
                for st in by_dims[dims]:
                    if st.id <= last:
                        continue
                    merged = _intersect(intervals, st)
                    if merged is not None:
                        new_key = key + (st.id,)
                        found[new_key] = merged
                        next_frontier.append((new_key, used_dims | {st.dims}))
        frontier = next_frontier

    terms = [CompressionTerm(attrs=(), stat_ids=(), intervals=())]
    for key in sorted(found, key=lambda k: (len(k), k)):
        intervals = found[key]
        attrs = tuple(sorted(intervals))
        terms.append(
            CompressionTerm(
                attrs=attrs,
                stat_ids=key,
                intervals=tuple(intervals[i] for i in attrs),
            )
        )

    group_order: list[tuple[int, ...]] = []
    grouped: dict[tuple[int, ...], list[CompressionTerm]] = {}
    for t in terms:
        if t.attrs not in grouped:
            grouped[t.attrs] = []
            group_order.append(t.attrs)
        grouped[t.attrs].append(t)
    groups = [_TermGroup(attrs, grouped[attrs]) for attrs in group_order]
    return CompressedPolynomial(stats=stats, terms=terms, groups=groups)


class _EvalContext:
    """Per-evaluation cache of effective values, full sums, and interval sums."""

    def __init__(self, poly: CompressedPolynomial, assign: Assignment):
        if assign.store.stats is not poly.stats and assign.store.stats.k != poly.stats.k:
            raise PolynomialError("assignment does not cover this polynomial's variables")
        self.poly = poly
        self.eff = assign.effective_values()
        stats = poly.stats
        self.vecs = [
            self.eff[stats.one_d_offsets[i]: stats.one_d_offsets[i] + a.size]
            for i, a in enumerate(stats.schema.attributes)
        ]
        self.full = np.array([v.sum() for v in self.vecs])
        self._interval_memo: dict[tuple[int, int, int], float] = {}
        self._cumsum: dict[int, np.ndarray] = {}

    def interval_sum(self, i: int, u: int, v: int) -> float:
        key = (i, u, v)
        out = self._interval_memo.get(key)
        if out is None:
            out = float(np.sum(self.vecs[i][u: v + 1]))
            self._interval_memo[key] = out
        return out

    def cumsum(self, i: int) -> np.ndarray:
        cs = self._cumsum.get(i)
        if cs is None:
            cs = np.concatenate(([0.0], np.cumsum(self.vecs[i])))
            self._cumsum[i] = cs
        return cs

    def complement_product(self, attrs: tuple[int, ...]) -> float:
        out = 1.0
        for i in range(len(self.full)):
            if i not in attrs:
                out *= self.full[i]
        return out

    def group_value(self, g: _TermGroup) -> float:
        comp = self.complement_product(g.attrs)
        if not g.attrs:
            return comp
        if comp == 0.0:
            return 0.0
        if len(g.members) >= _VECTOR_MIN_MEMBERS:
            prods = np.ones(len(g.members))
            for col, i in enumerate(g.attrs):
                cs = self.cumsum(i)
                prods *= cs[g.v_mat[:, col] + 1] - cs[g.u_mat[:, col]]
            sfac = np.multiply.reduceat(self.eff[g.sid_flat] - 1.0, g.sid_offsets)
            return comp * float(np.sum(prods * sfac))
        total = 0.0
        for t in g.members:
            val = 1.0
            for i, (u, v) in zip(t.attrs, t.intervals):
                val *= self.interval_sum(i, u, v)
                if val == 0.0:
                    break
            else:
                for j in t.stat_ids:
                    val *= self.eff[j] - 1.0
                total += val
        return comp * total

    def value(self) -> float:
        return float(sum(self.group_value(g) for g in self.poly.groups))


def evaluate(poly: CompressedPolynomial, assign: Assignment) -> float:
    """Exact value of the factorized polynomial under an assignment.

    Falls back to signed log-space accumulation when the direct computation
    overflows float64.
    """
    ctx = _EvalContext(poly, assign)
    with np.errstate(over="ignore", invalid="ignore"):
        out = ctx.value()
    if math.isfinite(out) and abs(out) < _OVERFLOW_GUARD:
        return out
    sign, log_abs = evaluate_log(poly, assign)
    if sign == 0:
        return 0.0
    try:
        return sign * math.exp(log_abs)
    except OverflowError:
        return sign * math.inf


def evaluate_log(poly: CompressedPolynomial, assign: Assignment) -> tuple[float, float]:
    """(sign, log|P|) via per-factor log-sum-exp; the overflow-proof path."""
    ctx = _EvalContext(poly, assign)
    stats = poly.stats
    with np.errstate(divide="ignore"):
        log_vecs = [np.log(v) for v in ctx.vecs]

    def log_interval(i, u, v):
        seg = log_vecs[i][u: v + 1]
        m = np.max(seg)
        if not np.isfinite(m):
            return -math.inf
        return float(m + np.log(np.sum(np.exp(seg - m))))

    log_full = [log_interval(i, 0, len(ctx.vecs[i]) - 1) for i in range(stats.schema.m)]
    term_logs = []
    term_signs = []
    for t in poly.terms:
        log_val = 0.0
        sign = 1.0
        for i in range(stats.schema.m):
            if i not in t.attrs:
                log_val += log_full[i]
        for i, (u, v) in zip(t.attrs, t.intervals):
            log_val += log_interval(i, u, v)
        for j in t.stat_ids:
            f = ctx.eff[j] - 1.0
            if f == 0.0:
                sign = 0.0
                break
            sign *= math.copysign(1.0, f)
            log_val += math.log(abs(f))
        if sign != 0.0 and math.isfinite(log_val):
            term_logs.append(log_val)
            term_signs.append(sign)
    if not term_logs:
        return 0.0, -math.inf
    m = max(term_logs)
    acc = sum(s * math.exp(l - m) for s, l in zip(term_signs, term_logs))
    if acc == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, acc), m + math.log(abs(acc))


def derivative_weighted(poly: CompressedPolynomial, assign: Assignment, j: int) -> float:
    """alpha_j * dP/d(alpha_j) for a 1D variable.

    Every monomial holds exactly one variable from j's attribute block, so
    zeroing the siblings keeps precisely the monomials containing alpha_j.
    """
    stats = poly.stats
    if not 0 <= j < stats.one_d_count:
        raise PolynomialError(f"id {j} is not a 1D statistic")
    attr, _ = stats.attr_value_of(j)
    siblings = set(stats.one_d_ids(attr)) - {j}
    return evaluate(poly, assign.with_zeros(siblings))


def derivative_general(poly: CompressedPolynomial, assign: Assignment, j: int) -> float:
    """dP/d(alpha_j) for any variable, via the multilinear difference
    P[alpha_j = 1] - P[alpha_j = 0]."""
    if not 0 <= j < poly.stats.k:
        raise PolynomialError(f"unknown statistic id {j}")
    return evaluate(poly, assign.with_override(j, 1.0)) - evaluate(
        poly, assign.with_override(j, 0.0)
    )


def size_report(poly: CompressedPolynomial) -> dict:
    """Size metrics of the factorized form.

    slot_count counts 1D-variable slots with full sums shared per attribute
    set, matching the walk-through accounting; factor_count additionally
    counts the (alpha - 1) slots.  b_a is the number of distinct non-empty
    attribute sets with terms (union-generated sets included) and r the
    largest number of terms sharing one attribute set.
    """
    sizes = poly.stats.schema.sizes
    slot_count = 0
    b_a = 0
    r = 0
    two_d_slots = 0
    for g in poly.groups:
        slot_count += sum(sizes[i] for i in range(len(sizes)) if i not in g.attrs)
        for t in g.members:
            slot_count += sum(v - u + 1 for u, v in t.intervals)
            two_d_slots += len(t.stat_ids)
        if g.attrs:
            b_a += 1
            r = max(r, len(g.members))
    return {
        "term_count": len(poly.terms),
        "slot_count": slot_count,
        "factor_count": slot_count + two_d_slots,
        "b_a": b_a,
        "r": r,
    }
