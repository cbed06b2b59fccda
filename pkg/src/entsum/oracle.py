"""Desk-scale ground-truth engines: naive expansion and world enumeration.

These paths are deliberately inefficient.  They exist to validate the
compressed polynomial, the expectation formulas, and the solver on fixtures
small enough to enumerate, and they stay independent of the optimized code:
values come from explicit monomial lists and explicit instance enumeration.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import PolynomialError
from .polynomial import Assignment
from .schema import Ranges
from .stats import StatisticSet

NAIVE_CAP = 100_000
WORLD_CAP = 1_000_000


@dataclass
class NaivePolynomial:
    """One monomial per possible tuple: the tuple's coordinates plus the ids
    of every statistic whose predicate it satisfies."""

    stats: StatisticSet
    monomials: list[tuple[tuple[int, ...], tuple[int, ...]]]


def _satisfies(coords: tuple[int, ...], ranges: Ranges) -> bool:
    return all(r is None or r[0] <= c <= r[1] for c, r in zip(coords, ranges))


def naive_expand(stats: StatisticSet, cap: int = NAIVE_CAP) -> NaivePolynomial:
    """Materialize every monomial of the partition polynomial."""
    schema = stats.schema
    if schema.d > cap:
        raise PolynomialError(f"naive expansion of {schema.d} monomials exceeds cap {cap}")
    monomials = []
    for coords in itertools.product(*(range(a.size) for a in schema.attributes)):
        ids = tuple(st.id for st in stats.statistics if _satisfies(coords, st.ranges))
        monomials.append((coords, ids))
    return NaivePolynomial(stats=stats, monomials=monomials)


def naive_eval(npoly: NaivePolynomial, assign: Assignment) -> float:
    """Sum of all monomial values; the expansion-side of the equivalence check."""
    eff = assign.effective_values()
    total = 0.0
    for _, ids in npoly.monomials:
        val = 1.0
        for j in ids:
            val *= eff[j]
        total += val
    return total


def naive_derivative(npoly: NaivePolynomial, assign: Assignment, j: int) -> float:
    """Symbolic dP/d(alpha_j) on the expansion: drop alpha_j from the
    monomials containing it, discard the rest."""
    eff = assign.effective_values()
    total = 0.0
    for _, ids in npoly.monomials:
        if j not in ids:
            continue
        val = 1.0
        for jj in ids:
            if jj != j:
                val *= eff[jj]
        total += val
    return total


def extended_beta_derivative(
    npoly: NaivePolynomial, assign: Assignment, predicate: Ranges
) -> float:
    """Derivative of the query-extended polynomial in its fresh variable.

    Extending the polynomial tags every monomial whose tuple satisfies the
    query with a new variable; the derivative in that variable at value 1 is
    the sum of exactly those monomials.
    """
    eff = assign.effective_values()
    total = 0.0
    for coords, ids in npoly.monomials:
        if not _satisfies(coords, predicate):
            continue
        val = 1.0
        for j in ids:
            val *= eff[j]
        total += val
    return total


def _tuple_ids(stats: StatisticSet) -> list[tuple[int, ...]]:
    schema = stats.schema
    return [
        tuple(st.id for st in stats.statistics if _satisfies(coords, st.ranges))
        for coords in itertools.product(*(range(a.size) for a in schema.attributes))
    ]


def instance_probability(
    stats: StatisticSet,
    assign: Assignment,
    instance: Sequence[tuple[int, ...]],
    n: Optional[int] = None,
) -> float:
    """Probability of one ordered instance: the product over statistics of
    alpha_j to the statistic's count on the instance, normalized by P^n."""
    if n is None:
        n = len(instance)
    if n != len(instance):
        raise PolynomialError("instance length does not match n")
    eff = assign.effective_values()
    counts: Counter = Counter()
    for coords in instance:
        for st in stats.statistics:
            if _satisfies(coords, st.ranges):
                counts[st.id] += 1
    weight = 1.0
    for j, c in counts.items():
        weight *= eff[j] ** c
    p = naive_eval(naive_expand(stats), assign)
    return weight / p ** n


def enumerate_worlds(stats: StatisticSet, assign: Assignment, n: int, cap: int):
    """Yield (world, weight) over all d^n ordered instances, by definition."""
    schema = stats.schema
    if schema.d ** n > cap:
        raise PolynomialError(f"{schema.d}^{n} worlds exceeds cap {cap}")
    eff = assign.effective_values()
    tuple_ids = _tuple_ids(stats)
    tuples = list(itertools.product(*(range(a.size) for a in schema.attributes)))
    for world in itertools.product(range(len(tuples)), repeat=n):
        counts: Counter = Counter()
        for t in world:
            counts.update(tuple_ids[t])
        weight = 1.0
        for j, c in counts.items():
            weight *= eff[j] ** c
        yield tuple(tuples[t] for t in world), weight


def brute_expectation(
    stats: StatisticSet,
    assign: Assignment,
    predicate: Ranges,
    n: int,
    cap: int = WORLD_CAP,
) -> float:
    """Expected count of a predicate by full enumeration of the d^n worlds."""
    num = 0.0
    den = 0.0
    for world, weight in enumerate_worlds(stats, assign, n, cap):
        sat = sum(1 for coords in world if _satisfies(coords, predicate))
        num += weight * sat
        den += weight
    if den == 0.0:
        raise PolynomialError("all worlds have zero weight under this assignment")
    return num / den


def verify_partition(
    stats: StatisticSet,
    assign: Assignment,
    n: int,
    rel_tol: float = 1e-9,
    cap: int = WORLD_CAP,
) -> bool:
    """Check the partition identity: the enumerated normalization constant
    equals the single-tuple polynomial raised to the instance size."""
    z = 0.0
    for _, weight in enumerate_worlds(stats, assign, n, cap):
        z += weight
    p = naive_eval(naive_expand(stats), assign)
    return abs(z - p ** n) <= rel_tol * max(abs(z), abs(p ** n))
