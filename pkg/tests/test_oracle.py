"""World-enumeration oracles: partition identity, expectation formulas,
and the extended-polynomial derivative route."""

import itertools

import numpy as np
import pytest

from entsum.oracle import (
    brute_expectation,
    extended_beta_derivative,
    instance_probability,
    naive_eval,
    naive_expand,
    verify_partition,
)
from entsum.polynomial import (
    Assignment,
    VariableStore,
    build_compressed,
    derivative_general,
    derivative_weighted,
    evaluate,
)

from conftest import make_schema, make_stats, random_assignment, small_random_stats


def test_naive_expand_example1(ex1_stats):
    npoly = naive_expand(ex1_stats)
    assert len(npoly.monomials) == 8
    for coords, ids in npoly.monomials:
        assert len(ids) == 3
        assert all(j < 6 for j in ids)


def test_naive_expand_example2_tuple_tags(ex2_stats):
    npoly = naive_expand(ex2_stats)
    tags = {coords: ids for coords, ids in npoly.monomials}
    # (a2, b2, c1) carries the (A2,B2) and (B2,C1) variables
    assert set(tags[(1, 1, 0)]) == {1, 3, 4, 7, 9}
    # (a1, b1, c1) carries (A1,B1) and (B1,C1)
    assert set(tags[(0, 0, 0)]) == {0, 2, 4, 6, 8}


def test_naive_expand_degenerate_domain():
    schema = make_schema([1])
    schema.n = 5
    stats = make_stats(schema, [[5]], n=5)
    npoly = naive_expand(stats)
    assert len(npoly.monomials) == 1


def test_instance_probability_worked_example(ex1_stats):
    rng = np.random.default_rng(0)
    instance = [(0, 0, 0)] + [(0, 1, 1)] * 9
    assign = random_assignment(rng, ex1_stats)
    a = assign.store.values
    p = naive_eval(naive_expand(ex1_stats), assign)
    expected = a[0] ** 10 * a[2] * a[3] ** 9 * a[4] * a[5] ** 9 / p ** 10
    assert instance_probability(ex1_stats, assign, instance) == pytest.approx(
        expected, rel=1e-12)


def test_instance_probability_gains_2d_factors(ex2_stats):
    rng = np.random.default_rng(1)
    instance = [(0, 0, 0)] + [(0, 1, 1)] * 9
    assign = random_assignment(rng, ex2_stats)
    a = assign.store.values
    p = naive_eval(naive_expand(ex2_stats), assign)
    expected = (a[0] ** 10 * a[2] * a[3] ** 9 * a[4] * a[5] ** 9
                * a[6] * a[8] / p ** 10)
    assert instance_probability(ex2_stats, assign, instance) == pytest.approx(
        expected, rel=1e-12)


def test_instance_probability_uniform_model(ex1_stats):
    assign = Assignment(store=VariableStore.all_ones(ex1_stats))
    for inst in [[(0, 0, 0)], [(1, 1, 1)], [(0, 1, 0)]]:
        assert instance_probability(ex1_stats, assign, inst) == pytest.approx(
            1 / 8, rel=1e-12)
    two = [(0, 0, 0), (1, 0, 1)]
    assert instance_probability(ex1_stats, assign, two) == pytest.approx(
        1 / 64, rel=1e-12)


def test_brute_expectation_uniform_point():
    schema = make_schema([2, 2])
    schema.n = 1
    stats = make_stats(schema, [(1, 0), (0, 1)], n=1)
    assign = Assignment(store=VariableStore.all_ones(stats))
    got = brute_expectation(stats, assign, ((0, 0), (1, 1)), n=1)
    assert got == pytest.approx(1 / 4, rel=1e-12)


def test_brute_expectation_total_mass(ex1_stats):
    rng = np.random.default_rng(2)
    assign = random_assignment(rng, ex1_stats)
    total = 0.0
    for coords in itertools.product(range(2), range(2), range(2)):
        pred = tuple((c, c) for c in coords)
        total += brute_expectation(ex1_stats, assign, pred, n=2)
    assert total == pytest.approx(2.0, rel=1e-9)


def test_partition_identity_uniform(ex1_stats):
    assign = Assignment(store=VariableStore.all_ones(ex1_stats))
    assert verify_partition(ex1_stats, assign, n=2)


def test_partition_identity_random_fixtures():
    rng = np.random.default_rng(31415)
    checked = 0
    for _ in range(20):
        stats, _ = small_random_stats(rng)
        n = int(rng.integers(1, 4))
        assign = random_assignment(rng, stats, lo=1e-9, hi=2.0)
        assert verify_partition(stats, assign, n=n)
        checked += 1
    assert checked == 20


def test_expectation_formula_every_statistic():
    rng = np.random.default_rng(6)
    for _ in range(8):
        stats, n = small_random_stats(rng)
        poly = build_compressed(stats)
        assign = random_assignment(rng, stats)
        p = evaluate(poly, assign)
        for st in stats.statistics:
            if st.id < stats.one_d_count:
                weighted = derivative_weighted(poly, assign, st.id)
            else:
                weighted = assign.store.values[st.id] * derivative_general(
                    poly, assign, st.id)
            model = n / p * weighted
            brute = brute_expectation(stats, assign, st.ranges, n=n)
            assert model == pytest.approx(brute, rel=1e-9, abs=1e-12)


def test_point_query_three_routes_agree():
    """Point queries: extended-variable derivative, iterated zeroing, and the
    plain zero-and-evaluate formula give the same value on the expansion."""
    rng = np.random.default_rng(7)
    for _ in range(10):
        stats, n = small_random_stats(rng)
        schema = stats.schema
        npoly = naive_expand(stats)
        assign = random_assignment(rng, stats)
        coords = tuple(int(rng.integers(0, a.size)) for a in schema.attributes)
        pred = tuple((c, c) for c in coords)

        beta_route = extended_beta_derivative(npoly, assign, pred)

        zeroed = set()
        for i, c in enumerate(coords):
            zeroed.update(set(stats.one_d_ids(i)) - {stats.one_d_id(i, c)})
        zero_route = naive_eval(npoly, assign.with_zeros(zeroed))

        compressed_route = evaluate(build_compressed(stats),
                                    assign.with_zeros(zeroed))

        assert beta_route == pytest.approx(zero_route, rel=1e-12, abs=1e-300)
        assert compressed_route == pytest.approx(zero_route, rel=1e-11, abs=1e-300)
