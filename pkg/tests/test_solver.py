"""Coordinate solver: fixed points, convergence, pinning, dual monotonicity."""

import math

import numpy as np
import pytest

from entsum.errors import SolverError
from entsum.oracle import brute_expectation
from entsum.polynomial import (
    Assignment,
    VariableStore,
    build_compressed,
    derivative_general,
    derivative_weighted,
    evaluate,
)
from entsum.solver import (
    SolverConfig,
    SolverState,
    dual_value,
    solve,
    update_coordinate,
)

from _reference import dense_dual_ascent, total_variation, tuple_probabilities
from conftest import make_schema, make_stats


def fresh_state(stats, n):
    return SolverState(store=VariableStore.all_ones(stats), n=n)


def model_expectations(poly, stats, store, n):
    assign = Assignment(store=store)
    p = evaluate(poly, assign)
    out = {}
    for st in stats.statistics:
        if st.id < stats.one_d_count:
            w = derivative_weighted(poly, assign, st.id)
        else:
            w = store.values[st.id] * derivative_general(poly, assign, st.id)
        out[st.id] = n * w / p
    return out


def test_symmetric_fixed_point():
    schema = make_schema([2, 2])
    schema.n = 10
    stats = make_stats(schema, [(5, 5), (5, 5)], n=10)
    poly = build_compressed(stats)
    state = fresh_state(stats, 10)
    for j in range(4):
        assert update_coordinate(poly, state, j) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(state.store.values, 1.0)


def test_update_coordinate_stationarity(ex2_stats):
    poly = build_compressed(ex2_stats)
    state = fresh_state(ex2_stats, 10)
    rng = np.random.default_rng(0)
    for j in rng.permutation(10):
        update_coordinate(poly, state, int(j))
        exp = model_expectations(poly, ex2_stats, state.store, 10)[int(j)]
        target = ex2_stats.statistics[int(j)].s
        assert abs(target - exp) < 1e-12 * 10


def test_update_coordinate_rejects_pinned():
    schema = make_schema([2, 2])
    schema.n = 10
    stats = make_stats(schema, [(10, 0), (5, 5)], n=10)
    poly = build_compressed(stats)
    state = fresh_state(stats, 10)
    with pytest.raises(SolverError):
        update_coordinate(poly, state, 0)  # s = n
    with pytest.raises(SolverError):
        update_coordinate(poly, state, 1)  # s = 0


def test_solve_example1_converges(ex1_stats):
    poly = build_compressed(ex1_stats)
    state = solve(poly, ex1_stats)
    assert state.converged
    assert state.sweeps <= 30
    assert state.max_residual < 1e-6
    exps = model_expectations(poly, ex1_stats, state.store, 10)
    for st in ex1_stats.statistics:
        assert exps[st.id] == pytest.approx(st.s, abs=1e-6)
        brute = brute_expectation(ex1_stats, Assignment(store=state.store),
                                  st.ranges, n=2)
        assert brute * 5 == pytest.approx(exps[st.id], rel=1e-9)


def test_solve_example2_converges(ex2_stats):
    poly = build_compressed(ex2_stats)
    state = solve(poly, ex2_stats)
    assert state.converged
    assert state.sweeps <= 30
    assert state.max_residual < 1e-6
    exps = model_expectations(poly, ex2_stats, state.store, 10)
    for st in ex2_stats.statistics:
        assert exps[st.id] == pytest.approx(st.s, abs=2e-6)


def test_solve_matches_reference_updates(ex2_stats):
    poly = build_compressed(ex2_stats)
    fast = solve(poly, ex2_stats, SolverConfig(threshold=1e-30, max_iterations=1))
    state = fresh_state(ex2_stats, 10)
    for j in range(10):
        update_coordinate(poly, state, j)
    np.testing.assert_allclose(fast.store.values, state.store.values, rtol=1e-12)


def test_solve_matches_dense_dual_ascent(ex2_stats):
    poly = build_compressed(ex2_stats)
    state = solve(poly, ex2_stats, SolverConfig(threshold=1e-10, max_iterations=100))
    ref_probs, _ = dense_dual_ascent(ex2_stats, 10)
    got_probs = tuple_probabilities(ex2_stats, state.store.values)
    assert total_variation(got_probs, ref_probs) < 1e-6


def test_zero_target_stays_pinned():
    schema = make_schema([2, 2])
    schema.n = 10
    stats = make_stats(
        schema, [(10, 0), (6, 4)],
        two_d=[({0: (0, 0), 1: (1, 1)}, 4)], n=10)
    poly = build_compressed(stats)
    state = solve(poly, stats)
    assert 1 in state.pinned_zero
    assert state.store.values[1] == 0.0
    assert 0 in state.pinned_one  # s = n on the complement value
    assert state.store.values[0] == 1.0
    assert state.converged


def test_uniform_targets_converge_immediately():
    schema = make_schema([4, 3])
    schema.n = 12
    stats = make_stats(schema, [(3, 3, 3, 3), (4, 4, 4)], n=12)
    poly = build_compressed(stats)
    state = solve(poly, stats)
    assert state.converged
    assert state.sweeps <= 1
    for i in range(2):
        block = state.store.values[list(stats.one_d_ids(i))]
        assert np.allclose(block, block[0])


def test_dual_value_uniform_model(ex1_stats):
    poly = build_compressed(ex1_stats)
    store = VariableStore.all_ones(ex1_stats)
    assert dual_value(poly, ex1_stats, store, 10) == pytest.approx(
        -10 * math.log(8), rel=1e-12)


def test_dual_value_ignores_pinned_zero_targets():
    schema = make_schema([2, 2])
    schema.n = 10
    stats = make_stats(schema, [(10, 0), (5, 5)], n=10)
    poly = build_compressed(stats)
    values = np.array([1.0, 0.0, 1.0, 1.0])
    store = VariableStore(stats=stats, values=values)
    psi = dual_value(poly, stats, store, 10)
    assert math.isfinite(psi)
    # only the two monomials with A=a1 survive
    assert psi == pytest.approx(-10 * math.log(2), rel=1e-12)


def test_psi_increases_after_nontrivial_update(ex2_stats):
    poly = build_compressed(ex2_stats)
    state = fresh_state(ex2_stats, 10)
    rng = np.random.default_rng(1)
    state.store.values[:6] = rng.uniform(0.5, 1.5, size=6)
    for j in range(10):
        before = dual_value(poly, ex2_stats, state.store, 10)
        old = state.store.values[j]
        new = update_coordinate(poly, state, j)
        after = dual_value(poly, ex2_stats, state.store, 10)
        if abs(new - old) > 1e-9:
            assert after > before - 1e-12
            assert after - before > 0


def test_psi_trace_monotone(ex2_stats):
    poly = build_compressed(ex2_stats)
    state = solve(poly, ex2_stats)
    trace = state.psi_trace
    assert len(trace) >= 2
    for a, b in zip(trace, trace[1:]):
        assert b >= a - 1e-9


def test_inconsistent_statistics_report_residuals():
    schema = make_schema([2, 2])
    schema.n = 10
    stats = make_stats(
        schema, [(5, 5), (5, 5)],
        two_d=[({0: (0, 0), 1: (0, 0)}, 9)], n=10)  # exceeds both marginals
    poly = build_compressed(stats)
    state = solve(poly, stats, SolverConfig(max_iterations=10))
    assert not state.converged
    assert state.sweeps == 10
    assert all(math.isfinite(r) for r in state.residuals.values())
    assert state.max_residual > 1e-3


def test_unreachable_statistic_is_flagged():
    schema = make_schema([2, 2])
    schema.n = 10
    # the 1D target for A=a1 is 0 yet a 2D statistic claims 2 rows there
    stats = make_stats(
        schema, [(0, 10), (5, 5)],
        two_d=[({0: (0, 0), 1: (0, 0)}, 2)], n=10)
    poly = build_compressed(stats)
    state = solve(poly, stats)
    assert 4 in state.unreachable
    assert 4 not in state.residuals


def test_solver_config_validation():
    with pytest.raises(SolverError):
        SolverConfig(threshold=0.0)
    with pytest.raises(SolverError):
        SolverConfig(max_iterations=0)


def test_solver_trace_and_p_value(ex2_stats):
    poly = build_compressed(ex2_stats)
    state = solve(poly, ex2_stats)
    assert state.p_value == pytest.approx(
        evaluate(poly, Assignment(store=state.store)), rel=1e-12)
    assert len(state.trace) == state.sweeps
    for entry in state.trace:
        assert set(entry) >= {"sweep", "max_residual", "psi", "wall_ms"}
