"""Model fitting: coordinate-wise closed-form updates on the concave dual.

Each coordinate update sets one variable to the value that makes its model
expectation match its target count exactly, holding the others fixed:

    alpha_j  <-  s_j * (P - alpha_j * P_aj) / ((n - s_j) * P_aj)

with P_aj the partial derivative of the partition polynomial.  Sweeping all
coordinates repeatedly maximizes the dual

    Psi = sum_j s_j ln(alpha_j) - n ln(P)

which is concave, so the trace of Psi must never decrease.

Variables with target 0 stay pinned at 0 (their cells are impossible), and a
target equal to n pins its variable at 1 because the constraint is implied by
the instance size.  solve() runs an incremental sweep engine that maintains P
through the multilinear identity P = P[alpha_j = 0] + alpha_j * P_aj instead
of re-evaluating the polynomial per coordinate; update_coordinate() is the
plain reference implementation of one step.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SolverError
from .polynomial import (
    Assignment,
    CompressedPolynomial,
    VariableStore,
    derivative_general,
    evaluate,
    evaluate_log,
)
from .stats import StatisticSet

logger = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    threshold: float = 1e-6
    max_iterations: int = 30
    init_value: float = 1.0

    def __post_init__(self):
        if self.threshold <= 0:
            raise SolverError("threshold must be positive")
        if self.max_iterations < 1:
            raise SolverError("max_iterations must be >= 1")


@dataclass
class SolverState:
    store: VariableStore
    n: int
    p_value: float = 0.0
    residuals: dict[int, float] = field(default_factory=dict)
    psi_trace: list[float] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    pinned_zero: frozenset = frozenset()
    pinned_one: frozenset = frozenset()
    unreachable: set = field(default_factory=set)
    trace: list[dict] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _relation_size(stats: StatisticSet) -> int:
    """n is determined by any attribute's complete 1D block."""
    return sum(stats.statistics[j].s for j in stats.one_d_ids(0))


def _pin_sets(stats: StatisticSet, n: int) -> tuple[frozenset, frozenset]:
    zero = frozenset(st.id for st in stats.statistics if st.s == 0)
    one = frozenset(st.id for st in stats.statistics if st.s == n)
    return zero, one


def dual_value(
    poly: CompressedPolynomial,
    stats: StatisticSet,
    store: VariableStore,
    n: int,
) -> float:
    """The dual objective; 0 * ln(0) counts as 0 for pinned zero targets."""
    total = 0.0
    for st in stats.statistics:
        if st.s == 0:
            continue
        alpha = store.values[st.id]
        if alpha <= 0.0:
            return -math.inf
        total += st.s * math.log(alpha)
    p = evaluate(poly, Assignment(store=store))
    if 0.0 < p < math.inf:
        return total - n * math.log(p)
    sign, log_p = evaluate_log(poly, Assignment(store=store))
    if sign <= 0:
        raise SolverError("partition polynomial is not positive at this assignment")
    return total - n * log_p


def update_coordinate(poly: CompressedPolynomial, state: SolverState, j: int) -> float:
    """One closed-form coordinate step, by direct polynomial evaluation.

    Reference path for the sweep engine; solve() must produce the same
    trajectory.  Requires 0 < s_j < n and a structurally present variable.
    """
    stats = poly.stats
    st = stats.statistics[j]
    n = state.n
    if st.s <= 0 or st.s >= n:
        raise SolverError(f"statistic {j} with target {st.s} is pinned, not updatable")
    assign = Assignment(store=state.store)
    if j < stats.one_d_count:
        attr, _ = stats.attr_value_of(j)
        siblings = set(stats.one_d_ids(attr)) - {j}
        p_aj = evaluate(poly, assign.with_zeros(siblings).with_override(j, 1.0))
    else:
        p_aj = derivative_general(poly, assign, j)
    if p_aj <= 0.0:
        state.unreachable.add(j)
        raise SolverError(f"statistic {j} is structurally absent (derivative 0)")
    p0 = evaluate(poly, assign.with_override(j, 0.0))
    value = st.s * p0 / ((n - st.s) * p_aj)
    if not math.isfinite(value):
        raise SolverError(f"coordinate update for statistic {j} diverged")
    state.store.values[j] = value
    state.p_value = p0 + value * p_aj
    return value


class _SweepEngine:
    """Incremental evaluation state for coordinate sweeps.

    Holds, per inclusion-exclusion term, its restricted interval sums, their
    product, and the (alpha - 1) product, all as per-group vectors.  During
    an attribute's phase the derivative of every coordinate in the block is
    stable + per_value[v], both precomputed, and P follows each update
    through the multilinear identity.  Everything is recomputed from the
    current values at every phase start, so drift cannot outlive a phase.
    """

    def __init__(self, poly: CompressedPolynomial, values: np.ndarray):
        self.poly = poly
        self.stats = poly.stats
        self.eff = values
        schema = self.stats.schema
        self.m = schema.m
        self.sizes = schema.sizes
        self.offsets = self.stats.one_d_offsets
        self.groups = [g for g in poly.groups if g.attrs]
        self.inc2: dict[int, list] = {}
        for gi, g in enumerate(self.groups):
            for mi, t in enumerate(g.members):
                for j in t.stat_ids:
                    self.inc2.setdefault(j, []).append((gi, mi))
        # per (group, column): flattened bucket indices of every member's
        # interval plus reduceat segment offsets, fixed at construction
        self.col_index: list[list[np.ndarray]] = []
        self.col_segments: list[list[np.ndarray]] = []
        self.col_widths: list[list[np.ndarray]] = []
        for g in self.groups:
            per_col_idx, per_col_seg, per_col_w = [], [], []
            for c in range(len(g.attrs)):
                u = g.u_mat[:, c]
                v = g.v_mat[:, c]
                widths = v - u + 1
                idx = np.concatenate([np.arange(a, b + 1) for a, b in zip(u, v)])
                seg = np.concatenate(([0], np.cumsum(widths)[:-1]))
                per_col_idx.append(idx)
                per_col_seg.append(seg)
                per_col_w.append(widths)
            self.col_index.append(per_col_idx)
            self.col_segments.append(per_col_seg)
            self.col_widths.append(per_col_w)
        self.full = np.zeros(self.m)
        self.fmat = [np.ones((len(g.members), len(g.attrs))) for g in self.groups]
        self.fprod = [np.ones(len(g.members)) for g in self.groups]
        self.sprod = [np.ones(len(g.members)) for g in self.groups]
        self.gsum = np.zeros(len(self.groups))

    def vec(self, i: int) -> np.ndarray:
        return self.eff[self.offsets[i]: self.offsets[i] + self.sizes[i]]

    def refresh(self) -> None:
        for i in range(self.m):
            self.full[i] = float(np.sum(self.vec(i)))
        for gi, g in enumerate(self.groups):
            fmat = self.fmat[gi]
            for c, i in enumerate(g.attrs):
                fmat[:, c] = np.add.reduceat(
                    self.vec(i)[self.col_index[gi][c]], self.col_segments[gi][c])
            self.fprod[gi] = np.prod(fmat, axis=1)
            self.sprod[gi] = np.multiply.reduceat(
                self.eff[g.sid_flat] - 1.0, g.sid_offsets)
            self.gsum[gi] = float(np.sum(self.fprod[gi] * self.sprod[gi]))

    def _comp(self, attrs, skip=None) -> float:
        out = 1.0
        for ii in range(self.m):
            if ii not in attrs and ii != skip:
                out *= self.full[ii]
        return out

    def p_value(self) -> float:
        p = float(np.prod(self.full))
        for gi, g in enumerate(self.groups):
            p += self._comp(g.attrs) * self.gsum[gi]
        return p

    def phase_contributions(self, i: int) -> tuple[float, np.ndarray]:
        """Stationary decomposition of the attribute-i derivatives: for every
        value v, dP/d(alpha at (i, v)) = stable + per_value[v]."""
        stable = self._comp((i,))
        for gi, g in enumerate(self.groups):
            if i not in g.attrs:
                stable += self._comp(g.attrs, skip=i) * self.gsum[gi]
        per_value = np.zeros(self.sizes[i])
        for gi, g in enumerate(self.groups):
            if i not in g.attrs:
                continue
            comp = self._comp(g.attrs)
            ai = g.attrs.index(i)
            prodwo = self.sprod[gi].copy()
            for c in range(len(g.attrs)):
                if c != ai:
                    prodwo *= self.fmat[gi][:, c]
            np.add.at(
                per_value,
                self.col_index[gi][ai],
                np.repeat(comp * prodwo, self.col_widths[gi][ai]),
            )
        return float(stable), per_value

    def two_d_derivative(self, j: int) -> float:
        out = 0.0
        for gi, mi in self.inc2.get(j, ()):
            g = self.groups[gi]
            t = g.members[mi]
            sp = 1.0
            for jj in t.stat_ids:
                if jj != j:
                    sp *= self.eff[jj] - 1.0
            out += self._comp(g.attrs) * self.fprod[gi][mi] * sp
        return out


def solve(
    poly: CompressedPolynomial,
    stats: StatisticSet,
    config: Optional[SolverConfig] = None,
) -> SolverState:
    """Sweep all active coordinates in ascending id order until every
    residual |s_j - n alpha_j P_aj / P| is below the threshold.

    Residuals are measured at the state left by the previous sweep (the
    pre-update reading); the literal post-update differences are logged
    alongside.  Any non-finite variable or partition value aborts.
    """
    if config is None:
        config = SolverConfig()
    if stats is not poly.stats:
        raise SolverError("statistics do not match the polynomial")
    n = _relation_size(stats)
    pinned_zero, pinned_one = _pin_sets(stats, n)
    values = np.full(stats.k, float(config.init_value))
    for j in pinned_zero:
        values[j] = 0.0
    for j in pinned_one:
        values[j] = 1.0
    store = VariableStore(stats=stats, values=values)
    state = SolverState(
        store=store, n=n, pinned_zero=pinned_zero, pinned_one=pinned_one)

    engine = _SweepEngine(poly, store.values)
    targets = np.array([st.s for st in stats.statistics], dtype=np.float64)
    active = [
        j for j in range(stats.k)
        if j not in pinned_zero and j not in pinned_one
    ]

    def residual_pass(update: bool) -> tuple[dict[int, float], float]:
        """One pass over active coordinates; optionally apply updates."""
        residuals: dict[int, float] = {}
        post_max = 0.0
        for i in range(engine.m):
            engine.refresh()
            p = engine.p_value()
            stable, per_value = engine.phase_contributions(i)
            for v in range(engine.sizes[i]):
                j = stats.one_d_id(i, v)
                if j not in active_set:
                    continue
                p_aj = stable + per_value[v]
                if not (math.isfinite(p) and p > 0):
                    raise SolverError(f"partition value degenerated to {p}")
                if p_aj <= 0.0:
                    state.unreachable.add(j)
                    continue
                residuals[j] = abs(targets[j] - n * engine.eff[j] * p_aj / p)
                if update:
                    p0 = p - engine.eff[j] * p_aj
                    new_value = targets[j] * p0 / ((n - targets[j]) * p_aj)
                    if not math.isfinite(new_value):
                        raise SolverError(
                            f"coordinate {j} diverged (new value {new_value})")
                    engine.eff[j] = new_value
                    p = p0 + new_value * p_aj
                    post_max = max(
                        post_max,
                        abs(new_value - n * new_value * p_aj / p) if p else math.inf,
                    )
        engine.refresh()
        p = engine.p_value()
        for j in sorted(engine.inc2):
            if j not in active_set:
                continue
            p_aj = engine.two_d_derivative(j)
            if not (math.isfinite(p) and p > 0):
                raise SolverError(f"partition value degenerated to {p}")
            if p_aj <= 0.0:
                state.unreachable.add(j)
                continue
            residuals[j] = abs(targets[j] - n * engine.eff[j] * p_aj / p)
            if update:
                p0 = p - engine.eff[j] * p_aj
                new_value = targets[j] * p0 / ((n - targets[j]) * p_aj)
                if not math.isfinite(new_value):
                    raise SolverError(
                        f"coordinate {j} diverged (new value {new_value})")
                engine.eff[j] = new_value
                p = p0 + new_value * p_aj
                post_max = max(
                    post_max,
                    abs(new_value - n * new_value * p_aj / p) if p else math.inf,
                )
        return residuals, post_max

    active_set = set(active)
    state.psi_trace.append(dual_value(poly, stats, store, n))
    state.residuals, _ = residual_pass(update=False)
    if state.max_residual < config.threshold:
        state.converged = True
        state.p_value = evaluate(poly, Assignment(store=store))
        return state

    for sweep in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        active_set -= state.unreachable
        pre_residuals, post_max = residual_pass(update=True)
        state.sweeps = sweep
        state.residuals, _ = residual_pass(update=False)
        if not np.all(np.isfinite(store.values)):
            raise SolverError("solver diverged: non-finite variable value")
        psi = dual_value(poly, stats, store, n)
        state.psi_trace.append(psi)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        entry = {
            "sweep": sweep,
            "max_residual": state.max_residual,
            "pre_update_max": max(pre_residuals.values(), default=0.0),
            "post_update_max": post_max,
            "psi": psi,
            "wall_ms": wall_ms,
        }
        state.trace.append(entry)
        logger.info(
            "sweep=%d max_residual=%.3e psi=%.12g wall_ms=%.1f",
            sweep, state.max_residual, psi, wall_ms,
        )
        if state.max_residual < config.threshold:
            state.converged = True
            break

    state.p_value = evaluate(poly, Assignment(store=store))
    return state
