"""Evaluation harness: workloads, sampling baselines, error metrics, reports.

Workloads follow the heavy/light/null recipe: the most frequent value
combinations, the least frequent existing ones, and combinations absent from
the data.  Baselines are uniform and stratified samples with scale-up
weights; the report compares their point estimates against summaries on the
symmetric relative error and on how well rounded estimates separate rare
values from nonexistent ones.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EvalError
from .query import QueryPlan, Summary, answer
from .schema import DatasetHandle, Ranges, Schema

_erf = np.vectorize(math.erf)


@dataclass
class Workload:
    attrs: tuple[int, ...]
    heavy: list[tuple[tuple[int, ...], int]]
    light: list[tuple[tuple[int, ...], int]]
    null: list[tuple[tuple[int, ...], int]]

    def segments(self):
        yield "heavy", self.heavy
        yield "light", self.light
        yield "null", self.null


def build_workload(
    data: DatasetHandle,
    attrs: Sequence[int],
    k_heavy: int,
    k_light: int,
    k_null: int,
) -> Workload:
    """Rank value combinations by exact count; ties break by value index."""
    attrs = tuple(attrs)
    counts = data.marginal(attrs)
    flat = [(tuple(int(c) for c in coords), int(counts[coords]))
            for coords in itertools.product(*(range(s) for s in counts.shape))]
    nonzero = [(coords, c) for coords, c in flat if c > 0]
    zero = [(coords, 0) for coords, c in flat if c == 0]
    if k_heavy + k_light > len(nonzero):
        raise EvalError(
            f"workload needs {k_heavy}+{k_light} existing values, "
            f"only {len(nonzero)} available")
    if k_null > len(zero):
        raise EvalError(f"workload needs {k_null} null values, only {len(zero)} empty cells")
    by_desc = sorted(nonzero, key=lambda t: (-t[1], t[0]))
    heavy = by_desc[:k_heavy]
    rest = by_desc[k_heavy:]
    light = sorted(rest, key=lambda t: (t[1], t[0]))[:k_light]
    return Workload(attrs=attrs, heavy=heavy, light=light, null=zero[:k_null])


def error_metric(true: float, est: float) -> float:
    """Symmetric relative error |true - est| / (true + est), in [0, 1]."""
    if true + est <= 0:
        raise EvalError("error metric undefined when true + est is 0")
    return abs(true - est) / (true + est)


def f_measure(light_estimates: Sequence[int], null_estimates: Sequence[int]) -> float:
    """Harmonic mean of precision and recall of 'estimate > 0' as an
    existence test over the light and null sets; 0 when nothing scores
    positive."""
    light_pos = sum(1 for e in light_estimates if e > 0)
    null_pos = sum(1 for e in null_estimates if e > 0)
    if light_pos + null_pos == 0 or not light_estimates:
        return 0.0
    precision = light_pos / (light_pos + null_pos)
    recall = light_pos / len(light_estimates)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass
class SampleBaseline:
    """Rows drawn from the data with Horvitz-Thompson scale-up weights."""

    kind: str
    rate: float
    rows: np.ndarray
    weights: np.ndarray

    @classmethod
    def uniform(cls, data: DatasetHandle, rate: float, seed: int = 0) -> "SampleBaseline":
        if not 0 < rate <= 1:
            raise EvalError(f"sampling rate {rate} out of (0, 1]")
        rng = np.random.default_rng(seed)
        size = max(1, round(rate * data.row_count))
        idx = rng.choice(data.row_count, size=size, replace=False)
        return cls(
            kind="uniform",
            rate=rate,
            rows=data.rows[idx],
            weights=np.full(size, data.row_count / size),
        )

    @classmethod
    def stratified(
        cls, data: DatasetHandle, pair: tuple[int, int], rate: float, seed: int = 0
    ) -> "SampleBaseline":
        """Equal allocation over the pair's nonempty cells, at least one row
        per stratum, per-stratum scale-up N_h / m_h."""
        if not 0 < rate <= 1:
            raise EvalError(f"sampling rate {rate} out of (0, 1]")
        rng = np.random.default_rng(seed)
        i1, i2 = pair
        n2 = data.schema.attributes[i2].size
        keys = data.rows[:, i1] * n2 + data.rows[:, i2]
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        boundaries = np.flatnonzero(np.diff(sorted_keys)) + 1
        strata = np.split(order, boundaries)
        budget = max(1, round(rate * data.row_count))
        per_stratum = max(1, round(budget / len(strata)))
        taken = []
        weights = []
        for members in strata:
            m_h = min(len(members), per_stratum)
            pick = rng.choice(members, size=m_h, replace=False)
            taken.append(pick)
            weights.append(np.full(m_h, len(members) / m_h))
        idx = np.concatenate(taken)
        return cls(
            kind=f"stratified({data.schema.attributes[i1].name},"
                 f"{data.schema.attributes[i2].name})",
            rate=rate,
            rows=data.rows[idx],
            weights=np.concatenate(weights),
        )

    def estimate(self, predicate: Ranges) -> float:
        mask = np.ones(len(self.rows), dtype=bool)
        for i, r in enumerate(predicate):
            if r is not None:
                col = self.rows[:, i]
                mask &= (col >= r[0]) & (col <= r[1])
        return float(self.weights[mask].sum())


@dataclass
class MetricReport:
    methods: dict[str, dict]
    rows: list[dict] = field(default_factory=list)

    def to_json(self, path) -> None:
        Path(path).write_text(
            json.dumps({"methods": self.methods, "rows": self.rows}, indent=2),
            encoding="utf-8")

    def to_csv(self, path) -> None:
        fields = ["method", "segment", "value", "true", "estimate", "rounded",
                  "error", "wall_ms"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows({k: r[k] for k in fields} for r in self.rows)


def _point_predicate(schema: Schema, attrs, coords) -> Ranges:
    lookup = dict(zip(attrs, coords))
    return tuple(
        (lookup[i], lookup[i]) if i in lookup else None for i in range(schema.m))


def run_comparison(
    data: DatasetHandle,
    summaries: dict[str, Summary],
    baselines: dict[str, SampleBaseline],
    workload: Workload,
) -> MetricReport:
    """Evaluate every method on every workload value."""
    schema = data.schema
    methods: dict[str, dict] = {}
    rows: list[dict] = []
    estimates: dict[str, dict[str, list]] = {}
    for name in list(summaries) + list(baselines):
        estimates[name] = {"heavy": [], "light": [], "null": []}

    for segment, entries in workload.segments():
        for coords, true in entries:
            predicate = _point_predicate(schema, workload.attrs, coords)
            label = ",".join(
                schema.attributes[i].value_label(c)
                for i, c in zip(workload.attrs, coords))
            for name, summary in summaries.items():
                t0 = time.perf_counter()
                out = answer(summary, QueryPlan(predicates=predicate))
                wall = (time.perf_counter() - t0) * 1000.0
                raw, rounded = out.rows[0].raw, out.rows[0].rounded
                estimates[name][segment].append((true, raw, rounded))
                rows.append({
                    "method": name, "segment": segment, "value": label,
                    "true": true, "estimate": raw, "rounded": rounded,
                    "error": error_metric(true, raw) if true + raw > 0 else 0.0,
                    "wall_ms": wall,
                })
            for name, baseline in baselines.items():
                t0 = time.perf_counter()
                est = baseline.estimate(predicate)
                wall = (time.perf_counter() - t0) * 1000.0
                rounded = int(math.floor(est + 0.5))
                estimates[name][segment].append((true, est, rounded))
                rows.append({
                    "method": name, "segment": segment, "value": label,
                    "true": true, "estimate": est, "rounded": rounded,
                    "error": error_metric(true, est) if true + est > 0 else 0.0,
                    "wall_ms": wall,
                })

    for name, segs in estimates.items():
        summary_metrics = {}
        for segment in ("heavy", "light"):
            entries = segs[segment]
            if entries:
                summary_metrics[f"{segment}_mean_error"] = float(np.mean([
                    error_metric(true, est) if true + est > 0 else 0.0
                    for true, est, _ in entries]))
        summary_metrics["f_measure"] = f_measure(
            [r for _, _, r in segs["light"]],
            [r for _, _, r in segs["null"]])
        summary_metrics["mean_wall_ms"] = float(np.mean([
            r["wall_ms"] for r in rows if r["method"] == name]))
        methods[name] = summary_metrics
    return MetricReport(methods=methods, rows=rows)


def synthetic_rows(
    rng: np.random.Generator,
    sizes: Sequence[int],
    n: int,
    correlations: Optional[dict[tuple[int, int], float]] = None,
    skew: float = 1.0,
) -> np.ndarray:
    """Correlated rows via a Gaussian copula with power-law marginals.

    correlations maps attribute pairs to latent correlation coefficients; the
    latent covariance is nudged to the nearest positive-definite matrix when
    the requested pair correlations conflict.
    """
    m = len(sizes)
    cov = np.eye(m)
    for (i1, i2), rho in (correlations or {}).items():
        cov[i1, i2] = cov[i2, i1] = rho
    eigvals, eigvecs = np.linalg.eigh(cov)
    cov = (eigvecs * np.maximum(eigvals, 1e-6)) @ eigvecs.T
    d = np.sqrt(np.diag(cov))
    cov = cov / np.outer(d, d)
    z = rng.multivariate_normal(np.zeros(m), cov, size=n, method="eigh")
    u = 0.5 * (1.0 + _erf(z / math.sqrt(2.0)))
    out = np.zeros((n, m), dtype=np.int64)
    for i, size in enumerate(sizes):
        p = 1.0 / np.arange(1, size + 1) ** skew
        p /= p.sum()
        cum = np.cumsum(p)
        cum[-1] = 1.0
        out[:, i] = np.searchsorted(cum, u[:, i], side="left")
    return out
