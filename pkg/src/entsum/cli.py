"""Command-line surface: build, query, eval, serve, and fixture generation.

Failures exit with a per-module code (see errors.py); set ENTSUM_LOG to
control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EngineError, EvalError, StatisticsError
from .evaluation import SampleBaseline, build_workload, run_comparison, synthetic_rows
from .polynomial import build_compressed, size_report
from .query import Summary, answer, load_summary, parse_query, save_summary
from .schema import ingest, load_schema
from .solver import SolverConfig, solve
from .stats import build_statistic_set, score_pairs, select_pairs
from .service import ServiceConfig, serve

logger = logging.getLogger("entsum")


def cmd_build(args) -> int:
    schema = load_schema(args.schema)
    data = ingest(schema, args.input)
    pairs = []
    if args.pairs > 0:
        exclude = {schema.attr_index(name) for name in args.exclude or []}
        scores = [
            s for s in score_pairs(data)
            if not (set(s.pair) & exclude)
        ]
        if not scores:
            raise StatisticsError("no attribute pairs left after exclusions")
        pairs = select_pairs(scores, args.pairs, args.strategy)
    sset = build_statistic_set(data, pairs=pairs, b_s=args.buckets,
                               heuristic=args.heuristic)
    poly = build_compressed(sset)
    report = size_report(poly)
    config = SolverConfig(threshold=args.threshold,
                          max_iterations=args.max_iters,
                          init_value=args.init)
    state = solve(poly, sset, config)
    meta = {
        "heuristic": args.heuristic if pairs else None,
        "strategy": args.strategy if pairs else None,
        "b_a": len(pairs),
        "b_s": args.buckets if pairs else 0,
        "pairs": [[schema.attributes[i].name for i in p] for p in pairs],
        "exclude": list(args.exclude or []),
        "max_residual": state.max_residual,
        "sweeps": state.sweeps,
        "converged": state.converged,
        "source": str(args.input),
    }
    summary = Summary.from_solution(poly, state, meta=meta)
    save_summary(summary, args.out)
    if args.trace_json:
        Path(args.trace_json).write_text(
            json.dumps(state.trace, indent=2), encoding="utf-8")
    print(f"rows ingested: {data.row_count} (nulls dropped: {data.dropped_nulls})")
    print(f"statistics: {sset.k} ({sset.one_d_count} 1D, {len(sset.two_d)} 2D; "
          f"pairs: {meta['pairs']})")
    print(f"polynomial: terms={report['term_count']} slots={report['slot_count']} "
          f"factors={report['factor_count']} b_a={report['b_a']} r={report['r']}")
    print(f"solver: sweeps={state.sweeps} max_residual={state.max_residual:.3e} "
          f"converged={state.converged}")
    if state.unreachable:
        print(f"warning: {len(state.unreachable)} statistics unreachable "
              f"(pinned at current values)")
    print(f"summary written to {args.out}")
    return 0


def cmd_query(args) -> int:
    summary = load_summary(args.summary)
    plan = parse_query(args.sql, summary.schema)
    out = answer(summary, plan)
    if args.json:
        print(json.dumps({
            "groups": [
                {"values": list(r.values), "raw": r.raw, "rounded": r.rounded}
                for r in out.rows
            ],
            "wall_ms": out.wall_ms,
        }))
        return 0
    group_attrs = [summary.schema.attributes[i].name for i in plan.group_by]
    header = group_attrs + ["raw", "rounded"]
    widths = [max(len(h), 12) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in out.rows:
        cells = list(r.values) + [f"{r.raw:.4f}", str(r.rounded)]
        print("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    print(f"({len(out.rows)} group(s) in {out.wall_ms:.2f} ms)")
    return 0


def _parse_baseline(spec: str, data, seed: int) -> tuple[str, SampleBaseline]:
    parts = spec.split(":")
    if parts[0] == "uniform" and len(parts) == 2:
        rate = float(parts[1])
        return f"uniform:{parts[1]}", SampleBaseline.uniform(data, rate, seed=seed)
    if parts[0] == "stratified" and len(parts) == 3:
        names = parts[1].split(",")
        if len(names) != 2:
            raise EvalError(f"stratified baseline needs two attributes: {spec!r}")
        pair = tuple(data.schema.attr_index(n) for n in names)
        rate = float(parts[2])
        return (f"stratified:{parts[1]}:{parts[2]}",
                SampleBaseline.stratified(data, pair, rate, seed=seed))
    raise EvalError(f"cannot parse baseline spec {spec!r}")


def _parse_workload(spec: str) -> dict[str, int]:
    out = {}
    for part in spec.split(","):
        key, _, value = part.partition("=")
        if key not in ("heavy", "light", "null") or not value.isdigit():
            raise EvalError(f"cannot parse workload spec {spec!r}")
        out[key] = int(value)
    for key in ("heavy", "light", "null"):
        out.setdefault(key, 0)
    return out


def cmd_eval(args) -> int:
    schema = load_schema(args.schema)
    data = ingest(schema, args.data)
    summaries = {}
    for spec in args.summary or []:
        name, _, path = spec.rpartition("=")
        if not name:
            name, path = Path(path).stem, path
        summaries[name] = load_summary(path)
    baselines = {}
    for spec in args.baseline or []:
        name, baseline = _parse_baseline(spec, data, args.seed)
        baselines[name] = baseline
    if not summaries and not baselines:
        raise EvalError("nothing to evaluate: pass --summary and/or --baseline")
    counts = _parse_workload(args.workload)
    attrs = [schema.attr_index(n) for n in args.attrs.split(",")]
    workload = build_workload(
        data, attrs, counts["heavy"], counts["light"], counts["null"])
    report = run_comparison(data, summaries, baselines, workload)
    report.to_json(args.out)
    if args.csv:
        report.to_csv(args.csv)
    name_w = max((len(n) for n in report.methods), default=10)
    print(f"{'method'.ljust(name_w)}  heavy_err  light_err  f_measure  mean_ms")
    for name, m in report.methods.items():
        print(f"{name.ljust(name_w)}  "
              f"{m.get('heavy_mean_error', float('nan')):9.4f}  "
              f"{m.get('light_mean_error', float('nan')):9.4f}  "
              f"{m['f_measure']:9.4f}  {m['mean_wall_ms']:7.2f}")
    print(f"report written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    config = ServiceConfig(
        port=args.port,
        summary_paths=list(args.summary),
        max_concurrent=args.max_concurrent,
        request_timeout_ms=args.timeout_ms,
        ui_dir=args.ui_dir,
    )
    print(f"serving {len(config.summary_paths)} summaries on "
          f"http://127.0.0.1:{config.port}")
    serve(config)
    return 0


def cmd_fixture(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    correlations = {}
    for spec in args.corr or []:
        names, _, rho = spec.rpartition(":")
        a, b = names.split(",")
        correlations[(int(a), int(b))] = float(rho)
    rows = synthetic_rows(rng, sizes, args.rows, correlations, skew=args.skew)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    names = [chr(ord("A") + i) for i in range(len(sizes))]
    schema_doc = {"attributes": [
        {"name": n, "kind": "numeric", "lo": 0, "hi": s, "buckets": s}
        for n, s in zip(names, sizes)
    ]}
    (outdir / "schema.json").write_text(json.dumps(schema_doc, indent=2))
    with open(outdir / "data.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    print(f"wrote {args.rows} rows over {sizes} to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entsum",
        description="Maximum-entropy data summaries for approximate counting",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="ingest a CSV and fit a summary")
    b.add_argument("--input", required=True, help="CSV file with header")
    b.add_argument("--schema", required=True, help="schema JSON document")
    b.add_argument("--out", required=True, help="output summary path")
    b.add_argument("--pairs", type=int, default=0,
                   help="number of 2D attribute pairs (0 = 1D only)")
    b.add_argument("--buckets", type=int, default=0,
                   help="2D statistics per pair")
    b.add_argument("--heuristic", default="composite",
                   choices=["large", "zero", "composite"])
    b.add_argument("--strategy", default="cover",
                   choices=["correlation", "cover"])
    b.add_argument("--exclude", action="append",
                   help="attribute to keep out of 2D pairs (repeatable)")
    b.add_argument("--threshold", type=float, default=1e-6)
    b.add_argument("--max-iters", type=int, default=30)
    b.add_argument("--init", type=float, default=1.0)
    b.add_argument("--trace-json", help="write per-sweep solver trace JSON here")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="answer one SQL counting query")
    q.add_argument("--summary", required=True)
    q.add_argument("--sql", required=True)
    q.add_argument("--json", action="store_true", help="machine-readable output")
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("eval", help="compare summaries against sampling")
    e.add_argument("--data", required=True)
    e.add_argument("--schema", required=True)
    e.add_argument("--summary", action="append",
                   help="name=path of a summary to evaluate (repeatable)")
    e.add_argument("--baseline", action="append",
                   help="uniform:RATE or stratified:A,B:RATE (repeatable)")
    e.add_argument("--workload", default="heavy=100,light=100,null=200")
    e.add_argument("--attrs", required=True,
                   help="comma-separated workload attributes")
    e.add_argument("--out", required=True, help="JSON report path")
    e.add_argument("--csv", help="also write a CSV table here")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("serve", help="run the HTTP query service")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--summary", action="append", required=True,
                   help="summary file to preload (repeatable)")
    s.add_argument("--max-concurrent", type=int, default=8)
    s.add_argument("--timeout-ms", type=int, default=30_000)
    s.add_argument("--ui-dir", help="serve this directory as the web console")
    s.set_defaults(func=cmd_serve)

    f = sub.add_parser("fixture")  # deliberately undocumented test-data helper
    f.add_argument("--out", required=True)
    f.add_argument("--rows", type=int, default=1000)
    f.add_argument("--sizes", default="30,30")
    f.add_argument("--corr", action="append",
                   help="latent correlation as I,J:RHO (attribute indices)")
    f.add_argument("--skew", type=float, default=1.0)
    f.add_argument("--seed", type=int, default=7)
    f.set_defaults(func=cmd_fixture)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ENTSUM_LOG", "INFO").upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
