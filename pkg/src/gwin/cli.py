"""Command line front end: ingest, build, query, bench, diag, update.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Reports go to stdout as JSON (bench can emit CSV); result tables are CSV or
JSON per --format.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from . import dbindex, iindex
from .aggregates import AggregateSpec, OpCounter, result_mismatches
from .bench import format_report, run_bench, sweep, sweep_to_csv
from .errors import GwinError, SpecError
from .graph import AttributeTable
from .io import emit_edge_list, load_attribute_table, load_edge_list
from .query import KHOP, TOPOLOGICAL, WindowSpec, evaluate_nonindexed
from .serialize import load_index, save_index

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _comma_list(text, cast):
    return [cast(tok) for tok in text.split(",") if tok]


def _add_graph_args(p, *, attrs=True):
    p.add_argument("--graph", required=True, help="edge list file")
    p.add_argument("--directed", action="store_true",
                   help="treat edges as directed (u -> v)")
    if attrs:
        p.add_argument("--attrs", help="vertex attribute CSV")


def _add_window_args(p):
    p.add_argument("--window", choices=(KHOP, TOPOLOGICAL), required=True)
    p.add_argument("--k", type=int, help="hop count (khop windows only)")
    p.add_argument("--direction", choices=("out", "in"),
                   help="traversal direction on directed graphs (khop only)")


def _add_threads_arg(p):
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: all cores; 1 = reproducible timing)")


def _threads(args):
    if args.threads is None:
        return os.cpu_count() or 1
    if args.threads < 1:
        raise SpecError("--threads must be at least 1")
    return args.threads


def _window_from_args(parser, args):
    if args.window == KHOP:
        if args.k is None:
            parser.error("--k is required with --window khop")
        if args.k < 1:
            parser.error("--k must be at least 1")
        return WindowSpec(KHOP, k=args.k, direction=args.direction)
    if args.k is not None or args.direction is not None:
        parser.error("--k and --direction apply only to --window khop")
    return WindowSpec(TOPOLOGICAL)


def _aggregate_from_args(parser, text):
    fn, _, attr = text.partition(":")
    try:
        return AggregateSpec(fn, attr or None)
    except SpecError as e:
        parser.error(str(e))


def _load_graph(args):
    return load_edge_list(args.graph, directed=args.directed)


def _load_attrs(args, g):
    if getattr(args, "attrs", None):
        return load_attribute_table(args.attrs, g)
    return None


def _print_report(report):
    print(json.dumps(report, indent=2, sort_keys=True))


# -- subcommands -------------------------------------------------------------


def cmd_ingest(parser, args):
    g = _load_graph(args)
    attrs = _load_attrs(args, g)
    report = {
        "vertices": g.vertex_count,
        "edges": g.edge_count,
        "directed": g.directed,
        **g.degree_stats(),
    }
    if g.ingest_stats is not None:
        report.update(dataclasses.asdict(g.ingest_stats))
    if attrs is not None:
        report["attributes"] = attrs.names
    if args.out:
        with open(args.out, "w") as f:
            emit_edge_list(g, f)
        report["canonical_out"] = args.out
    _print_report(report)
    return EXIT_OK


def cmd_build(parser, args):
    window_kind = args.window
    if args.strategy == "iindex" and window_kind != TOPOLOGICAL:
        parser.error("--strategy iindex requires --window topological")
    if args.strategy == "emc":
        if window_kind != KHOP:
            parser.error("--strategy emc requires --window khop")
        if args.k is None or args.k < 2:
            parser.error("--strategy emc requires --k of at least 2")
        if not (1 <= args.k_cluster < args.k):
            parser.error("--k-cluster must satisfy 1 <= k_cluster < k")
    window = _window_from_args(parser, args)
    g = _load_graph(args)
    threads = _threads(args)

    t0 = time.perf_counter()
    if args.strategy == "iindex":
        index = iindex.build(g)
    else:
        index = dbindex.build(
            g,
            window,
            args.strategy,
            m=args.m,
            seed=args.seed,
            k_cluster=args.k_cluster,
            max_cluster=args.max_cluster,
            threads=threads,
        )
        if args.reorganize_threshold is not None:
            index.update_log.threshold = args.reorganize_threshold
    build_s = time.perf_counter() - t0
    index_bytes = save_index(index, args.out)

    from .io import edge_list_bytes

    graph_bytes = len(edge_list_bytes(g))
    report = {
        "strategy": args.strategy,
        "window": window.describe(),
        "vertices": g.vertex_count,
        "edges": g.edge_count,
        "build_s": build_s,
        "phases": index.build_stats.get("phases", {}),
        "index_bytes": index_bytes,
        "graph_bytes": graph_bytes,
        "index_ratio": index_bytes / graph_bytes,
        "out": args.out,
    }
    report.update(index.stats())
    if isinstance(index, dbindex.DenseBlockIndex):
        report["memory"] = index.build_stats.get("memory", {})
    _print_report(report)
    return EXIT_OK


def cmd_query(parser, args):
    g = _load_graph(args)
    attrs = _load_attrs(args, g)
    spec = _aggregate_from_args(parser, args.agg)
    index = load_index(args.index)
    if isinstance(index, dbindex.DenseBlockIndex):
        window = index.window
    else:
        window = WindowSpec(TOPOLOGICAL)

    counter = OpCounter()
    t0 = time.perf_counter()
    if args.oracle:
        if g.fingerprint() != index.graph_fingerprint:
            raise GwinError("index was built for a different graph")
        table = evaluate_nonindexed(
            g, attrs, window, spec, counter=counter, threads=_threads(args)
        )
    elif isinstance(index, dbindex.DenseBlockIndex):
        table = dbindex.evaluate_on(index, g, attrs, spec, counter=counter)
    else:
        table = iindex.evaluate(index, g, attrs, spec, counter=counter)
    eval_s = time.perf_counter() - t0

    code = EXIT_OK
    if args.verify:
        oracle = evaluate_nonindexed(g, attrs, window, spec, threads=_threads(args))
        bad, max_rel = result_mismatches(table, oracle)
        print(f"verify: {bad} mismatches", file=sys.stderr)
        if bad:
            print(f"verify: max relative error {max_rel:.3g}", file=sys.stderr)
            code = EXIT_VERIFY

    sink = open(args.out, "w") if args.out else sys.stdout
    try:
        if args.format == "json":
            table.to_json(sink)
        else:
            table.to_csv(sink)
    finally:
        if args.out:
            sink.close()
    if args.stats:
        print(
            f"eval_s={eval_s:.6f} accumulates={counter.accumulates} "
            f"combines={counter.combines}",
            file=sys.stderr,
        )
    return code


def cmd_bench(parser, args):
    threads = _threads(args)
    spec = _aggregate_from_args(parser, args.agg)
    strategies = _comma_list(args.strategies, str)
    if args.graph:
        # single-cell comparison on a user-supplied graph
        g = _load_graph(args)
        attrs = _load_attrs(args, g)
        if attrs is None and spec.attribute is not None:
            attrs = AttributeTable.random_ints(
                g.vertex_count, name=spec.attribute, seed=args.seed
            )
        window_kind = args.window or KHOP
        if window_kind == KHOP:
            if not args.k_list or len(args.k_list) != 1:
                parser.error("single-graph bench takes exactly one --k")
            window = WindowSpec(KHOP, k=args.k_list[0], direction=args.direction)
        else:
            if args.k_list or args.direction:
                parser.error("--k and --direction apply only to --window khop")
            window = WindowSpec(TOPOLOGICAL)
        report = run_bench(
            g,
            attrs,
            window,
            spec,
            evaluators=tuple(strategies),
            reps=args.reps,
            seed=args.seed,
            m=args.m,
            k_cluster=args.k_cluster,
            threads=threads,
            verify=args.verify,
        )
        if args.format == "json":
            _print_report(report)
        else:
            print(format_report(report))
        return EXIT_OK

    if not args.n or not args.d:
        parser.error("either --graph or both --n and --d are required")
    window_kind = args.window or KHOP
    k_list = args.k_list if args.k_list else ([1] if window_kind == KHOP else [0])
    rows = sweep(
        n_list=args.n,
        d_list=args.d,
        k_list=k_list,
        window_kind=window_kind,
        strategies=strategies,
        spec=spec,
        seed=args.seed,
        reps=args.reps,
        m=args.m,
        k_cluster=args.k_cluster,
        threads=threads,
        baseline=not args.no_baseline,
        verify=args.verify,
    )
    if args.format == "json":
        _print_report({"rows": rows})
    else:
        sys.stdout.write(sweep_to_csv(rows))
    return EXIT_OK


def cmd_diag(parser, args):
    if not (args.jaccard or args.validate or args.size):
        parser.error("nothing to do: pass --jaccard, --validate, and/or --size")
    report = {}
    code = EXIT_OK
    g = None
    if args.graph:
        g = _load_graph(args)
    index = load_index(args.index) if args.index else None

    if args.jaccard:
        if g is None:
            parser.error("--jaccard requires --graph")
        report["jaccard"] = dbindex.jaccard_profile(
            g,
            k_max=args.kmax,
            pairs=args.pairs,
            seed=args.seed,
            direction=args.direction,
        )
    if args.validate:
        if index is None or g is None:
            parser.error("--validate requires --index and --graph")
        report_obj = (
            dbindex.validate(index, g)
            if isinstance(index, dbindex.DenseBlockIndex)
            else iindex.validate(index, g)
        )
        report["validate"] = dataclasses.asdict(report_obj)
        if not report_obj.ok:
            code = EXIT_VERIFY
    if args.size:
        if index is None:
            parser.error("--size requires --index")
        if isinstance(index, dbindex.DenseBlockIndex):
            from .serialize import encode_dbindex

            size = index.stats()
            size["index_bytes"] = len(encode_dbindex(index))
            if g is not None:
                from .io import edge_list_bytes

                size["graph_bytes"] = len(edge_list_bytes(g))
                size["index_ratio"] = size["index_bytes"] / size["graph_bytes"]
            report["size"] = size
        else:
            if g is None:
                parser.error("--size on an iindex requires --graph")
            report["size"] = iindex.index_size_report(index, g)
    _print_report(report)
    return code


def _parse_update_line(g, line_no, line):
    tokens = line.split()
    if len(tokens) != 3 or tokens[0] not in ("+", "-"):
        raise GwinError(f"line {line_no}: expected '+ u v' or '- u v', got {line!r}")
    try:
        u = g.to_id(tokens[1])
        v = g.to_id(tokens[2])
    except GwinError as e:
        raise GwinError(f"line {line_no}: {e}") from None
    return tokens[0], u, v


def cmd_update(parser, args):
    g = _load_graph(args)
    index = load_index(args.index)
    is_db = isinstance(index, dbindex.DenseBlockIndex)
    if args.reorganize_threshold is not None:
        if not is_db:
            parser.error("--reorganize-threshold applies to dbindex files only")
        index.update_log.threshold = args.reorganize_threshold
    threads = _threads(args)

    if args.ops == "-":
        lines = sys.stdin.read().splitlines()
    else:
        with open(args.ops) as f:
            lines = f.read().splitlines()

    per_update = []
    reorganizes = 0
    inserts = deletes = 0
    total_mismatches = 0 if args.verify_each else None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        op, u, v = _parse_update_line(g, line_no, line)
        t0 = time.perf_counter()
        reorganized = False
        try:
            if is_db:
                if op == "+":
                    g, index = dbindex.apply_edge_insertion(index, g, u, v)
                    log = index.update_log
                    if log.threshold is not None and log.updates >= log.threshold:
                        index = dbindex.reorganize(index, g, threads=threads)
                        reorganized = True
                else:
                    g = g.without_edge(u, v)
                    index = dbindex.reorganize(index, g, threads=threads)
                    reorganized = True
            else:
                g, index = iindex.apply_edge_update(
                    index, g, u, v, "insert" if op == "+" else "delete"
                )
        except GwinError as e:
            raise GwinError(f"line {line_no}: {e}") from None
        seconds = time.perf_counter() - t0
        inserts += op == "+"
        deletes += op == "-"
        reorganizes += reorganized
        entry = {
            "line": line_no,
            "op": op,
            "u": g.labels[u],
            "v": g.labels[v],
            "seconds": seconds,
            "reorganized": reorganized,
        }
        if args.verify_each:
            report_obj = (
                dbindex.validate(index, g) if is_db else iindex.validate(index, g)
            )
            bad = len(report_obj.violations)
            if not report_obj.ok and not bad:
                bad = 1
            entry["mismatches"] = bad
            total_mismatches += bad
        per_update.append(entry)

    out_path = args.out or args.index
    save_index(index, out_path)
    if args.save_graph:
        with open(args.save_graph, "w") as f:
            emit_edge_list(g, f)
    report = {
        "applied": inserts + deletes,
        "inserts": inserts,
        "deletes": deletes,
        "reorganizes": reorganizes,
        "updates_logged": index.update_log.updates if is_db else None,
        "index_out": out_path,
        "graph_out": args.save_graph,
        "per_update": per_update,
    }
    if args.verify_each:
        report["mismatches"] = total_mismatches
        print(f"verify: {total_mismatches} mismatches", file=sys.stderr)
    _print_report(report)
    return EXIT_VERIFY if total_mismatches else EXIT_OK


# -- parser wiring -----------------------------------------------------------


def _build_parser():
    parser = _Parser(prog="gwin", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="parse and summarize a graph file")
    _add_graph_args(p)
    p.add_argument("--out", help="write the canonical edge list here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="build and persist an index")
    _add_graph_args(p, attrs=False)
    _add_window_args(p)
    p.add_argument("--strategy", choices=("mc", "emc", "iindex"), required=True)
    p.add_argument("--m", type=int, default=4, help="signature length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-cluster", type=int, default=1, dest="k_cluster",
                   help="signature hop count for emc")
    p.add_argument("--max-cluster", type=int, default=4096, dest="max_cluster")
    p.add_argument("--reorganize-threshold", type=int, default=None,
                   dest="reorganize_threshold")
    _add_threads_arg(p)
    p.add_argument("--out", required=True, help="index file to write")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="evaluate an aggregate over an index")
    _add_graph_args(p)
    p.add_argument("--index", required=True, help="index file")
    p.add_argument("--agg", required=True, help="aggregate, e.g. sum:weight or count")
    p.add_argument("--oracle", action="store_true",
                   help="evaluate non-indexed instead of using the index")
    p.add_argument("--verify", action="store_true",
                   help="also evaluate non-indexed and compare")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="result file (default stdout)")
    p.add_argument("--stats", action="store_true",
                   help="print timing and operation counts to stderr")
    _add_threads_arg(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="time evaluators on one graph or a sweep")
    p.add_argument("--graph", help="edge list file (single-cell mode)")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--attrs", help="vertex attribute CSV")
    p.add_argument("--n", type=lambda s: _comma_list(s, int),
                   help="sweep: vertex counts, comma separated")
    p.add_argument("--d", type=lambda s: _comma_list(s, float),
                   help="sweep: average degrees, comma separated")
    p.add_argument("--k", dest="k_list", type=lambda s: _comma_list(s, int),
                   help="hop counts, comma separated")
    p.add_argument("--window", choices=(KHOP, TOPOLOGICAL), default=None)
    p.add_argument("--direction", choices=("out", "in"))
    p.add_argument("--agg", default="sum:value")
    p.add_argument("--strategies", default="nonindexed,mc",
                   help="comma separated: nonindexed,mc,emc,iindex")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--k-cluster", type=int, default=1, dest="k_cluster")
    p.add_argument("--no-baseline", action="store_true", dest="no_baseline",
                   help="sweep: skip the non-indexed baseline column")
    p.add_argument("--verify", action="store_true",
                   help="check every result against the non-indexed oracle")
    p.add_argument("--format", choices=("csv", "json", "table"), default=None)
    _add_threads_arg(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("diag", help="index validation and window diagnostics")
    p.add_argument("--graph", help="edge list file")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--index", help="index file")
    p.add_argument("--validate", action="store_true",
                   help="check index invariants against the graph")
    p.add_argument("--size", action="store_true", help="index size report")
    p.add_argument("--jaccard", action="store_true",
                   help="window-similarity profile of adjacent vertices")
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction", choices=("out", "in"))
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("update", help="apply an edge update stream to an index")
    _add_graph_args(p, attrs=False)
    p.add_argument("--index", required=True, help="index file")
    p.add_argument("--ops", required=True,
                   help="update stream file of '+ u v' / '- u v' lines, or - for stdin")
    p.add_argument("--verify-each", action="store_true", dest="verify_each",
                   help="validate the index against the graph after every update")
    p.add_argument("--reorganize-threshold", type=int, default=None,
                   dest="reorganize_threshold")
    p.add_argument("--out", help="updated index file (default: overwrite --index)")
    p.add_argument("--save-graph", dest="save_graph",
                   help="write the updated edge list here")
    _add_threads_arg(p)
    p.set_defaults(func=cmd_update)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.format is None:
        args.format = "table" if args.graph else "csv"
    try:
        return args.func(parser, args)
    except GwinError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
