"""Benchmark drivers: one-query comparisons and synthetic parameter sweeps.

Each evaluator builds whatever it needs once, then the evaluation is timed
over several repetitions; the median is reported together with operation
counts from one instrumented run.  Optionally every result table is checked
against the non-indexed evaluation so a speedup can never hide a wrong
answer.
"""

from __future__ import annotations

import csv
import io
import statistics
import time

from . import dbindex, iindex
from .aggregates import OpCounter, result_mismatches
from .errors import SpecError
from .graph import AttributeTable, generate_random_dag, generate_random_graph
from .query import KHOP, TOPOLOGICAL, WindowSpec, evaluate_nonindexed

EVALUATORS = ("nonindexed", "mc", "emc", "iindex")


def measure(fn, *, reps=5):
    """Run fn reps times; returns (last result, median seconds, all runs)."""
    if reps < 1:
        raise SpecError("reps must be at least 1")
    times = []
    result = None
    for _ in range(reps):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return result, statistics.median(times), times


def _aggregate_name(spec):
    if spec.attribute is None:
        return spec.function
    return f"{spec.function}({spec.attribute})"


def run_bench(
    g,
    attrs,
    window,
    spec,
    *,
    evaluators=("nonindexed", "mc"),
    reps=5,
    seed=0,
    m=4,
    k_cluster=1,
    max_cluster=4096,
    threads=1,
    verify=False,
):
    """Time every requested evaluator on one (window, aggregate) query."""
    for name in evaluators:
        if name not in EVALUATORS:
            raise SpecError(f"unknown evaluator {name!r}")
        if name == "iindex" and window.kind != TOPOLOGICAL:
            raise SpecError("iindex evaluates topological windows only")
    window.validate_for(g)

    oracle = None
    if verify or "nonindexed" in evaluators:
        oracle = evaluate_nonindexed(g, attrs, window, spec, threads=threads)

    rows = []
    baseline_s = None
    for name in evaluators:
        build_s = 0.0
        index_stats = None
        counter = OpCounter()
        if name == "nonindexed":
            run = lambda c=None: evaluate_nonindexed(
                g, attrs, window, spec, counter=c, threads=threads
            )
        elif name in ("mc", "emc"):
            t0 = time.perf_counter()
            if name == "mc":
                index = dbindex.build_mc(
                    g, window, m=m, seed=seed, max_cluster=max_cluster, threads=threads
                )
            else:
                index = dbindex.build_emc(
                    g,
                    window,
                    m=m,
                    seed=seed,
                    k_cluster=k_cluster,
                    max_cluster=max_cluster,
                    threads=threads,
                )
            build_s = time.perf_counter() - t0
            index_stats = index.stats()
            run = lambda c=None, ix=index: dbindex.evaluate_on(
                ix, g, attrs, spec, counter=c
            )
        else:
            t0 = time.perf_counter()
            idx = iindex.build(g)
            build_s = time.perf_counter() - t0
            index_stats = idx.stats()
            run = lambda c=None, ix=idx: iindex.evaluate(ix, g, attrs, spec, counter=c)

        # first rep carries the op counter; the rest are timing-only
        t0 = time.perf_counter()
        table = run(counter)
        runs = [time.perf_counter() - t0]
        if reps > 1:
            _, _, more = measure(run, reps=reps - 1)
            runs.extend(more)
        median_s = statistics.median(runs)

        mismatches = None
        if verify and oracle is not None:
            bad, _ = result_mismatches(table, oracle)
            mismatches = bad
        if name == "nonindexed":
            baseline_s = median_s
        rows.append(
            {
                "evaluator": name,
                "build_s": build_s,
                "eval_s": median_s,
                "eval_s_runs": runs,
                "accumulates": counter.accumulates,
                "combines": counter.combines,
                "ops_total": counter.total,
                "mismatches": mismatches,
                "index": index_stats,
            }
        )
    for row in rows:
        row["speedup"] = (
            baseline_s / row["eval_s"] if baseline_s and row["eval_s"] > 0 else None
        )
    return {
        "graph": {
            "vertices": g.vertex_count,
            "edges": g.edge_count,
            "directed": g.directed,
        },
        "window": window.describe(),
        "aggregate": _aggregate_name(spec),
        "reps": reps,
        "threads": threads,
        "rows": rows,
    }


_SWEEP_COLUMNS = (
    "n",
    "d",
    "k",
    "window",
    "strategy",
    "build_s",
    "traversal_s",
    "hash_s",
    "identify_s",
    "index_bytes",
    "index_ratio",
    "blocks",
    "links",
    "total_work",
    "eval_s",
    "baseline_s",
    "speedup",
    "accumulates",
    "combines",
    "mismatches",
)


def _time_eval(run, reps):
    """(table, median seconds, op counter); the first rep is instrumented."""
    counter = OpCounter()
    t0 = time.perf_counter()
    table = run(counter)
    runs = [time.perf_counter() - t0]
    if reps > 1:
        _, _, more = measure(run, reps=reps - 1)
        runs.extend(more)
    return table, statistics.median(runs), counter


def sweep(
    *,
    n_list,
    d_list,
    k_list,
    window_kind=KHOP,
    strategies=("mc",),
    spec,
    seed=0,
    reps=5,
    m=4,
    k_cluster=1,
    max_cluster=4096,
    threads=1,
    baseline=True,
    verify=False,
):
    """Build+query timing matrix over synthetic graphs.

    One generated graph per (n, d) cell, shared across all k values and
    strategies so the columns are comparable.
    """
    from .io import edge_list_bytes
    from .serialize import encode_dbindex, encode_iindex

    for s in strategies:
        if s not in EVALUATORS:
            raise SpecError(f"unknown strategy {s!r}")
        if s == "iindex" and window_kind != TOPOLOGICAL:
            raise SpecError("iindex sweeps require topological windows")
        if s == "emc" and window_kind != KHOP:
            raise SpecError("emc applies only to k-hop windows")

    rows = []
    cell = 0
    for n in n_list:
        for d in d_list:
            gseed = seed + 1000 * cell
            cell += 1
            if window_kind == TOPOLOGICAL:
                g = generate_random_dag(n, d, seed=gseed)
            else:
                g = generate_random_graph(n, d, seed=gseed)
            attrs = None
            if spec.attribute is not None:
                attrs = AttributeTable.random_ints(
                    n, name=spec.attribute, seed=gseed + 1
                )
            graph_bytes = len(edge_list_bytes(g))
            for k in k_list:
                if window_kind == KHOP:
                    window = WindowSpec(KHOP, k=k)
                else:
                    window = WindowSpec(TOPOLOGICAL)
                oracle = None
                baseline_s = None
                base_counter = None
                if baseline:
                    run = lambda c=None: evaluate_nonindexed(
                        g, attrs, window, spec, counter=c, threads=threads
                    )
                    oracle, baseline_s, base_counter = _time_eval(run, reps)
                elif verify:
                    oracle = evaluate_nonindexed(g, attrs, window, spec, threads=threads)
                for strategy in strategies:
                    if strategy == "emc" and k < 2:
                        continue  # no estimated variant below 2 hops
                    row = {c: None for c in _SWEEP_COLUMNS}
                    row.update(
                        n=n,
                        d=d,
                        k=k if window_kind == KHOP else None,
                        window=window.describe(),
                        strategy=strategy,
                        baseline_s=baseline_s,
                    )
                    if strategy == "nonindexed":
                        if base_counter is not None:
                            table, eval_s, counter = oracle, baseline_s, base_counter
                        else:
                            run = lambda c=None: evaluate_nonindexed(
                                g, attrs, window, spec, counter=c, threads=threads
                            )
                            table, eval_s, counter = _time_eval(run, reps)
                        row.update(build_s=0.0)
                    elif strategy == "iindex":
                        t0 = time.perf_counter()
                        index = iindex.build(g)
                        row.update(build_s=time.perf_counter() - t0)
                        data = encode_iindex(index)
                        row.update(
                            index_bytes=len(data),
                            index_ratio=len(data) / graph_bytes,
                        )
                        run = lambda c=None, ix=index: iindex.evaluate(
                            ix, g, attrs, spec, counter=c
                        )
                        table, eval_s, counter = _time_eval(run, reps)
                    else:
                        t0 = time.perf_counter()
                        index = dbindex.build(
                            g,
                            window,
                            strategy,
                            m=m,
                            seed=seed,
                            k_cluster=k_cluster,
                            max_cluster=max_cluster,
                            threads=threads,
                        )
                        row.update(build_s=time.perf_counter() - t0)
                        phases = index.build_stats.get("phases", {})
                        data = encode_dbindex(index)
                        row.update(
                            traversal_s=phases.get("traversal_s"),
                            hash_s=phases.get("hash_s"),
                            identify_s=phases.get("identify_s"),
                            index_bytes=len(data),
                            index_ratio=len(data) / graph_bytes,
                            blocks=index.block_count,
                            links=index.link_count,
                            total_work=index.total_work,
                        )
                        run = lambda c=None, ix=index: dbindex.evaluate_on(
                            ix, g, attrs, spec, counter=c
                        )
                        table, eval_s, counter = _time_eval(run, reps)
                    row.update(
                        eval_s=eval_s,
                        accumulates=counter.accumulates,
                        combines=counter.combines,
                    )
                    if baseline_s is not None and eval_s > 0:
                        row["speedup"] = baseline_s / eval_s
                    if verify and oracle is not None:
                        bad, _ = result_mismatches(table, oracle)
                        row["mismatches"] = bad
                    rows.append(row)
    return rows


def sweep_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SWEEP_COLUMNS)
    for row in rows:
        out = []
        for col in _SWEEP_COLUMNS:
            value = row.get(col)
            if value is None:
                out.append("")
            elif isinstance(value, float):
                out.append(f"{value:.6f}")
            else:
                out.append(value)
        writer.writerow(out)
    return buf.getvalue()


def _fmt(value, spec_=".4f"):
    if value is None:
        return "-"
    if isinstance(value, float):
        return format(value, spec_)
    return str(value)


def format_report(report):
    """Fixed-width text table for terminals."""
    lines = [
        "graph: {vertices} vertices, {edges} edges, {kind}".format(
            vertices=report["graph"]["vertices"],
            edges=report["graph"]["edges"],
            kind="directed" if report["graph"]["directed"] else "undirected",
        ),
        "window: {window}   aggregate: {aggregate}   reps: {reps}".format(**report),
    ]
    header = (
        "evaluator",
        "build_s",
        "eval_s",
        "speedup",
        "accumulates",
        "combines",
        "mismatches",
    )
    body = []
    for row in report["rows"]:
        speed = row["speedup"]
        body.append(
            (
                row["evaluator"],
                _fmt(row["build_s"]),
                _fmt(row["eval_s"]),
                "-" if speed is None else f"{speed:.2f}x",
                str(row["accumulates"]),
                str(row["combines"]),
                _fmt(row["mismatches"], "d"),
            )
        )
    widths = [
        max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)))
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(header))))
    return "\n".join(lines)
