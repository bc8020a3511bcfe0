"""Window specifications and the non-indexed evaluator.

The non-indexed evaluator recomputes each vertex's window with a bounded
traversal and folds the aggregate on the fly.  It shares no work between
vertices, which makes it both the correctness oracle for the indices and
the benchmark baseline.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .aggregates import ResultTable
from .errors import SpecError
from .graph import IN, resolve_direction, topological_order

KHOP = "khop"
TOPOLOGICAL = "topological"


@dataclass(frozen=True)
class WindowSpec:
    """Which window to evaluate around each vertex."""

    kind: str
    k: int | None = None
    direction: str | None = None

    def __post_init__(self):
        if self.kind not in (KHOP, TOPOLOGICAL):
            raise SpecError(f"unknown window kind {self.kind!r}")
        if self.kind == KHOP:
            if self.k is None or self.k < 1:
                raise SpecError("k-hop windows need k >= 1")
        else:
            if self.k is not None:
                raise SpecError("topological windows take no hop count")
            if self.direction is not None:
                raise SpecError("topological windows take no direction")

    def validate_for(self, g):
        """Check compatibility with a graph; returns the resolved direction."""
        if self.kind == TOPOLOGICAL:
            if not g.directed:
                raise SpecError("topological windows require a directed acyclic graph")
            return None
        return resolve_direction(g, self.direction)

    def window_of(self, g, v):
        from .graph import khop_window, topological_window

        if self.kind == KHOP:
            return khop_window(g, v, self.k, self.direction)
        return topological_window(g, v)

    def describe(self):
        if self.kind == KHOP:
            return f"{self.k}-hop" + (f" ({self.direction})" if self.direction else "")
        return "topological"


def _fold_values(function, buf):
    if function == "sum":
        return sum(buf)
    if function == "count":
        return len(buf)
    if function == "avg":
        return sum(buf) / len(buf)
    if function == "min":
        return min(buf)
    return max(buf)


def _values_for(g, attrs, spec):
    if spec.function == "count":
        return [1] * g.vertex_count
    if attrs is None:
        raise SpecError(f"aggregate {spec.function!r} needs an attribute table")
    return attrs.column_list(spec.attribute)


def _khop_values_range(g, adj, k, vals, lo, hi, fold_all, counter):
    """Per-vertex bounded BFS over [lo, hi), folding window values inline."""
    n = g.vertex_count
    stamp = [0] * n
    token = 0
    out = []
    accumulated = 0
    for v in range(lo, hi):
        token += 1
        stamp[v] = token
        buf = [vals[v]]
        frontier = [v]
        for _ in range(k):
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if stamp[w] != token:
                        stamp[w] = token
                        nxt.append(w)
                        buf.append(vals[w])
            if not nxt:
                break
            frontier = nxt
        accumulated += len(buf)
        out.append(fold_all(buf))
    if counter is not None:
        counter.accumulates += accumulated
    return out


def _topo_values_range(g, vals, lo, hi, fold_all, counter):
    """Per-vertex reverse reachability over [lo, hi), folding inline."""
    n = g.vertex_count
    adj_in = g.adj_in
    stamp = [0] * n
    token = 0
    out = []
    accumulated = 0
    for v in range(lo, hi):
        token += 1
        stamp[v] = token
        buf = [vals[v]]
        frontier = [v]
        while frontier:
            nxt = []
            for u in frontier:
                for p in adj_in[u]:
                    if stamp[p] != token:
                        stamp[p] = token
                        nxt.append(p)
                        buf.append(vals[p])
            frontier = nxt
        accumulated += len(buf)
        out.append(fold_all(buf))
    if counter is not None:
        counter.accumulates += accumulated
    return out


def _evaluate_ranges(g, attrs, window, specs, counter, threads):
    window.validate_for(g)
    if window.kind == TOPOLOGICAL:
        topological_order(g)  # validates acyclicity once for the whole run
    value_lists = [_values_for(g, attrs, spec) for spec in specs]
    folds = [spec.function for spec in specs]

    if len(specs) == 1:
        vals = value_lists[0]
        fn = folds[0]

        def fold_all(buf, _fn=fn):
            return _fold_values(_fn, buf)

    else:
        # shared traversal: buf carries vertex IDs, each spec folds its column
        vals = list(range(g.vertex_count))

        def fold_all(buf):
            return tuple(
                _fold_values(fn, [col[x] for x in buf])
                for fn, col in zip(folds, value_lists)
            )

    n = g.vertex_count
    if len(specs) != 1:
        counter = None  # shared-traversal op counts would be ambiguous
    if window.kind == KHOP:
        direction = resolve_direction(g, window.direction)
        adj = g.adj_in if direction == IN else g.adj_out

        def run(lo, hi, c):
            return _khop_values_range(g, adj, window.k, vals, lo, hi, fold_all, c)

    else:

        def run(lo, hi, c):
            return _topo_values_range(g, vals, lo, hi, fold_all, c)

    if threads <= 1 or n < 2 * threads:
        results = run(0, n, counter)
    else:
        bounds = [round(i * n / threads) for i in range(threads + 1)]
        from .aggregates import OpCounter

        parts = [OpCounter() for _ in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run, bounds[i], bounds[i + 1], parts[i])
                for i in range(threads)
            ]
            chunks = [f.result() for f in futures]
        results = [x for chunk in chunks for x in chunk]
        if counter is not None:
            for p in parts:
                counter.add(p)

    if len(specs) == 1:
        per_spec = [results]
    else:
        per_spec = [[row[i] for row in results] for i in range(len(specs))]

    return [ResultTable(g.labels, per_spec[i]) for i in range(len(specs))]


def evaluate_nonindexed(g, attrs, window, spec, *, counter=None, threads=1):
    """Evaluate one aggregate over every vertex's window without any index."""
    return _evaluate_ranges(g, attrs, window, [spec], counter, threads)[0]


def evaluate_nonindexed_multi(g, attrs, window, specs, *, counter=None, threads=1):
    """Evaluate several aggregates over a single shared traversal per vertex.

    Used where the same windows feed many functions (tests, benchmarks);
    per-aggregate operation counts are not tracked on this path.
    """
    if not specs:
        raise SpecError("need at least one aggregate")
    return _evaluate_ranges(g, attrs, window, specs, counter, threads)
