"""Inheritance index for ancestor windows on DAGs.

Ancestor windows nest along edges (a parent's window is contained in its
child's), so each vertex stores only a parent pointer plus the few window
members its richest parent does not already cover.  Evaluation folds one
value and a handful of deltas per vertex instead of the whole window.
"""

from __future__ import annotations

import time

import numpy as np

from .aggregates import PartialAggregate, ResultTable, accumulate, combine, finalize
from .dbindex import ValidationReport
from .errors import CycleError, IndexMismatchError, SpecError
from .graph import (
    ancestor_bitsets,
    bits_to_indices,
    reachable,
    topological_order,
)

NO_PARENT = -1


class InheritanceIndex:
    """Per-vertex (parent pointer, window delta, window cardinality)."""

    def __init__(self, vertex_count, graph_fingerprint):
        self.vertex_count = vertex_count
        self.graph_fingerprint = graph_fingerprint
        self.pids = [NO_PARENT] * vertex_count
        self.wds = [None] * vertex_count
        self.cards = [0] * vertex_count
        self.build_stats = {}

    def entry(self, v):
        """(pid, wd) for a vertex; pid is None for sources."""
        pid = self.pids[v]
        return (None if pid == NO_PARENT else pid, self.wds[v].tolist())

    def window_cardinality(self, v):
        return self.cards[v]

    def wd_entries(self):
        return sum(len(w) for w in self.wds)

    def stats(self):
        return {
            "vertex_count": self.vertex_count,
            "inheritance_edges": sum(1 for p in self.pids if p != NO_PARENT),
            "wd_entries": int(self.wd_entries()),
            "max_wd": int(max((len(w) for w in self.wds), default=0)),
        }


def _pick_parent(parents, cards):
    """In-neighbor with the largest window; ties go to the smallest ID."""
    best = parents[0]
    best_card = cards[best]
    for p in parents[1:]:
        c = cards[p]
        if c > best_card:  # strict: earlier (smaller) IDs win ties
            best = p
            best_card = c
    return best


def build(g, *, gauge=None):
    """One topological sweep; parent windows are released once all their
    children have consumed them, so only the frontier stays resident."""
    t0 = time.monotonic()
    order = topological_order(g)
    n = g.vertex_count
    idx = InheritanceIndex(n, g.fingerprint())
    remaining = [len(g.adj_out[v]) for v in range(n)]
    bits = {}
    empty_wd = np.empty(0, dtype=np.int32)
    cards = idx.cards
    for v in order:
        parents = g.adj_in[v]
        if not parents:
            w = 1 << v
            idx.pids[v] = NO_PARENT
            idx.wds[v] = empty_wd
        else:
            pid = _pick_parent(parents, cards)
            own = 1 << v
            rest = 0
            for p in parents:
                if p != pid:
                    rest |= bits[p]
            base = bits[pid]
            w = base | rest | own
            wd_bits = rest & ~(base | own)
            idx.pids[v] = pid
            idx.wds[v] = bits_to_indices(wd_bits, n).astype(np.int32)
        cards[v] = w.bit_count()
        bits[v] = w
        if gauge:
            gauge.acquire(cards[v], "frontier")
        for p in parents:
            remaining[p] -= 1
            if remaining[p] == 0:
                if gauge:
                    gauge.release(cards[p])
                del bits[p]
        if remaining[v] == 0:
            if gauge:
                gauge.release(cards[v])
            del bits[v]
    idx.build_stats = {"phases": {"total_s": time.monotonic() - t0}}
    return idx


def materialize_window(idx, v):
    """Reassemble the full ancestor window by walking the parent chain."""
    if not (0 <= v < idx.vertex_count):
        raise SpecError(f"vertex {v} out of range")
    members = []
    cur = v
    while cur != NO_PARENT:
        members.append(cur)
        members.extend(idx.wds[cur].tolist())
        cur = idx.pids[cur]
    return sorted(members)


def _window_bits(idx, x, memo):
    """Window bitset via the parent chain, memoized across calls."""
    chain = []
    cur = x
    base = 0
    while True:
        cached = memo.get(cur)
        if cached is not None:
            base = cached
            break
        chain.append(cur)
        pid = idx.pids[cur]
        if pid == NO_PARENT:
            break
        cur = pid
    for y in reversed(chain):
        b = base | (1 << y)
        for z in idx.wds[y].tolist():
            b |= 1 << z
        memo[y] = b
        base = b
    return memo[x]


def evaluate(idx, g, attrs, spec, *, counter=None):
    """Fold own value + inherited parent partial + window delta, per vertex."""
    if g.vertex_count != idx.vertex_count:
        raise IndexMismatchError("graph does not match index size")
    if g.fingerprint() != idx.graph_fingerprint:
        raise IndexMismatchError("index was built for a different graph")
    order = topological_order(g)
    fn = spec.function
    if fn == "count":
        vals = [1] * idx.vertex_count
    else:
        if attrs is None:
            raise SpecError(f"aggregate {fn!r} needs an attribute table")
        vals = attrs.column_list(spec.attribute)
    partials = [None] * idx.vertex_count
    accumulates = 0
    combines = 0
    pids = idx.pids
    wds = idx.wds
    for v in order:
        p = accumulate(PartialAggregate(fn), vals[v])
        accumulates += 1
        pid = pids[v]
        if pid != NO_PARENT:
            p = combine(p, partials[pid])
            combines += 1
        wd = wds[v]
        if len(wd):
            for x in wd.tolist():
                accumulate(p, vals[x])
            accumulates += len(wd)
        partials[v] = p
    if counter is not None:
        counter.accumulates += accumulates
        counter.combines += combines
    return ResultTable(g.labels, [finalize(partials[v]) for v in range(idx.vertex_count)])


def apply_edge_update(idx, g, u, v, op, *, counter=None):
    """Insert or delete edge (u, v) and repair exactly the affected entries.

    Affected vertices are v and its descendants; each is recomputed in
    topological order, and recomputation stops propagating along vertices
    whose windows did not actually change.  Afterwards every entry equals
    what a fresh build would produce.
    """
    if g.fingerprint() != idx.graph_fingerprint:
        raise IndexMismatchError("index was built for a different graph")
    if op not in ("insert", "delete"):
        raise SpecError(f"unknown update operation {op!r}")
    if op == "insert":
        if u == v:
            raise CycleError("self-loops are not allowed in a DAG")
        if reachable(g, v, u):
            raise CycleError(
                f"inserting ({g.labels[u]}, {g.labels[v]}) would create a cycle"
            )
        g2 = g.with_edge(u, v)
    else:
        g2 = g.without_edge(u, v)

    affected = {v}
    frontier = [v]
    while frontier:
        nxt = []
        for x in frontier:
            for w in g2.adj_out[x]:
                if w not in affected:
                    affected.add(w)
                    nxt.append(w)
        frontier = nxt

    memo_old = {}
    old_bits = {x: _window_bits(idx, x, memo_old) for x in affected}

    n = idx.vertex_count
    order = topological_order(g2)
    new_bits = {}
    changed = {}
    for x in order:
        if x not in affected:
            continue
        parents = g2.adj_in[x]
        if x != v and not any(changed.get(p, False) for p in parents):
            new_bits[x] = old_bits[x]
            changed[x] = False
            continue
        own = 1 << x
        if not parents:
            w = own
            idx.pids[x] = NO_PARENT
            idx.wds[x] = np.empty(0, dtype=np.int32)
        else:

            def card_of(p):
                return idx.cards[p] if p not in affected else new_bits[p].bit_count()

            best = parents[0]
            best_card = card_of(best)
            for p in parents[1:]:
                c = card_of(p)
                if c > best_card:
                    best = p
                    best_card = c
            base = new_bits[best] if best in affected else _window_bits(idx, best, memo_old)
            rest = 0
            for p in parents:
                if p != best:
                    rest |= new_bits[p] if p in affected else _window_bits(idx, p, memo_old)
            w = base | rest | own
            idx.pids[x] = best
            idx.wds[x] = bits_to_indices(rest & ~(base | own), n).astype(np.int32)
        idx.cards[x] = w.bit_count()
        new_bits[x] = w
        changed[x] = w != old_bits[x]
        if counter is not None:
            counter.accumulates += 1  # one entry recomputation
    idx.graph_fingerprint = g2.fingerprint()
    return g2, idx


def validate(idx, g):
    """Entry-by-entry comparison against a fresh closure of the graph."""
    report = ValidationReport(ok=True)

    def flag(msg):
        report.ok = False
        if len(report.violations) < 20:
            report.violations.append(msg)

    if g.fingerprint() != idx.graph_fingerprint:
        flag("graph fingerprint does not match index")
    if g.vertex_count != idx.vertex_count:
        flag("vertex count mismatch")
        return report
    order = topological_order(g)
    closures = ancestor_bitsets(g, order)
    cards = [closures[x].bit_count() for x in range(g.vertex_count)]
    for x in range(g.vertex_count):
        report.vertices_checked += 1
        pid = idx.pids[x]
        parents = g.adj_in[x]
        if pid == NO_PARENT:
            if parents:
                flag(f"vertex {x} has parents but no inherited window")
                continue
        else:
            if pid not in parents:
                flag(f"vertex {x} inherits from a non-parent")
                continue
            best = max(cards[p] for p in parents)
            if cards[pid] != best or any(
                p < pid and cards[p] == best for p in parents
            ):
                flag(f"vertex {x} does not inherit from the canonical parent")
        if idx.cards[x] != cards[x]:
            flag(f"vertex {x} has a stale window cardinality")
        expected = closures[x]
        got = 1 << x
        if pid != NO_PARENT:
            got |= closures[pid]
        for z in idx.wds[x].tolist():
            got |= 1 << z
        if got != expected:
            flag(f"vertex {x}: pid/wd entry does not reassemble its window")
        if pid != NO_PARENT and any(
            closures[pid] >> int(z) & 1 for z in idx.wds[x]
        ):
            flag(f"vertex {x}: window delta overlaps the inherited window")
    return report


def index_size_report(idx, g):
    """Size of the index relative to the graph it indexes."""
    from .io import edge_list_bytes
    from .serialize import encode_iindex

    index_bytes = len(encode_iindex(idx))
    graph_bytes = len(edge_list_bytes(g))
    stats = idx.stats()
    stats.update(
        {
            "avg_wd": stats["wd_entries"] / idx.vertex_count,
            "index_bytes": index_bytes,
            "graph_bytes": graph_bytes,
            "index_ratio": index_bytes / graph_bytes,
        }
    )
    return stats
