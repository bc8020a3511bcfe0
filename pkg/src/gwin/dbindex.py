"""Dense-block index: factor shared window contents into reusable blocks.

Vertices whose windows hash alike are clustered by MinHash signatures; each
cluster's window contents are partitioned into equivalence classes keyed by
the exact set of windows covering them.  Classes shared by several windows
become blocks whose partial aggregate is computed once and combined into
every window that contains them.  Coverage (every window is the disjoint
union of its linked blocks) holds regardless of clustering quality, so the
clustering signature length only affects sharing, never correctness.
"""

from __future__ import annotations

import hashlib
import random
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aggregates import PartialAggregate, ResultTable, accumulate, combine, finalize
from .errors import CycleError, EdgeUpdateError, IndexMismatchError, SpecError
from .graph import (
    IN,
    OUT,
    ancestor_bitsets,
    ancestor_set,
    bits_to_indices,
    khop_window,
    khop_windows_csr,
    reachable,
    resolve_direction,
    topological_order,
)
from .query import KHOP, TOPOLOGICAL

_MASK64 = (1 << 64) - 1
_SIG_BATCH = 4096

MC = "mc"
EMC = "emc"


# -- hashing -------------------------------------------------------------


def _mix64(x, seed):
    """64-bit multiply-xor-shift mixer (scalar, matches the numpy variant)."""
    z = (x + seed + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix64_np(arr, seed):
    z = arr + np.uint64((seed + 0x9E3779B97F4A7C15) & _MASK64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_seeds(seed, m):
    """Derive m independent per-hash seeds from one master seed."""
    if m < 1:
        raise SpecError("need at least one signature hash")
    if seed < 0:
        raise SpecError("seed must be non-negative")
    return [_mix64(i + 1, seed) for i in range(m)]


def minhash_signature(members, seeds):
    """MinHash signature of a vertex set: per-seed minimum of mixed IDs."""
    arr = np.asarray(list(members) if not isinstance(members, np.ndarray) else members)
    if arr.size == 0:
        raise SpecError("cannot sign an empty set")
    u = arr.astype(np.uint64)
    return tuple(int(_mix64_np(u, s).min()) for s in seeds)


def _signatures_from_csr(mat, seeds):
    """One signature per CSR row; every row must be non-empty."""
    indptr = mat.indptr
    counts = np.diff(indptr)
    if counts.size and counts.min() == 0:
        raise SpecError("window batch contains an empty window")
    idx = mat.indices.astype(np.uint64)
    starts = indptr[:-1]
    sig = np.empty((mat.shape[0], len(seeds)), dtype=np.uint64)
    for j, s in enumerate(seeds):
        sig[:, j] = np.minimum.reduceat(_mix64_np(idx, s), starts)
    return sig


# -- instrumentation -----------------------------------------------------


class WindowGauge:
    """Tracks logically-live materialized window entries during a build.

    ``peak`` is the high-water mark of simultaneously held entries.
    ``max_frontier_unit`` is the largest single signature-phase acquisition
    (one batch of windows hashed and dropped); ``max_cluster_unit`` is the
    largest single cluster materialization.  A build that never retains all
    windows satisfies ``peak <= max_cluster_unit + max_frontier_unit`` for
    full-window (mc) builds, which is what the memory contract asserts.
    """

    def __init__(self):
        self.current = 0
        self.peak = 0
        self.max_cluster_unit = 0
        self.max_frontier_unit = 0
        self._lock = threading.Lock()

    def acquire(self, n, pool):
        with self._lock:
            self.current += n
            if self.current > self.peak:
                self.peak = self.current
            if pool == "cluster":
                if n > self.max_cluster_unit:
                    self.max_cluster_unit = n
            elif n > self.max_frontier_unit:
                self.max_frontier_unit = n

    def release(self, n):
        with self._lock:
            self.current -= n

    def snapshot(self):
        return {
            "peak_entries": self.peak,
            "max_cluster_unit": self.max_cluster_unit,
            "max_frontier_unit": self.max_frontier_unit,
        }


class _PhaseClock:
    """Accumulates wall time per build phase."""

    def __init__(self):
        self.seconds = {"traversal_s": 0.0, "hash_s": 0.0, "identify_s": 0.0}
        self._lock = threading.Lock()

    def add(self, phase, dt):
        with self._lock:
            self.seconds[phase] += dt


class _Timed:
    def __init__(self, clock, phase):
        self.clock = clock
        self.phase = phase

    def __enter__(self):
        self.t0 = time.monotonic()

    def __exit__(self, *exc):
        self.clock.add(self.phase, time.monotonic() - self.t0)


# -- index structure -----------------------------------------------------


@dataclass(frozen=True)
class BuildParams:
    """Construction parameters; ``k_cluster`` is 0 for full-window signatures."""

    strategy: str
    m: int = 4
    seed: int = 0
    k_cluster: int = 0
    max_cluster: int = 4096
    max_rounds: int = 8


@dataclass
class UpdateLog:
    """Incremental updates applied since the last (re)build."""

    updates: int = 0
    threshold: int | None = None


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)
    vertices_checked: int = 0
    blocks_checked: int = 0


class DenseBlockIndex:
    """Blocks plus per-vertex links; independent of attributes and aggregates."""

    def __init__(self, window, params, vertex_count, graph_fingerprint):
        self.window = window
        self.params = params
        self.vertex_count = vertex_count
        self.graph_fingerprint = graph_fingerprint
        self.blocks = []
        self.links = [[] for _ in range(vertex_count)]
        self.update_log = UpdateLog()
        self.build_stats = {}
        self._digests = {}
        self._flat = None
        self._seeds = hash_seeds(params.seed, params.m)

    # blocks are interned by member-set digest so identical sets share an ID
    def _intern_block(self, members):
        arr = np.asarray(members, dtype=np.int32)
        key = hashlib.blake2b(arr.tobytes(), digest_size=16).digest()
        bid = self._digests.get(key)
        if bid is None:
            bid = len(self.blocks)
            self.blocks.append(arr)
            self._digests[key] = bid
        return bid

    def _commit(self, emissions):
        links = self.links
        for members, owners in emissions:
            bid = self._intern_block(members)
            for o in owners:
                links[o].append(bid)
        self._flat = None

    def rebuild_digests(self):
        self._digests = {
            hashlib.blake2b(b.tobytes(), digest_size=16).digest(): i
            for i, b in enumerate(self.blocks)
        }

    @property
    def block_count(self):
        return len(self.blocks)

    @property
    def link_count(self):
        return sum(len(l) for l in self.links)

    @property
    def total_work(self):
        """Query-cost proxy: total block members plus total links."""
        return sum(len(b) for b in self.blocks) + self.link_count

    def flat_arrays(self):
        """Concatenated block/link arrays for vectorized evaluation (cached)."""
        if self._flat is None:
            nblocks = len(self.blocks)
            mem_off = np.zeros(nblocks + 1, dtype=np.int64)
            for i, b in enumerate(self.blocks):
                mem_off[i + 1] = mem_off[i] + len(b)
            mem_flat = (
                np.concatenate(self.blocks)
                if nblocks
                else np.empty(0, dtype=np.int32)
            )
            link_off = np.zeros(self.vertex_count + 1, dtype=np.int64)
            for v, l in enumerate(self.links):
                link_off[v + 1] = link_off[v] + len(l)
            link_flat = np.empty(link_off[-1], dtype=np.int64)
            pos = 0
            for l in self.links:
                link_flat[pos : pos + len(l)] = l
                pos += len(l)
            self._flat = (mem_flat, mem_off, link_flat, link_off)
        return self._flat

    def stats(self):
        return {
            "vertex_count": self.vertex_count,
            "blocks": self.block_count,
            "links": self.link_count,
            "block_entries": int(sum(len(b) for b in self.blocks)),
            "total_work": int(self.total_work),
            "updates_since_build": self.update_log.updates,
        }


# -- dense-block identification -------------------------------------------


def _emit_single_owner(owner, window, out):
    # force a copy so emitted blocks never alias a batch traversal buffer
    out.append((np.array(window, dtype=np.int32), [owner]))


def _identify_core(params, seeds, owners, windows, depth, out, gauge):
    """Partition the union of the owners' windows by covering-owner set.

    Classes covered by >= 2 owners with >= 2 members are dense: they are
    emitted as shared blocks and removed.  If any were found the residual
    windows are re-clustered (up to ``max_rounds`` refinement rounds),
    otherwise every class is emitted as-is.
    """
    if len(owners) == 1:
        o = owners[0]
        _emit_single_owner(o, windows[o], out)
        if gauge:
            gauge.release(len(windows[o]))
        return

    cover = {}
    for o in owners:
        for node in windows[o].tolist():
            entry = cover.get(node)
            if entry is None:
                cover[node] = [o]
            else:
                entry.append(o)
    classes = {}
    for node in sorted(cover):
        key = tuple(cover[node])
        entry = classes.get(key)
        if entry is None:
            classes[key] = [node]
        else:
            entry.append(node)

    dense = {
        key: nodes
        for key, nodes in classes.items()
        if len(nodes) >= 2 and len(key) >= 2
    }
    if not dense:
        for key, nodes in classes.items():
            out.append((np.asarray(nodes, dtype=np.int32), list(key)))
        if gauge:
            gauge.release(sum(len(windows[o]) for o in owners))
        return

    for key, nodes in dense.items():
        out.append((np.asarray(nodes, dtype=np.int32), list(key)))

    residual_lists = {o: [] for o in owners}
    for key, nodes in classes.items():
        if key in dense:
            continue
        for o in key:
            residual_lists[o].extend(nodes)

    stop = depth + 1 > params.max_rounds
    residuals = {}
    rest_owners = []
    for o in owners:
        nodes = residual_lists[o]
        if nodes and not stop:
            arr = np.asarray(sorted(nodes), dtype=np.int32)
            residuals[o] = arr
            rest_owners.append(o)
            if gauge:
                gauge.acquire(len(arr), "cluster")
        if gauge:
            gauge.release(len(windows[o]))
        windows[o] = None  # parent window is dead from here on

    if stop:
        # refinement budget exhausted: emit the remaining classes as-is
        for key, nodes in classes.items():
            if key not in dense:
                out.append((np.asarray(nodes, dtype=np.int32), list(key)))
        return
    if rest_owners:
        _refine_core(params, seeds, rest_owners, residuals, depth + 1, out, gauge)


def _refine_core(params, seeds, owners, windows, depth, out, gauge):
    """Re-signature residual windows and recurse per new cluster."""
    groups = {}
    for o in owners:
        sig = minhash_signature(windows[o], seeds)
        entry = groups.get(sig)
        if entry is None:
            groups[sig] = [o]
        else:
            entry.append(o)
    for group in groups.values():
        _identify_core(
            params, seeds, group, {o: windows[o] for o in group}, depth, out, gauge
        )


def identify_dense_blocks(index, owners, windows, depth=0, *, gauge=None):
    """Run dense-block identification for one cluster directly into an index.

    ``windows`` maps each owner to its sorted member array; the dict is
    consumed.  Returns the (mutated) index.
    """
    out = []
    _identify_core(index.params, index._seeds, list(owners), windows, depth, out, gauge)
    index._commit(out)
    return index


def refine_cluster(index, owners, windows, depth, *, gauge=None):
    """Re-cluster residual windows and continue identification into an index."""
    out = []
    _refine_core(index.params, index._seeds, list(owners), windows, depth, out, gauge)
    index._commit(out)
    return index


# -- construction ----------------------------------------------------------


def _signature_clusters_khop(g, k_sig, direction, seeds, gauge, clock):
    clusters = {}
    n = g.vertex_count
    for lo in range(0, n, _SIG_BATCH):
        hi = min(lo + _SIG_BATCH, n)
        with _Timed(clock, "traversal_s"):
            rows = khop_windows_csr(g, np.arange(lo, hi), k_sig, direction)
        if gauge:
            gauge.acquire(rows.nnz, "frontier")
        with _Timed(clock, "hash_s"):
            sigs = _signatures_from_csr(rows, seeds)
        for i in range(hi - lo):
            key = tuple(int(x) for x in sigs[i])
            entry = clusters.get(key)
            if entry is None:
                clusters[key] = [lo + i]
            else:
                entry.append(lo + i)
        if gauge:
            gauge.release(rows.nnz)
    return clusters


def _signature_clusters_topo(g, seeds, gauge, clock):
    """Signatures over ancestor windows via one topological sweep.

    Windows live only while some child still needs them (reference counts),
    so the frontier, not the whole closure, is resident.
    """
    order = topological_order(g)
    remaining = [len(g.adj_out[v]) for v in range(g.vertex_count)]
    bits = {}
    cards = {}
    clusters = {}
    for v in order:
        with _Timed(clock, "traversal_s"):
            w = 1 << v
            for p in g.adj_in[v]:
                w |= bits[p]
            card = w.bit_count()
        bits[v] = w
        cards[v] = card
        if gauge:
            gauge.acquire(card, "frontier")
        with _Timed(clock, "hash_s"):
            idx = bits_to_indices(w, g.vertex_count)
            sig = minhash_signature(idx, seeds)
        entry = clusters.get(sig)
        if entry is None:
            clusters[sig] = [v]
        else:
            entry.append(v)
        for p in g.adj_in[v]:
            remaining[p] -= 1
            if remaining[p] == 0:
                if gauge:
                    gauge.release(cards[p])
                del bits[p], cards[p]
        if remaining[v] == 0:
            if gauge:
                gauge.release(cards[v])
            del bits[v], cards[v]
    # owners ascending per cluster, clusters ordered by smallest owner
    items = sorted((sorted(owners) for owners in clusters.values()), key=lambda o: o[0])
    return {i: owners for i, owners in enumerate(items)}


def _materialize_khop(g, owners, k, direction, gauge, clock):
    with _Timed(clock, "traversal_s"):
        rows = khop_windows_csr(g, np.asarray(owners, dtype=np.int64), k, direction)
    if gauge:
        gauge.acquire(rows.nnz, "cluster")
    indptr = rows.indptr
    idx = rows.indices
    return {o: idx[indptr[i] : indptr[i + 1]] for i, o in enumerate(owners)}


def _materialize_topo(g, owners, gauge, clock):
    windows = {}
    total = 0
    with _Timed(clock, "traversal_s"):
        for o in owners:
            arr = np.asarray(sorted(ancestor_set(g, o)), dtype=np.int32)
            windows[o] = arr
            total += len(arr)
    if gauge:
        gauge.acquire(total, "cluster")
    return windows


def _build(g, window, params, *, threads=1, gauge=None):
    direction = window.validate_for(g)
    if window.kind == TOPOLOGICAL and params.strategy == EMC:
        raise SpecError("estimated clustering applies only to k-hop windows")
    t_start = time.monotonic()
    clock = _PhaseClock()
    own_gauge = gauge if gauge is not None else WindowGauge()
    seeds = hash_seeds(params.seed, params.m)

    if window.kind == KHOP:
        k_sig = params.k_cluster if params.strategy == EMC else window.k
        clusters = _signature_clusters_khop(g, k_sig, direction, seeds, own_gauge, clock)
    else:
        clusters = _signature_clusters_topo(g, seeds, own_gauge, clock)

    index = DenseBlockIndex(window, params, g.vertex_count, g.fingerprint())

    # split oversized clusters, then fold runs of singletons into shared
    # batch traversals so the common no-sharing case stays vectorized
    units = []
    single_run = []
    for owners in clusters.values():
        chunks = [
            owners[i : i + params.max_cluster]
            for i in range(0, len(owners), params.max_cluster)
        ]
        for chunk in chunks:
            if len(chunk) == 1:
                single_run.append(chunk[0])
                if len(single_run) >= _SIG_BATCH:
                    units.append(("singles", single_run))
                    single_run = []
            else:
                units.append(("cluster", chunk))
    if single_run:
        units.append(("singles", single_run))

    def run_unit(unit):
        kind, owners = unit
        out = []
        if window.kind == KHOP:
            windows = _materialize_khop(g, owners, window.k, direction, own_gauge, clock)
        else:
            windows = _materialize_topo(g, owners, own_gauge, clock)
        with _Timed(clock, "identify_s"):
            if kind == "singles":
                released = 0
                for o in owners:
                    _emit_single_owner(o, windows[o], out)
                    released += len(windows[o])
                own_gauge.release(released)
            else:
                _identify_core(params, seeds, owners, windows, 0, out, own_gauge)
        return out

    if threads > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_unit, u) for u in units]
            for f in futures:
                index._commit(f.result())
    else:
        for u in units:
            index._commit(run_unit(u))

    empty = [v for v in range(g.vertex_count) if not index.links[v]]
    if empty:
        raise IndexMismatchError(f"build left {len(empty)} vertices uncovered")

    phases = dict(clock.seconds)
    phases["total_s"] = time.monotonic() - t_start
    index.build_stats = {
        "phases": phases,
        "clusters": len(clusters),
        "memory": own_gauge.snapshot(),
    }
    return index


def build_mc(
    g,
    window,
    *,
    m=4,
    seed=0,
    max_cluster=4096,
    max_rounds=8,
    threads=1,
    gauge=None,
):
    """Build with signatures over the full windows being indexed."""
    params = BuildParams(MC, m=m, seed=seed, k_cluster=0,
                         max_cluster=max_cluster, max_rounds=max_rounds)
    return _build(g, window, params, threads=threads, gauge=gauge)


def build_emc(
    g,
    window,
    *,
    k_cluster=1,
    m=4,
    seed=0,
    max_cluster=4096,
    max_rounds=8,
    threads=1,
    gauge=None,
):
    """Build with signatures over cheaper low-hop windows.

    Full k-hop windows are traversed only once, inside per-cluster
    identification; only the clustering quality differs from ``build_mc``.
    """
    if window.kind != KHOP:
        raise SpecError("estimated clustering applies only to k-hop windows")
    if window.k < 2:
        raise SpecError("estimated clustering needs k >= 2")
    if not (1 <= k_cluster < window.k):
        raise SpecError("k_cluster must satisfy 1 <= k_cluster < k")
    params = BuildParams(EMC, m=m, seed=seed, k_cluster=k_cluster,
                         max_cluster=max_cluster, max_rounds=max_rounds)
    return _build(g, window, params, threads=threads, gauge=gauge)


def build(g, window, strategy, **kwargs):
    if strategy == MC:
        kwargs.pop("k_cluster", None)
        return build_mc(g, window, **kwargs)
    if strategy == EMC:
        return build_emc(g, window, **kwargs)
    raise SpecError(f"unknown build strategy {strategy!r}")


# -- evaluation -------------------------------------------------------------


def _int_bounds_ok(values, vertex_count):
    if values.size == 0:
        return True
    hi = int(np.abs(values).max())
    return hi <= (1 << 52) // max(vertex_count, 1)


def evaluate(index, attrs, spec, *, counter=None, labels=None):
    """One partial per block, then a combine pass over each vertex's links.

    The same index answers every aggregate function and attribute; nothing
    here depends on how the blocks were clustered.  ``labels`` rebinds the
    owning graph's labels; positional labels are used when omitted.
    """
    n = index.vertex_count
    if labels is None:
        labels = [str(i) for i in range(n)]
    mem_flat, mem_off, link_flat, link_off = index.flat_arrays()
    if link_off[-1] < n or np.any(np.diff(link_off) == 0):
        raise IndexMismatchError("index leaves some vertex uncovered")

    fn = spec.function
    if fn == "count":
        values = None
    else:
        if attrs is None:
            raise SpecError(f"aggregate {fn!r} needs an attribute table")
        values = attrs.column(spec.attribute)
        if len(values) != n:
            raise IndexMismatchError("attribute table does not match index size")

    if counter is not None:
        counter.accumulates += int(mem_off[-1])
        counter.combines += int(link_off[-1]) - n

    use_python = (
        values is not None
        and np.issubdtype(values.dtype, np.integer)
        and not _int_bounds_ok(values, n)
    )
    if use_python:
        return _evaluate_python(index, values.tolist(), fn, labels)

    starts = mem_off[:-1]
    sizes = np.diff(mem_off)
    lstarts = link_off[:-1]
    if fn == "count":
        per_vertex = np.add.reduceat(sizes[link_flat], lstarts)
        out = per_vertex.tolist()
    elif fn in ("sum", "avg"):
        gathered = values[mem_flat]
        block_tot = (
            np.add.reduceat(gathered, starts)
            if len(gathered)
            else np.zeros(0, dtype=values.dtype)
        )
        tot = np.add.reduceat(block_tot[link_flat], lstarts)
        if fn == "sum":
            out = tot.tolist()
        else:
            cnt = np.add.reduceat(sizes[link_flat], lstarts)
            out = (tot / cnt).tolist()
    else:
        op = np.minimum if fn == "min" else np.maximum
        gathered = values[mem_flat]
        block_ext = op.reduceat(gathered, starts)
        out = op.reduceat(block_ext[link_flat], lstarts).tolist()
    return ResultTable(labels, out)


def evaluate_on(index, g, attrs, spec, *, counter=None):
    """Evaluate against the graph the index was built for (label-aware)."""
    if g.vertex_count != index.vertex_count:
        raise IndexMismatchError("graph does not match index size")
    if g.fingerprint() != index.graph_fingerprint:
        raise IndexMismatchError("index was built for a different graph")
    return evaluate(index, attrs, spec, counter=counter, labels=g.labels)


def _evaluate_python(index, values, fn, labels):
    """Exact fallback for integer columns too wide for int64 vector math."""
    partials = []
    for b in index.blocks:
        p = PartialAggregate(fn)
        for v in b.tolist():
            accumulate(p, values[v])
        partials.append(p)
    out = []
    for v in range(index.vertex_count):
        ids = index.links[v]
        p = partials[ids[0]]
        for bid in ids[1:]:
            p = combine(p, partials[bid])
        out.append(finalize(p))
    return ResultTable(labels, out)


# -- validation --------------------------------------------------------------


def validate(index, g):
    """Check coverage, per-vertex disjointness, and global block dedup."""
    report = ValidationReport(ok=True)
    v_report = report.violations

    def flag(msg):
        report.ok = False
        if len(v_report) < 20:
            v_report.append(msg)

    if g.fingerprint() != index.graph_fingerprint:
        flag("graph fingerprint does not match index")
    if g.vertex_count != index.vertex_count:
        flag("vertex count mismatch")
        return report

    n = g.vertex_count
    seen = {}
    for i, b in enumerate(index.blocks):
        report.blocks_checked += 1
        if len(b) == 0:
            flag(f"block {i} is empty")
            continue
        if len(b) > 1 and np.any(b[1:] <= b[:-1]):
            flag(f"block {i} members are not strictly increasing")
        if int(b[0]) < 0 or int(b[-1]) >= n:
            flag(f"block {i} has out-of-range members")
        key = b.tobytes()
        if key in seen:
            flag(f"blocks {seen[key]} and {i} have identical member sets")
        else:
            seen[key] = i

    window = index.window
    direction = window.validate_for(g)
    if window.kind == TOPOLOGICAL:
        closures = ancestor_bitsets(g)

    for lo in range(0, n, _SIG_BATCH):
        hi = min(lo + _SIG_BATCH, n)
        if window.kind == KHOP:
            rows = khop_windows_csr(g, np.arange(lo, hi), window.k, direction)
            indptr, idx = rows.indptr, rows.indices
        for v in range(lo, hi):
            report.vertices_checked += 1
            ids = index.links[v]
            if not ids:
                flag(f"vertex {v} has no linked blocks")
                continue
            if len(set(ids)) != len(ids):
                flag(f"vertex {v} links the same block twice")
            if window.kind == KHOP:
                expected = idx[indptr[v - lo] : indptr[v - lo + 1]]
            else:
                expected = bits_to_indices(closures[v], n)
            parts = [index.blocks[b] for b in ids]
            got = np.sort(np.concatenate(parts))
            if len(got) != len(expected):
                flag(
                    f"vertex {v}: linked blocks cover {len(got)} entries, "
                    f"window has {len(expected)} (overlap or gap)"
                )
            elif not np.array_equal(got, np.asarray(expected, dtype=got.dtype)):
                flag(f"vertex {v}: linked blocks do not equal its window")
    return report


# -- incremental maintenance --------------------------------------------------


def _window_sorted(g, window, v, direction):
    if window.kind == KHOP:
        return khop_window(g, v, window.k, window.direction)
    return sorted(ancestor_set(g, v))


def apply_edge_insertion(index, g, u, v, *, gauge=None):
    """Insert edge (u, v): index only windows that grew, merge, dedup.

    Returns (updated graph, updated index).  Results afterwards are
    identical to a full rebuild; the block layout may differ.
    """
    if g.fingerprint() != index.graph_fingerprint:
        raise IndexMismatchError("index was built for a different graph")
    window = index.window
    direction = window.validate_for(g)

    if window.kind == TOPOLOGICAL:
        if u == v or reachable(g, v, u):
            raise CycleError("insertion would create a cycle")
    g2 = g.with_edge(u, v)

    if window.kind == KHOP:
        walk = window.k - 1
        if direction == "undirected":
            cand = set(khop_window(g2, u, walk)) | set(khop_window(g2, v, walk))
        elif direction == OUT:
            cand = set(khop_window(g2, u, walk, IN))
        else:
            cand = set(khop_window(g2, v, walk, OUT))
    else:
        cand = {v} | set(descendant_list(g2, v))

    deltas = {}
    for x in sorted(cand):
        before = _window_sorted(g, window, x, direction)
        after = _window_sorted(g2, window, x, direction)
        grown = sorted(set(after) - set(before))
        if grown:
            deltas[x] = np.asarray(grown, dtype=np.int32)

    if deltas:
        owners = sorted(deltas)
        if gauge:
            gauge.acquire(sum(len(deltas[o]) for o in owners), "cluster")
        groups = {}
        for o in owners:
            sig = minhash_signature(deltas[o], index._seeds)
            groups.setdefault(sig, []).append(o)
        for group in groups.values():
            identify_dense_blocks(
                index, group, {o: deltas[o] for o in group}, 0, gauge=gauge
            )
    index.update_log.updates += 1
    index.graph_fingerprint = g2.fingerprint()
    index._flat = None
    return g2, index


def descendant_list(g, v):
    """Forward-reachability of v (v excluded), in discovery order."""
    visited = {v}
    frontier = [v]
    out = []
    while frontier:
        nxt = []
        for x in frontier:
            for w in g.adj_out[x]:
                if w not in visited:
                    visited.add(w)
                    nxt.append(w)
                    out.append(w)
        frontier = nxt
    return out


def reorganize(index, g, *, threads=1, gauge=None):
    """Full rebuild of the same window spec and parameters against ``g``.

    ``g`` may legitimately differ from the graph the index was built on:
    deletions have no incremental path and land here.  Resets the update log.
    """
    params = index.params
    fresh = _build(g, index.window, params, threads=threads, gauge=gauge)
    fresh.update_log.threshold = index.update_log.threshold
    return fresh


# -- diagnostics ---------------------------------------------------------------


def jaccard_profile(g, *, k_max, pairs=1000, seed=0, direction=None):
    """Window similarity of adjacent vertex pairs for k = 1..k_max.

    Samples edges, computes the Jaccard similarity of the endpoints'
    k-hop windows per k, and reports mean and median per k.
    """
    if k_max < 1:
        raise SpecError("k_max must be at least 1")
    direction = resolve_direction(g, direction)
    edges = g.canonical_edges()
    if not edges:
        raise SpecError("graph has no edges to sample")
    rng = random.Random(seed)
    sample = edges if len(edges) <= pairs else rng.sample(edges, pairs)
    adj = g.adj_in if direction == IN else g.adj_out

    def prefixes(v):
        seen = {v}
        frontier = [v]
        out = []
        for _ in range(k_max):
            nxt = []
            for x in frontier:
                for w in adj[x]:
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
            out.append(set(seen))
        return out

    per_k = [[] for _ in range(k_max)]
    for u, v in sample:
        pu = prefixes(u)
        pv = prefixes(v)
        for i in range(k_max):
            inter = len(pu[i] & pv[i])
            union = len(pu[i]) + len(pv[i]) - inter
            per_k[i].append(inter / union)
    return [
        {
            "k": i + 1,
            "pairs": len(per_k[i]),
            "mean_jaccard": statistics.fmean(per_k[i]),
            "median_jaccard": statistics.median(per_k[i]),
        }
        for i in range(k_max)
    ]
