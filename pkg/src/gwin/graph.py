"""Attributed graphs, bounded traversals, and synthetic generators.

Vertices are dense integer IDs ``0..n-1``.  Original input labels are kept
on the graph for I/O; every algorithm works on the dense IDs.  Graphs are
immutable: edge updates return a new :class:`Graph` that shares unchanged
adjacency rows with the old one.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from bisect import insort
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import CycleError, EdgeUpdateError, GraphFormatError, SpecError

# Traversal directions for directed graphs.  Undirected graphs always use
# their symmetric adjacency and reject an explicit "out"/"in".
OUT = "out"
IN = "in"

_FINGERPRINT_TAG = b"gwin-graph-v1"


@dataclass
class IngestStats:
    """Counts reported by the edge-list loader."""

    edges_kept: int = 0
    duplicate_edges_dropped: int = 0
    self_loops_dropped: int = 0


class Graph:
    """A simple directed or undirected graph over dense vertex IDs.

    ``adj_out[v]`` is the sorted list of out-neighbors (or all neighbors for
    undirected graphs); ``adj_in`` mirrors it for incoming edges and aliases
    ``adj_out`` when the graph is undirected.
    """

    __slots__ = (
        "vertex_count",
        "directed",
        "adj_out",
        "adj_in",
        "labels",
        "_label_to_id",
        "_csr_cache",
        "_fingerprint",
        "ingest_stats",
    )

    def __init__(self, vertex_count, directed, adj_out, adj_in=None, labels=None):
        if vertex_count <= 0:
            raise GraphFormatError("graph must have at least one vertex")
        self.vertex_count = vertex_count
        self.directed = directed
        self.adj_out = adj_out
        self.adj_in = adj_in if directed else adj_out
        if directed and adj_in is None:
            raise ValueError("directed graphs need an incoming adjacency")
        self.labels = labels if labels is not None else [str(i) for i in range(vertex_count)]
        if len(self.labels) != vertex_count:
            raise GraphFormatError("label table length does not match vertex count")
        self._label_to_id = None
        self._csr_cache = {}
        self._fingerprint = None
        self.ingest_stats = None

    # -- construction -------------------------------------------------

    @classmethod
    def from_edges(cls, vertex_count, edges, directed=False, labels=None):
        """Build a graph from an iterable of (u, v) dense-ID pairs.

        Duplicate edges collapse silently; self-loops are rejected.
        """
        adj_out = [[] for _ in range(vertex_count)]
        adj_in = [[] for _ in range(vertex_count)] if directed else None
        seen = set()
        for u, v in edges:
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise GraphFormatError(f"edge ({u}, {v}) is out of range")
            if u == v:
                raise GraphFormatError(f"self-loop on vertex {u}")
            key = (u, v) if directed else (min(u, v), max(u, v))
            if key in seen:
                continue
            seen.add(key)
            if directed:
                adj_out[u].append(v)
                adj_in[v].append(u)
            else:
                adj_out[u].append(v)
                adj_out[v].append(u)
        for row in adj_out:
            row.sort()
        if directed:
            for row in adj_in:
                row.sort()
        return cls(vertex_count, directed, adj_out, adj_in, labels)

    # -- basic accessors ----------------------------------------------

    @property
    def edge_count(self):
        total = sum(len(row) for row in self.adj_out)
        return total if self.directed else total // 2

    def out_neighbors(self, v):
        return self.adj_out[v]

    def in_neighbors(self, v):
        return self.adj_in[v]

    def has_edge(self, u, v):
        row = self.adj_out[u]
        i = _bisect_find(row, v)
        return i >= 0

    def to_label(self, v):
        return self.labels[v]

    def to_id(self, label):
        if self._label_to_id is None:
            self._label_to_id = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return self._label_to_id[label]
        except KeyError:
            raise GraphFormatError(f"unknown vertex label {label!r}") from None

    def canonical_edges(self):
        """Edges as sorted dense-ID pairs; undirected edges appear once as (min, max)."""
        out = []
        for u, row in enumerate(self.adj_out):
            for v in row:
                if self.directed or u < v:
                    out.append((u, v))
        return out

    def degree_stats(self):
        degs = [len(r) for r in self.adj_out]
        n = self.vertex_count
        return {
            "min_degree": min(degs),
            "max_degree": max(degs),
            "avg_degree": sum(degs) / n,
        }

    # -- identity ------------------------------------------------------

    def fingerprint(self):
        """Hex digest binding an index file to this graph's structure."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(_FINGERPRINT_TAG)
            h.update(b"D" if self.directed else b"U")
            h.update(self.vertex_count.to_bytes(8, "little"))
            edges = self.canonical_edges()
            arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
            h.update(arr.tobytes())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    # -- edge updates (persistent) --------------------------------------

    def with_edge(self, u, v):
        """Return a new graph with edge (u, v) added."""
        self._check_endpoints(u, v)
        if self.has_edge(u, v):
            raise EdgeUpdateError(f"edge ({self.labels[u]}, {self.labels[v]}) already exists")
        adj_out = list(self.adj_out)
        adj_out[u] = list(adj_out[u])
        insort(adj_out[u], v)
        if self.directed:
            adj_in = list(self.adj_in)
            adj_in[v] = list(adj_in[v])
            insort(adj_in[v], u)
        else:
            adj_out[v] = list(adj_out[v])
            insort(adj_out[v], u)
            adj_in = None
        return Graph(self.vertex_count, self.directed, adj_out, adj_in, self.labels)

    def without_edge(self, u, v):
        """Return a new graph with edge (u, v) removed."""
        self._check_endpoints(u, v)
        if not self.has_edge(u, v):
            raise EdgeUpdateError(f"edge ({self.labels[u]}, {self.labels[v]}) does not exist")
        adj_out = list(self.adj_out)
        adj_out[u] = [x for x in adj_out[u] if x != v]
        if self.directed:
            adj_in = list(self.adj_in)
            adj_in[v] = [x for x in adj_in[v] if x != u]
        else:
            adj_out[v] = [x for x in adj_out[v] if x != u]
            adj_in = None
        return Graph(self.vertex_count, self.directed, adj_out, adj_in, self.labels)

    def _check_endpoints(self, u, v):
        n = self.vertex_count
        if not (0 <= u < n and 0 <= v < n):
            raise EdgeUpdateError(f"edge ({u}, {v}) is out of range")
        if u == v:
            raise EdgeUpdateError(f"self-loop on vertex {u} is not allowed")

    # -- sparse views ----------------------------------------------------

    def csr(self, direction=None):
        """Adjacency as a scipy CSR matrix with unit int64 entries (cached)."""
        direction = resolve_direction(self, direction)
        cached = self._csr_cache.get(direction)
        if cached is not None:
            return cached
        adj = self.adj_out if direction != IN else self.adj_in
        n = self.vertex_count
        indptr = np.zeros(n + 1, dtype=np.int64)
        for v, row in enumerate(adj):
            indptr[v + 1] = indptr[v] + len(row)
        indices = np.empty(indptr[-1], dtype=np.int64)
        pos = 0
        for row in adj:
            indices[pos : pos + len(row)] = row
            pos += len(row)
        data = np.ones(len(indices), dtype=np.int64)
        mat = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
        self._csr_cache[direction] = mat
        return mat


def _bisect_find(row, v):
    lo, hi = 0, len(row)
    while lo < hi:
        mid = (lo + hi) // 2
        if row[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo < len(row) and row[lo] == v else -1


def resolve_direction(g, direction):
    """Normalize a traversal direction against the graph's directedness."""
    if g.directed:
        if direction is None:
            return OUT
        if direction in (OUT, IN):
            return direction
        raise SpecError(f"invalid direction {direction!r} for a directed graph")
    if direction in (None, "undirected"):
        return "undirected"
    raise SpecError("direction applies only to directed graphs")


# -- bounded traversals ------------------------------------------------


def khop_window(g, v, k, direction=None):
    """Vertices within k hops of v (v included), as a sorted list."""
    if not (0 <= v < g.vertex_count):
        raise SpecError(f"vertex {v} out of range")
    if k < 0:
        raise SpecError("hop count must be non-negative")
    direction = resolve_direction(g, direction)
    adj = g.adj_in if direction == IN else g.adj_out
    visited = {v}
    frontier = [v]
    for _ in range(k):
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w not in visited:
                    visited.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return sorted(visited)


def khop_windows_csr(g, sources, k, direction=None):
    """K-hop windows for a batch of sources as a CSR matrix of unit entries.

    Row i holds the window of ``sources[i]``.  Each window is computed from
    its own source; no work is shared between rows beyond the vectorized
    frontier expansion.
    """
    direction = resolve_direction(g, direction)
    a = g.csr(direction)
    n = g.vertex_count
    src = np.asarray(sources, dtype=np.int64)
    s = len(src)
    ones = np.ones(s, dtype=np.int64)
    reached = sparse.csr_matrix((ones, (np.arange(s), src)), shape=(s, n))
    frontier = reached
    for _ in range(k):
        if frontier.nnz == 0:
            break
        nxt = frontier @ a
        if nxt.nnz:
            nxt.data[:] = 1
        new = nxt - nxt.multiply(reached)
        new.eliminate_zeros()
        if new.nnz == 0:
            break
        reached = reached + new
        frontier = new
    reached.sort_indices()
    return reached


def topological_order(g):
    """Kahn order with ties broken toward the smallest vertex ID."""
    if not g.directed:
        raise SpecError("topological order requires a directed graph")
    n = g.vertex_count
    indeg = [len(g.adj_in[v]) for v in range(n)]
    heap = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in g.adj_out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    if len(order) < n:
        remaining = {v for v in range(n) if indeg[v] > 0}
        member = _find_cycle_vertex(g, remaining)
        raise CycleError(f"graph contains a cycle through vertex {g.labels[member]!r}")
    return order


def _find_cycle_vertex(g, remaining):
    start = min(remaining)
    seen = set()
    cur = start
    while cur not in seen:
        seen.add(cur)
        cur = next(u for u in g.adj_in[cur] if u in remaining)
    return cur


def topological_window(g, v):
    """Ancestors of v plus v itself, as a sorted list.

    The ancestor set is closed under incoming edges, so acyclicity of the
    part of the graph this window depends on is checked locally.
    """
    if not g.directed:
        raise SpecError("topological windows require a directed acyclic graph")
    if not (0 <= v < g.vertex_count):
        raise SpecError(f"vertex {v} out of range")
    members = {v}
    frontier = [v]
    while frontier:
        nxt = []
        for u in frontier:
            for p in g.adj_in[u]:
                if p not in members:
                    members.add(p)
                    nxt.append(p)
        frontier = nxt
    _check_acyclic_closed(g, members)
    return sorted(members)


def ancestor_set(g, v):
    """Reverse-reachability set of v (v included), without the cycle check.

    Callers must have validated acyclicity for the whole graph already,
    e.g. via :func:`topological_order`.
    """
    members = {v}
    frontier = [v]
    while frontier:
        nxt = []
        for u in frontier:
            for p in g.adj_in[u]:
                if p not in members:
                    members.add(p)
                    nxt.append(p)
        frontier = nxt
    return members


def reachable(g, src, dst):
    """True when dst can be reached from src along out-edges."""
    if src == dst:
        return True
    visited = {src}
    frontier = [src]
    while frontier:
        nxt = []
        for u in frontier:
            for w in g.adj_out[u]:
                if w == dst:
                    return True
                if w not in visited:
                    visited.add(w)
                    nxt.append(w)
        frontier = nxt
    return False


def _check_acyclic_closed(g, members):
    # members is closed under in-edges, so induced in-degrees are full in-degrees
    indeg = {x: len(g.adj_in[x]) for x in members}
    stack = [x for x, d in indeg.items() if d == 0]
    processed = 0
    while stack:
        x = stack.pop()
        processed += 1
        for child in g.adj_out[x]:
            if child in indeg:
                indeg[child] -= 1
                if indeg[child] == 0:
                    stack.append(child)
    if processed < len(members):
        raise CycleError("ancestor set contains a cycle")


def ancestor_bitsets(g, order=None):
    """Per-vertex ancestor windows as bitsets (bit v of result[v] is set).

    Materializes all windows at once; intended for small graphs such as
    validation fixtures, not for large-scale builds.
    """
    if order is None:
        order = topological_order(g)
    bits = [0] * g.vertex_count
    for v in order:
        w = 1 << v
        for p in g.adj_in[v]:
            w |= bits[p]
        bits[v] = w
    return bits


def bits_to_indices(bits, n):
    """Set bit positions of a bitset as a sorted int64 array."""
    if bits == 0:
        return np.empty(0, dtype=np.int64)
    raw = bits.to_bytes((n + 7) // 8, "little")
    unpacked = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return np.nonzero(unpacked[:n])[0].astype(np.int64)


# -- synthetic generators ----------------------------------------------


def _sample_distinct_pairs(n, m, rng):
    max_pairs = n * (n - 1) // 2
    if m > max_pairs:
        raise SpecError(f"cannot place {m} distinct edges on {n} vertices")
    chosen = set()
    pairs = []
    while len(pairs) < m:
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        if key in chosen:
            continue
        chosen.add(key)
        pairs.append(key)
    return pairs

def generate_random_graph(n, avg_degree, *, seed, directed=False):
    """Uniform random graph with ``round(n * avg_degree / 2)`` distinct edges.

    ``avg_degree`` is the average total degree.  For directed graphs each
    sampled pair gets a random orientation.
    """
    if n < 1:
        raise SpecError("need at least one vertex")
    if avg_degree < 0:
        raise SpecError("average degree must be non-negative")
    rng = random.Random(seed)
    m = round(n * avg_degree / 2)
    pairs = _sample_distinct_pairs(n, m, rng)
    if directed:
        edges = [(u, v) if rng.random() < 0.5 else (v, u) for u, v in pairs]
    else:
        edges = pairs
    return Graph.from_edges(n, edges, directed=directed)


def generate_random_dag(n, avg_degree, *, seed):
    """Random DAG: sampled pairs oriented along a random vertex ranking."""
    if n < 1:
        raise SpecError("need at least one vertex")
    rng = random.Random(seed)
    m = round(n * avg_degree / 2)
    pairs = _sample_distinct_pairs(n, m, rng)
    rank = list(range(n))
    rng.shuffle(rank)
    edges = [(u, v) if rank[u] < rank[v] else (v, u) for u, v in pairs]
    return Graph.from_edges(n, edges, directed=True)


# -- attributes ---------------------------------------------------------


class AttributeTable:
    """Named per-vertex attribute columns aligned to dense vertex IDs."""

    def __init__(self, vertex_count, columns):
        self.vertex_count = vertex_count
        self.columns = {}
        for name, values in columns.items():
            arr = np.asarray(values)
            if arr.shape != (vertex_count,):
                raise GraphFormatError(
                    f"attribute {name!r} has {arr.shape[0] if arr.ndim else 0} values, "
                    f"expected {vertex_count}"
                )
            if not np.issubdtype(arr.dtype, np.number):
                raise GraphFormatError(f"attribute {name!r} is not numeric")
            if np.issubdtype(arr.dtype, np.integer):
                arr = arr.astype(np.int64)
            else:
                arr = arr.astype(np.float64)
            self.columns[name] = arr
        self._as_lists = {}

    @property
    def names(self):
        return list(self.columns)

    def column(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise SpecError(f"unknown attribute {name!r}") from None

    def column_list(self, name):
        """Column as a plain Python list (exact ints for integer columns)."""
        cached = self._as_lists.get(name)
        if cached is None:
            cached = self.column(name).tolist()
            self._as_lists[name] = cached
        return cached

    @classmethod
    def random_ints(cls, vertex_count, *, name="value", seed=0, low=0, high=1000):
        rng = random.Random(seed)
        vals = [rng.randint(low, high) for _ in range(vertex_count)]
        return cls(vertex_count, {name: np.asarray(vals, dtype=np.int64)})
