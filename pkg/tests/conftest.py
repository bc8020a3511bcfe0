"""Shared fixtures: the two hand-checked demo graphs and brute-force oracles.

The oracles here rebuild adjacency from the edge list and run plain
set-based searches, independent of the library's adjacency storage, CSR
batching, and bitset code paths they are used to check.
"""

import pytest

from gwin import Graph

# Seed under which the MinHash clustering of the 6-vertex demo graph groups
# {A,B,C} together, producing the documented block decomposition
# {A,D,F} <- {A,B,C}, {B} <- {A,B}, {C,E} <- {A,C}.  Found by scanning seeds
# once; any seed with that clustering works, this one is frozen for tests.
CANONICAL_DEMO_SEED = 130

DEMO_LABELS = list("ABCDEF")
DEMO_EDGES = [
    ("A", "B"), ("A", "C"), ("A", "D"), ("A", "E"), ("A", "F"),
    ("B", "D"), ("B", "F"), ("C", "D"), ("C", "E"), ("C", "F"),
]

DAG_LABELS = list("ABCDEFGH")
DAG_EDGES = [
    ("A", "D"), ("B", "D"), ("A", "C"), ("D", "E"),
    ("C", "E"), ("D", "H"), ("E", "F"), ("C", "G"),
]


def graph_from_labeled_edges(labels, edges, directed):
    ix = {lab: i for i, lab in enumerate(labels)}
    pairs = [(ix[u], ix[v]) for u, v in edges]
    return Graph.from_edges(len(labels), pairs, directed=directed, labels=labels)


@pytest.fixture
def demo_graph():
    """Six vertices, ten undirected edges; the worked example graph."""
    return graph_from_labeled_edges(DEMO_LABELS, DEMO_EDGES, directed=False)


@pytest.fixture
def demo_dag():
    """Eight-vertex DAG with known ancestor windows."""
    return graph_from_labeled_edges(DAG_LABELS, DAG_EDGES, directed=True)


# -- brute-force oracles ----------------------------------------------------


def adjacency_maps(g):
    """(out, in) neighbor sets rebuilt from the canonical edge list."""
    out = {v: set() for v in range(g.vertex_count)}
    inc = {v: set() for v in range(g.vertex_count)}
    for u, v in g.canonical_edges():
        out[u].add(v)
        inc[v].add(u)
        if not g.directed:
            out[v].add(u)
            inc[u].add(v)
    return out, inc


def bfs_window(g, v, k, direction=None):
    """Vertices within k hops of v, focal included, as a sorted list."""
    out, inc = adjacency_maps(g)
    adj = inc if direction == "in" else out
    seen = {v}
    frontier = {v}
    for _ in range(k):
        frontier = {w for x in frontier for w in adj[x]} - seen
        seen |= frontier
    return sorted(seen)


def ancestor_window(g, v):
    """v plus everything that reaches v, as a sorted list."""
    _, inc = adjacency_maps(g)
    seen = {v}
    frontier = {v}
    while frontier:
        frontier = {w for x in frontier for w in inc[x]} - seen
        seen |= frontier
    return sorted(seen)


def fold(function, values):
    """Reference aggregate of a plain value list; None for empty min/max/avg."""
    if function == "sum":
        return sum(values)
    if function == "count":
        return len(values)
    if function == "min":
        return min(values) if values else None
    if function == "max":
        return max(values) if values else None
    if function == "avg":
        return sum(values) / len(values) if values else None
    raise AssertionError(function)


def window_aggregate(g, attrs, spec, windows):
    """Per-vertex reference answer given precomputed windows."""
    if spec.function == "count":
        return [fold("count", windows[v]) for v in range(g.vertex_count)]
    col = attrs.column_list(spec.attribute)
    return [
        fold(spec.function, [col[x] for x in windows[v]])
        for v in range(g.vertex_count)
    ]
