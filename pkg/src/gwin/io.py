"""File formats: edge lists, attribute tables, and result serialization helpers."""

from __future__ import annotations

import csv
import logging
import os
from io import StringIO

import numpy as np

from .errors import GraphFormatError
from .graph import AttributeTable, Graph, IngestStats

log = logging.getLogger("gwin")


def _open_text(source, mode="r"):
    if hasattr(source, "read") or hasattr(source, "write"):
        return source, False
    return open(os.fspath(source), mode, encoding="utf-8"), True


def load_edge_list(source, *, directed=False):
    """Parse an edge list into a :class:`Graph`.

    One edge per line as two whitespace- or comma-separated vertex labels; a
    line with a single label declares a vertex without adding an edge (used
    for isolated vertices and to pin vertex numbering).  Blank lines and
    ``#`` comments are skipped.  Labels are remapped to dense IDs in order of
    first appearance; the original labels stay on the graph.  Self-loops and
    duplicate edges are dropped and counted.
    """
    fh, own = _open_text(source)
    try:
        labels = []
        label_to_id = {}
        edges = []
        seen = set()
        stats = IngestStats()

        def intern(lab):
            vid = label_to_id.get(lab)
            if vid is None:
                vid = len(labels)
                label_to_id[lab] = vid
                labels.append(lab)
            return vid

        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) == 1:
                intern(parts[0])
                continue
            if len(parts) != 2:
                raise GraphFormatError(f"line {lineno}: expected two vertex labels, got {line!r}")
            u, v = (intern(lab) for lab in parts)
            if u == v:
                stats.self_loops_dropped += 1
                continue
            key = (u, v) if directed else (min(u, v), max(u, v))
            if key in seen:
                stats.duplicate_edges_dropped += 1
                continue
            seen.add(key)
            edges.append((u, v))
        if not labels:
            raise GraphFormatError("edge list is empty")
        stats.edges_kept = len(edges)
        if stats.duplicate_edges_dropped or stats.self_loops_dropped:
            log.warning(
                "dropped %d duplicate edge(s) and %d self-loop(s) while loading",
                stats.duplicate_edges_dropped,
                stats.self_loops_dropped,
            )
        g = Graph.from_edges(len(labels), edges, directed=directed, labels=labels)
        g.ingest_stats = stats
        return g
    finally:
        if own:
            fh.close()


def emit_edge_list(g, sink):
    """Write the canonical edge list using original labels, one edge per line.

    Single-label declaration lines are interleaved so that the first physical
    appearance of every label happens in vertex-ID order; reloading the output
    therefore reproduces the graph's numbering (and fingerprint) exactly,
    including vertices that are isolated or that edge lines alone would
    introduce out of order.
    """
    fh, own = _open_text(sink, "w")
    try:
        labels = g.labels
        intro = 0  # labels below this id have already appeared in the output

        def declare_through(stop):
            nonlocal intro
            while intro < stop:
                fh.write(f"{labels[intro]}\n")
                intro += 1

        for u, v in g.canonical_edges():
            if u >= intro:
                if v > u + 1:
                    # fillers for (u, v) precede this line, so u cannot make
                    # its first appearance on the line; declare it first
                    declare_through(u + 1)
                    declare_through(v)
                    intro = v + 1
                elif v == u + 1:
                    declare_through(u)
                    intro = v + 1
                else:
                    declare_through(u)
                    intro = u + 1
            elif v >= intro:
                declare_through(v)
                intro = v + 1
            fh.write(f"{labels[u]} {labels[v]}\n")
        declare_through(g.vertex_count)
    finally:
        if own:
            fh.close()


def edge_list_bytes(g):
    buf = StringIO()
    emit_edge_list(g, buf)
    return buf.getvalue().encode("utf-8")


def load_attribute_table(source, g):
    """Load a CSV attribute table keyed by original vertex labels.

    Header must be ``vertex,<name>[,<name>...]``.  Rows for labels not in the
    graph are an error; vertices without a row default to 0.  A column is
    integer unless any of its values needs a decimal point.
    """
    fh, own = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphFormatError("attribute file is empty") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "vertex":
            raise GraphFormatError("attribute header must be 'vertex,<name>[,...]'")
        names = header[1:]
        if len(set(names)) != len(names):
            raise GraphFormatError("duplicate attribute names in header")
        n = g.vertex_count
        raw = {name: [0] * n for name in names}
        is_float = {name: False for name in names}
        seen_rows = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise GraphFormatError(f"line {lineno}: expected {len(header)} fields")
            label = row[0].strip()
            vid = g.to_id(label)  # raises GraphFormatError for unknown labels
            if vid in seen_rows:
                raise GraphFormatError(f"line {lineno}: duplicate row for vertex {label!r}")
            seen_rows.add(vid)
            for name, field in zip(names, row[1:]):
                text = field.strip()
                try:
                    value = int(text)
                except ValueError:
                    try:
                        value = float(text)
                    except ValueError:
                        raise GraphFormatError(
                            f"line {lineno}: non-numeric value {text!r} for {name!r}"
                        ) from None
                    is_float[name] = True
                raw[name][vid] = value
        columns = {}
        for name in names:
            dtype = np.float64 if is_float[name] else np.int64
            columns[name] = np.asarray(raw[name], dtype=dtype)
        return AttributeTable(n, columns)
    finally:
        if own:
            fh.close()


def write_attribute_table(attrs, g, sink):
    """Inverse of :func:`load_attribute_table` (used by the benchmark driver)."""
    fh, own = _open_text(sink, "w")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        names = attrs.names
        writer.writerow(["vertex"] + names)
        cols = [attrs.column_list(name) for name in names]
        for v in range(g.vertex_count):
            writer.writerow([g.labels[v]] + [col[v] for col in cols])
    finally:
        if own:
            fh.close()
