"""Aggregation algebra: combinable partial aggregates and result tables.

Partials form a commutative monoid under :func:`combine` with
:func:`init_partial` as the identity, so window aggregates can be assembled
from per-block partials in any grouping or order.  Integer sums and counts
stay exact (Python ints); ``avg`` divides only at finalization.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

from .errors import SpecError

FUNCTIONS = ("sum", "count", "avg", "min", "max")


@dataclass(frozen=True)
class AggregateSpec:
    """Which aggregate to compute, over which attribute column."""

    function: str
    attribute: str | None = None

    def __post_init__(self):
        if self.function not in FUNCTIONS:
            raise SpecError(f"unknown aggregate function {self.function!r}")
        if self.function != "count" and not self.attribute:
            raise SpecError(f"aggregate {self.function!r} needs an attribute")
        if self.function == "count" and self.attribute is not None:
            raise SpecError("count takes no attribute")


class PartialAggregate:
    """Combinable state for one window aggregate.

    ``total``/``count`` serve sum, count, and avg; ``lo``/``hi`` serve
    min/max and stay None while no value has been folded in.
    """

    __slots__ = ("function", "total", "count", "lo", "hi")

    def __init__(self, function):
        self.function = function
        self.total = 0
        self.count = 0
        self.lo = None
        self.hi = None

    def copy(self):
        p = PartialAggregate(self.function)
        p.total = self.total
        p.count = self.count
        p.lo = self.lo
        p.hi = self.hi
        return p

    def __repr__(self):
        return (
            f"PartialAggregate({self.function}, total={self.total}, "
            f"count={self.count}, lo={self.lo}, hi={self.hi})"
        )


def init_partial(spec):
    """Identity element for the aggregate's combine monoid."""
    return PartialAggregate(spec.function)


def accumulate(p, value):
    """Fold one raw value into a partial (in place); returns the partial."""
    p.total += value
    p.count += 1
    if p.lo is None or value < p.lo:
        p.lo = value
    if p.hi is None or value > p.hi:
        p.hi = value
    return p


def combine(p, q):
    """Merge two partials into a new one; arguments are left untouched."""
    out = PartialAggregate(p.function)
    out.total = p.total + q.total
    out.count = p.count + q.count
    if p.lo is None:
        out.lo, out.hi = q.lo, q.hi
    elif q.lo is None:
        out.lo, out.hi = p.lo, p.hi
    else:
        out.lo = p.lo if p.lo < q.lo else q.lo
        out.hi = p.hi if p.hi > q.hi else q.hi
    return out


def finalize(p):
    """Collapse a partial to its value; empty min/max/avg finalize to None."""
    fn = p.function
    if fn == "sum":
        return p.total
    if fn == "count":
        return p.count
    if fn == "avg":
        return None if p.count == 0 else p.total / p.count
    if fn == "min":
        return p.lo
    return p.hi


@dataclass
class OpCounter:
    """Counts aggregation work: raw values folded and partials merged."""

    accumulates: int = 0
    combines: int = 0

    @property
    def total(self):
        return self.accumulates + self.combines

    def add(self, other):
        self.accumulates += other.accumulates
        self.combines += other.combines


def _label_sort_key(label):
    try:
        return (0, int(label), "")
    except ValueError:
        return (1, 0, label)


class ResultTable:
    """Per-vertex aggregate values aligned to dense IDs, labelled for output."""

    def __init__(self, labels, values):
        if len(labels) != len(values):
            raise ValueError("labels and values must align")
        self.labels = labels
        self.values = values

    def __len__(self):
        return len(self.values)

    def value_of(self, v):
        return self.values[v]

    def rows_sorted(self):
        order = sorted(range(len(self.labels)), key=lambda i: _label_sort_key(self.labels[i]))
        for i in order:
            yield self.labels[i], self.values[i]

    def to_csv(self, sink):
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(["vertex", "value"])
        for label, value in self.rows_sorted():
            writer.writerow([label, "" if value is None else value])

    def to_json(self, sink):
        rows = [
            {"vertex": label, "value": value} for label, value in self.rows_sorted()
        ]
        json.dump(rows, sink, indent=2)
        sink.write("\n")


def result_mismatches(a, b, *, rel_tol=1e-9):
    """Count row-wise differences between two result tables.

    Integers and None compare exactly; floats compare within ``rel_tol``.
    Returns (mismatch_count, max_rel_error).
    """
    if len(a) != len(b) or a.labels != b.labels:
        raise SpecError("result tables cover different vertex sets")
    mismatches = 0
    worst = 0.0
    for x, y in zip(a.values, b.values):
        if x is None or y is None:
            if x is not y:
                mismatches += 1
                worst = math.inf
            continue
        if isinstance(x, int) and isinstance(y, int):
            if x != y:
                mismatches += 1
                worst = math.inf
            continue
        if x == y:
            continue
        err = abs(x - y) / max(abs(x), abs(y), 1e-300)
        worst = max(worst, err)
        if err > rel_tol:
            mismatches += 1
    return mismatches, worst
