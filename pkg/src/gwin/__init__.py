"""Per-vertex window aggregates over attributed graphs.

A window query computes, for every vertex, an aggregate of an attribute
over that vertex's window: either the vertices within k hops, or (on DAGs)
the vertex and all its ancestors.  Three evaluators are provided: a plain
per-vertex traversal (`evaluate_nonindexed`, the correctness oracle), a
dense-block index that shares partial aggregates across overlapping windows
(`gwin.dbindex`), and an inheritance index that exploits the containment
of ancestor windows (`gwin.iindex`).
"""

from . import bench, dbindex, iindex, serialize
from .aggregates import (
    FUNCTIONS,
    AggregateSpec,
    OpCounter,
    ResultTable,
    result_mismatches,
)
from .errors import (
    CycleError,
    EdgeUpdateError,
    GraphFormatError,
    GwinError,
    IndexMismatchError,
    SerializationError,
    SpecError,
)
from .graph import (
    AttributeTable,
    Graph,
    generate_random_dag,
    generate_random_graph,
    khop_window,
    topological_order,
    topological_window,
)
from .io import load_attribute_table, load_edge_list
from .query import KHOP, TOPOLOGICAL, WindowSpec, evaluate_nonindexed, evaluate_nonindexed_multi
from .serialize import load_index, save_index

__version__ = "0.1.0"

__all__ = [
    "AggregateSpec",
    "AttributeTable",
    "CycleError",
    "EdgeUpdateError",
    "FUNCTIONS",
    "Graph",
    "GraphFormatError",
    "GwinError",
    "IndexMismatchError",
    "KHOP",
    "OpCounter",
    "ResultTable",
    "SerializationError",
    "SpecError",
    "TOPOLOGICAL",
    "WindowSpec",
    "bench",
    "dbindex",
    "evaluate_nonindexed",
    "evaluate_nonindexed_multi",
    "generate_random_dag",
    "generate_random_graph",
    "iindex",
    "khop_window",
    "load_attribute_table",
    "load_edge_list",
    "load_index",
    "result_mismatches",
    "save_index",
    "serialize",
    "topological_order",
    "topological_window",
    "__version__",
]
