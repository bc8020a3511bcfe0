"""Exception types shared across the package."""


class GwinError(Exception):
    """Base class for every error raised by this package."""


class GraphFormatError(GwinError):
    """Malformed, inconsistent, or empty graph/attribute input."""


class CycleError(GwinError):
    """A topological operation hit a cycle in a graph that must be acyclic."""


class EdgeUpdateError(GwinError):
    """An edge insertion or deletion conflicts with the current graph."""


class SpecError(GwinError):
    """A window or aggregate specification is invalid for the given graph."""


class IndexMismatchError(GwinError):
    """An index does not correspond to the graph it is being used with."""


class SerializationError(GwinError):
    """An index file is corrupt, truncated, or has an unsupported format."""
