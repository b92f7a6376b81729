"""Error taxonomy shared across the package.

Exit-code mapping used by the CLI: validation errors -> 2, unreachable
target -> 3, internal assertion failures -> 4.
"""


class ClearpathError(Exception):
    """Base class for all package errors."""


class SceneValidationError(ClearpathError):
    """Malformed scene input (bad polygons, endpoints inside obstacles, ...)."""


class DegenerateInputError(ClearpathError):
    """Geometrically degenerate input a routine cannot handle (coincident
    features, zero-clearance query points, ...)."""


class PreconditionError(ClearpathError):
    """An operation was called outside its documented domain."""


class UnreachableTargetError(ClearpathError):
    """No path between source and target exists in the search graph."""


class QuadratureError(ClearpathError):
    """Numeric integration hit the clearance floor or failed to converge."""


class InternalError(ClearpathError):
    """An internal consistency check failed; indicates a bug, not bad input."""
