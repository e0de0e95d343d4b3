"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, SolverError -> 3,
GeometryError -> 4. Plain ValueError is used for scalar domain errors
(negative density and the like) and surfaces as a solver error when it
escapes a run.
"""


class FsilabError(Exception):
    """Base class for package errors."""


class ConfigError(FsilabError):
    """Bad or unknown configuration input."""


class SolverError(FsilabError):
    """Time stepping failed (vacuum collapse, NaN state, map failure)."""


class MapError(SolverError):
    """Flow-map trajectory left the domain or inversion failed."""


class GeometryError(FsilabError):
    """Geometric precondition violated (gap constraint, tubular reach)."""


class CouplingError(FsilabError):
    """Surface traction assembly failed (sample outside the fluid stencil)."""


class MeasureError(FsilabError):
    """Empirical-measure operation on malformed sample sets."""
