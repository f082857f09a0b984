"""Exception types shared across the package."""


class ScaffoldError(Exception):
    """Base class for errors raised by porous_scaffold."""


class ParameterDomainError(ScaffoldError, ValueError):
    """A parameter lies outside the unit cube (or a knot range)."""


class DegenerateGeometryError(ScaffoldError, ValueError):
    """A surface point has a vanishing normal."""


class ClosureError(ScaffoldError):
    """A mesh failed the closed-mesh edge pairing check.

    ``edges`` holds the offending undirected edges as vertex index pairs.
    """

    def __init__(self, message, edges=()):
        super().__init__(message)
        self.edges = list(edges)


class FormatError(ScaffoldError, ValueError):
    """A TDF/TBSS file could not be parsed."""

    def __init__(self, message, line=None, section=None):
        where = []
        if section is not None:
            where.append(f"section '{section}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.section = section
