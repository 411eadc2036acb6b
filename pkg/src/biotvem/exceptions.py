"""Exception hierarchy shared by all biotvem modules."""


class BiotVemError(Exception):
    """Base class. ``kind`` is the short machine-parsable class name used by the CLI."""

    kind = "error"


class MeshParseError(BiotVemError):
    kind = "parse_error"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TopologyError(BiotVemError):
    kind = "topology_error"


class GeometryError(BiotVemError):
    kind = "geometry_error"


class ConfigurationError(BiotVemError):
    kind = "configuration_error"


class ElementError(BiotVemError):
    kind = "element_error"


class AssemblyError(BiotVemError):
    kind = "assembly_error"


class SolverError(BiotVemError):
    kind = "solver_error"


class ConvergenceError(SolverError):
    """Raised when the fixed-point loop exhausts its iteration budget."""

    kind = "convergence_error"

    def __init__(self, message, increments=()):
        self.increments = list(increments)
        super().__init__(message)
