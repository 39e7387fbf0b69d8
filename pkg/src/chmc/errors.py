"""Exception hierarchy shared by all modules."""


class CHMCError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CHMCError, ValueError):
    """A point lies inside the excluded ball around the metric center."""


class NumericError(CHMCError, ArithmeticError):
    """A numerical routine produced an unusable result."""


class DiscretizationError(NumericError):
    """The discrete surface is degenerate (vanishing tangent, fold-over)."""


class UndefinedCurvatureError(NumericError):
    """A principal curvature is non-positive, so F is undefined."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class FlowInstabilityError(NumericError):
    """Explicit time stepping blew up even after step-size back-off."""


class BandExitError(CHMCError):
    """A flow iterate left the configured round-surface class."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AssemblyError(NumericError):
    """An operator matrix failed a structural check (e.g. symmetry)."""


class ConfigError(CHMCError, ValueError):
    """Invalid run configuration."""


class LadderError(NumericError):
    """A flow run inside a ladder failed; completed entries are kept."""

    def __init__(self, message, ladder=None, cause=None):
        super().__init__(message)
        self.ladder = ladder
        self.cause = cause
