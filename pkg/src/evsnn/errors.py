"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for every error raised by :mod:`evsnn`."""


# events
class MalformedRecord(SimulationError, ValueError):
    pass


class CoordinateOutOfRange(SimulationError, ValueError):
    pass


class NonMonotonicTimestamp(SimulationError, ValueError):
    pass


class InvalidWindow(SimulationError, ValueError):
    pass


class ShapeMismatch(SimulationError, ValueError):
    pass


# network
class ConfigSyntaxError(SimulationError, ValueError):
    """Syntax error in a network config; carries 1-based line and column."""

    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ShapeError(SimulationError, ValueError):
    pass


class IncompatibleShape(ShapeError):
    pass


class MissingWeights(SimulationError):
    pass


# engine
class DimensionMismatch(SimulationError, ValueError):
    pass


# tiler
class PlanMismatch(SimulationError, ValueError):
    pass


class OverlapDetected(SimulationError, ValueError):
    pass


class CoverageGap(SimulationError, ValueError):
    pass


# perf
class UnknownStage(SimulationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MissingStage(SimulationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InstrumentationMissing(SimulationError):
    pass


# trainer
class FixedPointUnsupported(SimulationError):
    pass


class CacheMissing(SimulationError):
    pass


class EmptyDataset(SimulationError, ValueError):
    pass


class ClassOutOfRange(SimulationError, ValueError):
    pass
