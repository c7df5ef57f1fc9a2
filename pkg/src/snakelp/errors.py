"""Exception hierarchy shared by every stage of the pipeline."""


class SnakeLPError(Exception):
    """Base class; the CLI maps any subclass to exit status 1."""


# imagecore
class ImageFormatError(SnakeLPError):
    pass


class BadMagic(ImageFormatError):
    pass


class BadHeader(ImageFormatError):
    pass


class Truncated(ImageFormatError):
    pass


class TooSmall(SnakeLPError):
    pass


# edgemap
class AllZero(SnakeLPError):
    pass


class NoEdges(SnakeLPError):
    pass


class BudgetTooSmall(SnakeLPError):
    pass


class EmptyRoi(SnakeLPError):
    pass


# lpbuild
class DegenerateEdgeMap(SnakeLPError):
    pass


class NonPositiveComponent(SnakeLPError):
    pass


class ZeroSnakeValue(SnakeLPError):
    pass


# ipsolve
class SolverError(SnakeLPError):
    pass


class FactorizationFailure(SolverError):
    pass


class NumericalFailure(SolverError):
    pass


class InfeasibleStart(SolverError):
    pass


class UnboundedProblem(SolverError):
    pass


class InfeasibleProblem(SolverError):
    pass


class TooLarge(SolverError):
    pass


# segment / evaluate
class KTooLarge(SnakeLPError):
    pass


class DimensionMismatch(SnakeLPError):
    pass
