"""Exception hierarchy shared by every spinlab module."""


class SpinLabError(Exception):
    """Base class for all spinlab errors."""


class GraphError(SpinLabError, ValueError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class Disconnected(GraphError):
    pass


class InvalidParameter(SpinLabError, ValueError):
    pass


class DimensionMismatch(SpinLabError, ValueError):
    pass


class SameVertex(SpinLabError, ValueError):
    pass


class SolverFailure(SpinLabError, ArithmeticError):
    pass


class TooLarge(SpinLabError, ValueError):
    pass


class WrongN(SpinLabError, ValueError):
    pass


class UnsupportedN(SpinLabError, ValueError):
    pass


class InvalidDepth(SpinLabError, ValueError):
    pass


class NonpositiveBeta(SpinLabError, ValueError):
    pass


class InsufficientSamples(SpinLabError, ValueError):
    pass


class ConvergenceFailure(SpinLabError, ArithmeticError):
    pass


class MissingVerdict(SpinLabError, ValueError):
    pass
