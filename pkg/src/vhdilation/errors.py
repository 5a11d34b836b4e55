"""Exception hierarchy shared by every module of the package."""


class DilationError(Exception):
    """Base class for all errors raised by vhdilation."""


class ShapeMismatch(DilationError, ValueError):
    pass


class MalformedTable(DilationError, ValueError):
    pass


class NotPositive(DilationError, ValueError):
    pass


class NotPSD(DilationError, ValueError):
    pass


class NotTwoPositive(DilationError, ValueError):
    pass


class InconsistentOrbit(DilationError, ValueError):
    pass


class PartialActionError(DilationError, ValueError):
    """A computation needed a product that falls outside a finite window."""


class NonInvariantKernel(DilationError, ValueError):
    def __init__(self, message, triple=None, residual=None):
        super().__init__(message)
        self.triple = triple
        self.residual = residual


class NotEquivalent(DilationError, ValueError):
    pass


class NotCP(DilationError, ValueError):
    pass


class MalformedNet(DilationError, ValueError):
    pass


class ParseError(DilationError, ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class DimensionError(DilationError, ValueError):
    pass


class TaskDependencyError(DilationError):
    pass


class VersionMismatch(DilationError, ValueError):
    pass
