"""Exception hierarchy shared by the numerical modules and the CLI."""


class SpinBosonError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InvalidParameterError(SpinBosonError, ValueError):
    exit_code = 2


class CapacityError(SpinBosonError):
    exit_code = 4


class AccuracyError(SpinBosonError, ArithmeticError):
    exit_code = 3


class ConvergenceError(AccuracyError):
    """Iterative solve stopped before reaching its tolerance.

    ``best_residual`` holds the smallest residual seen, so callers can decide
    whether a partially converged answer is usable.
    """

    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class GridResolutionError(AccuracyError):
    pass


class NoResonanceError(AccuracyError):
    pass


class BracketError(AccuracyError):
    pass
