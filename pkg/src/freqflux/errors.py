"""Exception hierarchy.

Every error raised by the package derives from :class:`FreqFluxError`. The
CLI maps the three families below onto exit codes.
"""


class FreqFluxError(Exception):
    """Base class for all package errors."""


class InputError(FreqFluxError, ValueError):
    """Malformed case, scenario or sample data."""


class NumericalError(FreqFluxError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class DisconnectedNetwork(InputError):
    pass


class InvalidBranch(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class TooFewSamples(InputError):
    pass


class DegenerateSample(InputError):
    pass


class InsufficientSources(InputError):
    pass


class MissingDistribution(InputError):
    pass


class SingularMatrix(NumericalError):
    """Raised when a matrix that must be inverted is (numerically) singular.

    Attributes
    ----------
    which : str
        Name of the offending matrix (``"C"``, ``"F"``, ``"B_bus"``, ...).
    condition : float
        1-norm condition estimate at the time of failure (``inf`` if exact).
    """

    def __init__(self, which, condition=float("inf"), hint=""):
        self.which = which
        self.condition = condition
        self.hint = hint
        msg = f"SingularMatrix({which}): condition estimate {condition:.3e}"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)


class NoConvergence(NumericalError):
    def __init__(self, iterations, mismatch):
        self.iterations = iterations
        self.mismatch = mismatch
        super().__init__(
            f"no convergence after {iterations} iterations (max mismatch {mismatch:.3e} pu)"
        )


class SingularJacobian(NumericalError):
    pass


class UnstableStep(NumericalError):
    pass


class StepRejected(NumericalError):
    pass
