"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalError` to exit code 2.
"""


class ValidationError(ValueError):
    """Bad input: malformed file, invalid parameter, size mismatch."""


class NumericalError(RuntimeError):
    """A numerical stage could not produce a trustworthy result."""


class ConvergenceError(NumericalError):
    """Power iteration failed, or the chain is not ergodic."""


class SingularSystemError(NumericalError):
    """The stationary linear system has no unique solution."""
