"""Exception classes that map onto the CLI's exit codes.

PreconditionError (exit 2): a command or operation was invoked before its
prerequisites existed, or with arguments that cannot be satisfied.

NumericError (exit 3): a numeric failure such as a singular scale factor,
an unstable filter design, or non-finite values produced by training.

Plain OSError maps to exit 4 (I/O).
"""


class PreconditionError(RuntimeError):
    """A prerequisite artifact or condition is missing."""


class NumericError(ArithmeticError):
    """A numeric singularity, instability, or non-finite result."""
