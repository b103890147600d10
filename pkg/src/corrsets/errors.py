"""Exception hierarchy shared across the package."""


class CorrsetsError(Exception):
    """Base class for all package errors."""


class ConfigError(CorrsetsError, ValueError):
    """Malformed or inconsistent experiment configuration."""


class InfeasibleError(CorrsetsError):
    """A synthesis problem has no solution for the given data."""


class NumericalError(CorrsetsError, ArithmeticError):
    """A numerical routine stalled, diverged or lost accuracy."""


class ConvergenceError(NumericalError):
    """An iteration that requires a stable matrix did not converge."""


class StageError(CorrsetsError):
    """Failure of one pipeline stage, tagged with the stage name.

    The original exception is kept in ``cause`` so callers (the CLI) can map
    it to an exit code.
    """

    def __init__(self, stage, cause, inputs_hash=None):
        self.stage = stage
        self.cause = cause
        self.inputs_hash = inputs_hash
        msg = f"stage '{stage}' failed: {cause}"
        if inputs_hash:
            msg += f" (inputs {inputs_hash[:12]})"
        super().__init__(msg)
