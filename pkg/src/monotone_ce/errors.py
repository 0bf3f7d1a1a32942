"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ``SpecError`` -> 2, ``NumericalError`` -> 3.
"""


class MonotoneCEError(Exception):
    """Base class for all package errors."""


class SpecError(MonotoneCEError, ValueError):
    """A design specification or configuration violates an invariant."""


class ConfigError(SpecError):
    """A configuration file could not be parsed or has unknown keys."""


class InfeasibleLevelError(SpecError):
    """The level condition target exceeds what the CE family can attain."""

    def __init__(self, target, supremum):
        self.target = target
        self.supremum = supremum
        super().__init__(
            f"level target {target:.6g} is not attainable; "
            f"the supremum of the level integral is {supremum:.6g}"
        )


class NumericalError(MonotoneCEError, RuntimeError):
    """A numerical routine failed (bracketing or convergence)."""


class BracketError(NumericalError):
    """No sign change inside the supplied root bracket."""


class ConvergenceError(NumericalError):
    """An iterative routine exhausted its iteration budget."""
