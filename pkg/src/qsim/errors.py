"""Exception and warning types raised across the package."""


class QsimError(Exception):
    """Base class for all package errors."""


class KindMismatch(QsimError, ValueError):
    """Operation applied to a quantum object of the wrong kind or shape."""


class DimsMismatch(QsimError, ValueError):
    """Subsystem dimensions of the operands do not agree."""


class InvalidSubsystem(QsimError, ValueError):
    """Subsystem index is duplicated, unsorted, or out of range."""


class InvalidDimension(QsimError, ValueError):
    pass


class InvalidIndex(QsimError, IndexError):
    pass


class InvalidGrid(QsimError, ValueError):
    pass


class TooLarge(QsimError, ValueError):
    pass


class IntegrationFailure(QsimError, RuntimeError):
    """The ODE integrator could not reach the requested time.

    Attributes
    ----------
    t_last : float
        Last time at which the state was known to be accurate.
    """

    def __init__(self, message, t_last=None):
        super().__init__(message)
        self.t_last = t_last


class EnsembleFailure(QsimError, RuntimeError):
    """Every trajectory of an ensemble failed."""


class SteadyStateFailure(QsimError, RuntimeError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DfdOverflow(QsimError, RuntimeError):
    """Dynamical Fock dimension would exceed the configured maximum."""


class DsfAccuracyWarning(UserWarning):
    """The shifted Fock basis is too small to hold the fluctuations."""
