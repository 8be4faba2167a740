"""Exception hierarchy shared by all ionkin modules."""


class IonkinError(Exception):
    """Base class for all package errors."""


class ConfigError(IonkinError, ValueError):
    """Invalid configuration, table or spec."""


class DomainError(IonkinError, ValueError):
    """Argument outside the domain of an operation."""


class StateError(IonkinError, RuntimeError):
    """Operation not allowed in the object's current state."""


class InputDataError(IonkinError, ValueError):
    """Malformed or inconsistent user-supplied data."""


class IntegrationError(IonkinError, RuntimeError):
    """The rate-equation integrator could not complete a record."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IntegrityError(IonkinError, RuntimeError):
    """Population invariants (conservation, positivity) were breached."""


class EnsembleError(IonkinError, RuntimeError):
    """Too many realizations of an ensemble failed."""

    def __init__(self, message, failed_indices=()):
        super().__init__(message)
        self.failed_indices = tuple(failed_indices)
