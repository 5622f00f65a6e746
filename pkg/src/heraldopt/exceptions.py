"""Exception types shared across the package."""


class HeraldoptError(Exception):
    """Base class for errors raised by heraldopt."""


class ValidationError(HeraldoptError):
    """Input data violates a documented invariant (bad matrix, bad file, ...)."""


class ImpossiblePostselectionError(HeraldoptError):
    """The requested ancilla pattern can never be observed (success probability 0)."""


class UndefinedOutputStateError(ImpossiblePostselectionError):
    """The conditional output state is undefined because the success probability is 0."""


class BootstrapError(HeraldoptError):
    """Multi-start bootstrap exhausted its restart budget without meeting the target."""

    def __init__(self, message, best_params=None, best_fidelity=None, best_success=None):
        super().__init__(message)
        self.best_params = best_params
        self.best_fidelity = best_fidelity
        self.best_success = best_success
