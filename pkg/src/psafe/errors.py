"""Exception hierarchy shared by all modules."""


class PsafeError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(PsafeError, ValueError):
    """Invalid parameters or mismatched dimensions."""


class PreconditionError(PsafeError, ValueError):
    """An operation was called on a state it does not accept (e.g. a point outside A)."""


class EllipticityError(PsafeError, ArithmeticError):
    """The diffusion matrix could not be factorized at a visited state."""
