"""Grid-free computation of probabilistic safety regions of SDEs."""

from psafe.errors import (
    ConfigurationError,
    EllipticityError,
    PreconditionError,
    PsafeError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "EllipticityError",
    "PreconditionError",
    "PsafeError",
    "__version__",
]
