"""Exception hierarchy shared across the package.

``ValidationError`` covers malformed inputs (case files, weight files,
mismatched layouts); ``NumericalError`` covers failures of the numerical
machinery (divergence, singular systems, refused certifications).  The CLI
maps the two branches to exit codes 2 and 3.
"""


class PinnsimError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(PinnsimError):
    """Malformed or inconsistent input data."""


class NumericalError(PinnsimError):
    """A numerical procedure failed or refused to certify its result."""


class ModelError(NumericalError):
    """Component model evaluated outside its admissible parameter set."""


class DomainError(NumericalError):
    """Query outside the trained/valid domain (e.g. dt beyond dt_max)."""


class ProfileError(NumericalError):
    """Voltage profile violated positivity at a query point."""


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget."""
