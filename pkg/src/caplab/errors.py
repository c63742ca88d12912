"""Exception hierarchy shared by all caplab engines."""


class CaplabError(Exception):
    """Base class for every error raised by caplab."""


class ArgumentError(CaplabError, ValueError):
    """Invalid argument: dimension mismatch, bad annulus, out-of-range parameter."""


class InvalidFieldError(CaplabError):
    """A coefficient field violated symmetry or non-negative definiteness on a probe."""


class UnsupportedExponentError(CaplabError):
    """Capacity exponent p outside the supported range (p >= 1.05)."""


class InsufficientDataError(CaplabError):
    """Too few usable points for a fit or a liminf estimate."""


class DomainError(CaplabError):
    """Non-positive value where a logarithm or power is required."""


class ParameterRangeError(CaplabError, ValueError):
    """Solution-pair parameters outside the admissible range of the chosen family."""


class CalibrationError(CaplabError):
    """No admissible free constant found in the search range.

    Carries the best margin achieved so the caller can report how far
    the search ended from a certificate.
    """

    def __init__(self, message, best_margin=None, best_alpha=None):
        super().__init__(message)
        self.best_margin = best_margin
        self.best_alpha = best_alpha


class UnsupportedError(CaplabError):
    """Requested computation outside the engine's scope (e.g. off-center quadrature in n > 3)."""


class ConfigError(CaplabError):
    """Malformed run configuration: unknown keys, missing values, parse failures."""
