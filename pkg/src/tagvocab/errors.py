"""Exception types shared across the package.

Each maps to one CLI exit code class: ConfigError is a usage problem (1),
ParseError is an input/data problem (2), the rest are analysis
preconditions that the input failed to meet (3).
"""


class TagvocabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TagvocabError):
    """Invalid parameter combination (bad flag value, non-normalizable law)."""


class ParseError(TagvocabError):
    """A malformed input line. Carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class UnsortedInputError(TagvocabError):
    """Timestamps decreased where sorted input was required."""


class EmptyStreamError(TagvocabError):
    """An operation that needs at least one record got none."""


class InsufficientDataError(TagvocabError):
    """Too little data for a fit (message says which precondition failed)."""


class UndefinedExponentError(TagvocabError):
    """Exponent requested for a curve with tau_max < 2."""


class FitConvergenceError(TagvocabError):
    """Nonlinear fit did not converge; carries moment-based fallbacks."""

    def __init__(self, message: str, fallback_mean: float, fallback_sigma: float,
                 fallback_amplitude: float):
        self.fallback_mean = fallback_mean
        self.fallback_sigma = fallback_sigma
        self.fallback_amplitude = fallback_amplitude
        super().__init__(message)
