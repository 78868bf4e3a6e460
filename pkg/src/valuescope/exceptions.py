"""Exception and warning types shared across the package."""


class ValueScopeError(Exception):
    """Base class for all package errors."""


class InputError(ValueScopeError):
    """Unreadable or unusable input data."""


class ConfigError(ValueScopeError):
    """Invalid parameters or configuration."""


class MissingArtifactError(ValueScopeError):
    """A stage was asked to run before the stage it depends on."""


class BindingError(ValueScopeError):
    """A prompt template was rendered without all of its slots bound."""


class ParseError(ValueScopeError):
    """A model response did not follow the expected answer format."""


class TransportError(ValueScopeError):
    """A remote request failed for good (retries exhausted)."""

    def __init__(self, message, last_error=None, attempts=0):
        super().__init__(message)
        self.last_error = last_error
        self.attempts = attempts


class TransientError(ValueScopeError):
    """Retryable transport failure (timeouts, rate limits, 5xx)."""


class AuthenticationError(ValueScopeError):
    """Non-retryable credential failure."""


class PipelineOrderError(ValueScopeError):
    """A filter ran before the scores it depends on were computed."""


class EmptyCurveError(ValueScopeError):
    """No reliable bin survived curve construction."""


class SingularDesignError(ValueScopeError):
    """Regression design matrix is rank deficient."""


class InsufficientDataError(ValueScopeError):
    """Too few qualifying observations for the requested statistic."""


class DegenerateWarning(RuntimeWarning):
    """A statistic is undefined for the given input (e.g. zero variance)."""
