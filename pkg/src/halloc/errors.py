"""Exception hierarchy shared across the toolkit."""


class HallocError(Exception):
    """Base class for all toolkit errors."""


class DataValidationError(HallocError):
    """A dataset record or domain value violates an invariant."""


class TemplateError(HallocError):
    """Unknown template id or a binding set that does not match it."""


class ParseError(HallocError):
    """Model output does not follow the expected format."""


class GatewayError(HallocError):
    """Completion could not be obtained."""


class CacheMissError(GatewayError):
    """Replay mode was asked for a request that is not in the cache."""


class ProviderError(GatewayError):
    """Transport-level failure talking to a provider."""


class ProviderTimeout(ProviderError):
    """Provider did not answer in time. Retryable."""


class ProviderRateLimit(ProviderError):
    """Provider throttled the request. Retryable."""


class JudgeMatchError(HallocError):
    """Judge output stayed unparseable after the retry."""


class CurationError(HallocError):
    """Review session is in a state that blocks the requested operation."""
