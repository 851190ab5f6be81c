"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ValidationError -> 2,
ResourceLimitError -> 3, ScorerConnectionError -> 4.
"""


class TokLatError(Exception):
    pass


class ValidationError(TokLatError, ValueError):
    """Bad input: malformed vocabulary file, unrepresentable byte, invalid ids,
    out-of-range rank, oversized sample request, ..."""


class ResourceLimitError(TokLatError, RuntimeError):
    """A caller-supplied limit was exceeded (e.g. enumeration of too many paths)."""


class ScorerError(TokLatError, RuntimeError):
    """Failure inside a scorer implementation."""


class ScorerProtocolError(ScorerError):
    """A remote scorer answered, but the response violates the wire protocol."""


class ScorerConnectionError(ScorerError):
    """A remote scorer could not be reached (after retries)."""
