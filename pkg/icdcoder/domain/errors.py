"""
Exception hierarchy.

Every error raised on purpose by the toolkit derives from `IcdCoderError` so
callers (and the CLI exit-code mapping) can tell validation problems, ranking
failures and model transport failures apart:

- `ValidationError`   -> bad input data or arguments (exit code 1)
- `ConfigError`       -> unusable configuration (exit code 1)
- `RankingError`      -> the ranking problem has no unique answer (exit code 1)
- `ModelClientError`  -> model endpoint failures (exit code 2)
"""

from __future__ import annotations

from typing import Optional


class IcdCoderError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(IcdCoderError):
    """Configuration file is missing, malformed or out of range."""


class ValidationError(IcdCoderError):
    """Input data or arguments violate a documented precondition."""


class CodeRejected(ValidationError):
    """
    A raw code string could not be turned into an `IcdCode`.

    Parameters
    ----------
    raw
        The offending input string.
    reason
        One of ``"empty"``, ``"malformed"``, ``"not_in_table"``.
    """

    def __init__(self, raw: str, reason: str):
        super().__init__(f"code {raw!r} rejected: {reason}")
        self.raw = raw
        self.reason = reason


class InvalidPattern(ValidationError):
    """A stripping rule at `index` is not a valid regular expression."""

    def __init__(self, index: int, pattern: str, cause: str = ""):
        super().__init__(f"rule #{index} is not a valid pattern: {pattern!r} ({cause})")
        self.index = index
        self.pattern = pattern


class EmptyCorpus(ValidationError):
    """An operation that needs at least one record received none."""


class InvalidRatios(ValidationError):
    """Split ratios are out of range or do not sum to one."""


class InvalidScope(ValidationError):
    """An evaluation scope is not usable (e.g. top_k < 1)."""


class AlignmentError(ValidationError):
    """Two sequences that must correspond one-to-one do not."""


class UnknownModel(ValidationError):
    """A model name is not part of the known model set."""

    def __init__(self, name: str):
        super().__init__(f"unknown model: {name!r}")
        self.name = name


class EmptyAlternativeSet(ValidationError):
    """A selection probability was requested over an empty set."""


class DuplicateObservation(ValidationError):
    """Two matchup observations share the same key but disagree."""


class MissingPrediction(ValidationError):
    """A gold record has no prediction and missing predictions are not allowed."""

    def __init__(self, record_id: str):
        super().__init__(f"no prediction for record {record_id!r}")
        self.record_id = record_id


class BudgetTooSmall(ValidationError):
    """The token budget cannot hold the prompt header plus any diagnosis text."""


class DegenerateInput(ValidationError):
    """A statistic is undefined for the given input (e.g. zero variance)."""


class DimensionMismatch(ValidationError):
    """Vectors have a different dimension than expected."""


class EmptyInput(ValidationError):
    """An index or vector operation received no data."""


class EmptySequence(ValidationError):
    """A token sequence is empty."""


class InputFormatError(ValidationError):
    """
    A line of an input file could not be decoded.

    Parameters
    ----------
    path
        File being read.
    line_no
        1-based line number.
    message
        Underlying problem.
    """

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class RankingError(IcdCoderError):
    """Strength estimation failed."""


class NotIrreducible(RankingError):
    """The win graph is not strongly connected, so strengths are not identifiable."""


class NumericalFailure(RankingError):
    """The stationary solve did not satisfy the balance equations."""


class ModelClientError(IcdCoderError):
    """Base class for model endpoint failures."""


class TransportError(ModelClientError):
    """Request failed after all retries."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class ModelTimeout(ModelClientError):
    """Request timed out after all retries."""


class MalformedResponse(ModelClientError):
    """Endpoint answered with a body that does not follow the wire contract."""


class UnsupportedOperation(ModelClientError):
    """Endpoint does not offer the requested capability (e.g. logprobs)."""


class TournamentAborted(ModelClientError):
    """More than half of the matchups in a tournament failed."""
