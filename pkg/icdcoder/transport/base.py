"""
Model client contract.

Generation, token log-probabilities and embeddings are reached through the
`ModelClient` protocol so the judging and deduplication stages do not care
whether a remote endpoint or the deterministic mock is behind it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np

from icdcoder.domain.errors import EmptySequence, ValidationError


@dataclass(frozen=True)
class GenerationRequest:
    """
    One completion request.

    Parameters
    ----------
    prompt
        Prompt text.
    max_tokens
        Upper bound on generated tokens (>= 1).
    temperature
        Sampling temperature (>= 0).
    stop
        Optional stop sequences.
    """

    prompt: str
    max_tokens: int = 256
    temperature: float = 0.0
    stop: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValidationError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.stop is not None:
            object.__setattr__(self, "stop", tuple(self.stop))


@dataclass(frozen=True)
class TokenLogProbs:
    """
    Per-token natural-log probabilities of a text under a model.

    Raises
    ------
    ValidationError
        If lengths differ or a log-probability is positive.
    """

    tokens: Tuple[str, ...]
    logprobs: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "logprobs", tuple(float(x) for x in self.logprobs))
        if len(self.tokens) != len(self.logprobs):
            raise ValidationError("tokens and logprobs must have the same length")
        if any(x > 0 or math.isnan(x) for x in self.logprobs):
            raise ValidationError("log-probabilities must be <= 0")

    def __len__(self) -> int:
        return len(self.tokens)

    def concat(self, other: "TokenLogProbs") -> "TokenLogProbs":
        return TokenLogProbs(self.tokens + other.tokens, self.logprobs + other.logprobs)


@dataclass(frozen=True)
class EmbeddingVector:
    """
    Fixed-dimension embedding, unit-normalized by the clients.
    """

    values: Tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def normalized(cls, values: Sequence[float]) -> "EmbeddingVector":
        """
        Build a unit-length vector.

        Raises
        ------
        ValidationError
            If the vector is empty or has zero norm.
        """
        arr = np.asarray(values, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if arr.size == 0 or norm == 0.0 or not math.isfinite(norm):
            raise ValidationError("cannot normalize an empty or zero vector")
        return cls(values=tuple((arr / norm).tolist()))


def perplexity(lp: TokenLogProbs) -> float:
    """
    Perplexity ``exp(-mean(logprobs))``.

    Raises
    ------
    EmptySequence
        If `lp` has no tokens.
    """
    if len(lp) == 0:
        raise EmptySequence("perplexity of an empty sequence is undefined")
    return float(np.exp(-np.mean(np.asarray(lp.logprobs, dtype=np.float64))))


class ModelClient(Protocol):
    """
    Protocol interface for model access.

    Implementations must be safe to call from several threads at once.

    Methods
    -------
    generate(request)
        Completion text.
    token_logprobs(text)
        Per-token log-probabilities of `text`.
    embed(text)
        Unit-length embedding of `text`.
    describe()
        Short identifier recorded in reports.
    """

    def generate(self, request: GenerationRequest) -> str:
        ...

    def token_logprobs(self, text: str) -> TokenLogProbs:
        ...

    def embed(self, text: str) -> EmbeddingVector:
        ...

    def describe(self) -> str:
        ...
