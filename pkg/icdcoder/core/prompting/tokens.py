"""
Token counting for prompt budgets.

A tokenizer only needs to count tokens and cut a text after its first ``n``
tokens. The default counts whitespace-separated tokens, which is deterministic
and model-agnostic; a model tokenizer can be plugged in through `Tokenizer`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Protocol

from icdcoder.domain.errors import ValidationError

DEFAULT_MAX_TOKENS = 2048
MIN_MAX_TOKENS = 64

_TOKEN = re.compile(r"\S+")


class Tokenizer(Protocol):
    def count(self, text: str) -> int:
        ...

    def truncate(self, text: str, n_tokens: int) -> str:
        """Keep the first `n_tokens` tokens of `text`."""
        ...


class WhitespaceTokenizer:
    """Counts runs of non-whitespace characters; cutting keeps the original spacing."""

    name = "whitespace"

    def count(self, text: str) -> int:
        return sum(1 for _ in _TOKEN.finditer(text))

    def truncate(self, text: str, n_tokens: int) -> str:
        if n_tokens <= 0:
            return ""
        end = 0
        for i, m in enumerate(_TOKEN.finditer(text)):
            if i == n_tokens:
                break
            end = m.end()
        else:
            return text
        return text[:end]


whitespace_tokenizer = WhitespaceTokenizer()


@dataclass(frozen=True)
class TokenBudget:
    """
    Upper bound on prompt length.

    Parameters
    ----------
    max_tokens
        Largest allowed token count of a rendered prompt (>= 64).
    tokenizer
        Counting function.
    """

    max_tokens: int = DEFAULT_MAX_TOKENS
    tokenizer: Tokenizer = field(default=whitespace_tokenizer, compare=False)

    def __post_init__(self) -> None:
        if self.max_tokens < MIN_MAX_TOKENS:
            raise ValidationError(f"max_tokens must be >= {MIN_MAX_TOKENS}, got {self.max_tokens}")

    def count(self, text: str) -> int:
        return self.tokenizer.count(text)

    def fits(self, text: str) -> bool:
        return self.count(text) <= self.max_tokens
