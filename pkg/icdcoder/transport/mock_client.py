"""
Deterministic offline model client.

Every output is a pure function of ``(seed, input)`` built from SHA-256
digests, so results are stable across runs, threads and platforms. The
mock is good enough to drive a whole pipeline offline:

- generations are short pseudo-sentences; prompts that present two
  responses (``Response A`` / ``Response B``) get a judge-style verdict
- token log-probabilities lie in ``[-5, 0)`` and depend only on the token
- embeddings hash character trigrams into signed buckets, so texts that
  share most of their characters get strongly correlated vectors
"""

from __future__ import annotations

import hashlib
from typing import List

import numpy as np

from icdcoder.domain.errors import EmptySequence
from icdcoder.transport.base import EmbeddingVector, GenerationRequest, TokenLogProbs

_VOCAB = (
    "patient", "chronic", "acute", "disease", "disorder", "hypertension", "diabetes",
    "mellitus", "type", "essential", "renal", "failure", "infection", "fracture",
    "neoplasm", "malignant", "heart", "kidney", "without", "with", "complication",
    "unspecified", "condition", "stage", "primary", "secondary", "syndrome", "of",
)

_JUDGE_REPLIES = ("A", "B", "Both responses describe the code adequately.")


def _digest(*parts: object) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def _unit(*parts: object) -> float:
    """Uniform number in [0, 1) derived from the parts."""
    return int.from_bytes(_digest(*parts)[:8], "big") / 2.0 ** 64


class MockModelClient:
    """
    Pure, lock-free stand-in for a remote model.

    Parameters
    ----------
    seed
        Seed mixed into every digest; different seeds give different outputs.
    embed_dim
        Embedding dimension.
    name
        Label used by `describe()`.
    """

    def __init__(self, seed: int = 0, embed_dim: int = 384, name: str = "mock"):
        self.seed = int(seed)
        self.embed_dim = int(embed_dim)
        self.name = name

    def describe(self) -> str:
        return f"{self.name}(seed={self.seed})"

    def generate(self, request: GenerationRequest) -> str:
        prompt = request.prompt
        if "Response A" in prompt and "Response B" in prompt:
            idx = int(_unit(self.seed, "judge", prompt) * len(_JUDGE_REPLIES))
            return _JUDGE_REPLIES[idx]

        rng = np.random.default_rng(int.from_bytes(_digest(self.seed, "gen", prompt)[:8], "big"))
        n_words = int(min(request.max_tokens, 8 + rng.integers(0, 17)))
        words = [_VOCAB[i] for i in rng.integers(0, len(_VOCAB), size=n_words)]
        return " ".join(words).capitalize() + "."

    def token_logprobs(self, text: str) -> TokenLogProbs:
        tokens = text.split()
        if not tokens:
            raise EmptySequence("cannot score empty text")
        # -5 * (1 - u) lies in [-5, 0) because u is in [0, 1)
        lps = [-5.0 * (1.0 - _unit(self.seed, "tok", t)) for t in tokens]
        return TokenLogProbs(tuple(tokens), tuple(lps))

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptySequence("cannot embed empty text")
        s = " " + " ".join(text.lower().split()) + " "
        grams: List[str] = [s[i : i + 3] for i in range(len(s) - 2)] or [s]

        vec = np.zeros(self.embed_dim, dtype=np.float64)
        for g in grams:
            d = _digest(self.seed, "emb", g)
            bucket = int.from_bytes(d[:4], "big") % self.embed_dim
            vec[bucket] += 1.0 if d[4] & 1 else -1.0

        if not np.any(vec):
            d = _digest(self.seed, "emb-fallback", text)
            vec[int.from_bytes(d[:4], "big") % self.embed_dim] = 1.0
        return EmbeddingVector.normalized(vec)
