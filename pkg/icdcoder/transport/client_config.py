from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class ModelClientConfig:
    """
    Settings for one model client (candidate, judge or embedder).

    Parameters
    ----------
    kind
        ``"http"`` for a completions-style endpoint, ``"mock"`` for the
        deterministic offline client.
    seed
        Mock seed; ignored by the HTTP client.
    base_url
        Endpoint base URL for completions (``MODEL_ENDPOINT``).
    completions_path
        Path appended to `base_url` for completion and logprob requests.
    embed_url
        Base URL for embeddings (``EMBED_ENDPOINT``); falls back to `base_url`.
    embed_path
        Path appended to `embed_url`.
    model
        Optional model name sent in the request body.
    api_key
        Optional bearer token (``MODEL_API_KEY``).
    timeout_s
        Per-request timeout in seconds.
    retries
        Extra attempts after the first one for transient failures.
    backoff_s
        Base delay; attempt ``k`` waits ``backoff_s * 2**k``.
    embed_dim
        Expected embedding dimension (also the mock's dimension).
    verify_tls
        Whether to verify TLS certificates.
    """

    kind: str = "mock"
    seed: int = 0
    base_url: Optional[str] = None
    completions_path: str = "/v1/completions"
    embed_url: Optional[str] = None
    embed_path: str = "/v1/embeddings"
    model: Optional[str] = None
    api_key: Optional[str] = None
    timeout_s: float = 60.0
    retries: int = 3
    backoff_s: float = 0.5
    embed_dim: int = 384
    verify_tls: bool = True
