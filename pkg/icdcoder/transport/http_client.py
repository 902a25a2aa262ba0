from __future__ import annotations

import logging
import time
from typing import Any, Callable, Dict, List, Optional

import requests

from icdcoder.domain.errors import (
    DimensionMismatch,
    EmptySequence,
    MalformedResponse,
    ModelTimeout,
    TransportError,
    UnsupportedOperation,
    ValidationError,
)
from icdcoder.transport.base import EmbeddingVector, GenerationRequest, TokenLogProbs
from icdcoder.transport.client_config import ModelClientConfig

logger = logging.getLogger(__name__)

_RETRY_STATUS = {429, 500, 502, 503, 504}


class HttpModelClient:
    """
    Model client that talks to a completions-style HTTP JSON endpoint.

    Wire contract
    -------------
    - completion: ``POST {base_url}{completions_path}`` with
      ``{"prompt", "max_tokens", "temperature", "stop"?, "model"?}``;
      response ``{"text": str}`` or ``{"choices": [{"text": str}]}``.
    - logprobs: same endpoint with ``{"prompt": text, "max_tokens": 0,
      "echo": true, "logprobs": 0}``; response carries ``tokens`` and
      ``token_logprobs`` at the top level or under ``choices[0].logprobs``.
    - embedding: ``POST {embed_url}{embed_path}`` with ``{"input": text}``;
      response ``{"embedding": [...]}`` or ``{"data": [{"embedding": [...]}]}``.

    Notes
    -----
    - Connection errors, timeouts, HTTP 429 and 5xx are retried up to
      ``cfg.retries`` extra times, sleeping ``backoff_s * 2**attempt`` between
      attempts. Other HTTP errors fail immediately.
    - The client holds no mutable state and can be shared across threads.

    Parameters
    ----------
    cfg
        Client configuration.
    sleep
        Sleep function used between retries (injectable for tests).
    """

    def __init__(self, cfg: ModelClientConfig, sleep: Callable[[float], None] = time.sleep):
        if not (cfg.base_url or cfg.embed_url):
            raise ValidationError("HTTP model client needs a base_url (MODEL_ENDPOINT) or embed_url (EMBED_ENDPOINT)")
        self._cfg = cfg
        self._sleep = sleep

    def describe(self) -> str:
        return f"http:{self._cfg.model or self._cfg.base_url}"

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._cfg.api_key:
            headers["Authorization"] = f"Bearer {self._cfg.api_key}"
        return headers

    def _post(self, url: str, body: Dict[str, Any]) -> Dict[str, Any]:
        attempts = self._cfg.retries + 1
        last: Optional[BaseException] = None
        for attempt in range(attempts):
            try:
                r = requests.post(
                    url,
                    json=body,
                    headers=self._headers(),
                    timeout=self._cfg.timeout_s,
                    verify=self._cfg.verify_tls,
                )
                if r.status_code in _RETRY_STATUS:
                    last = TransportError(f"HTTP {r.status_code} from {url}", status=r.status_code)
                else:
                    try:
                        r.raise_for_status()
                    except requests.HTTPError as e:
                        raise TransportError(f"HTTP {r.status_code} from {url}", status=r.status_code) from e
                    try:
                        data = r.json()
                    except ValueError as e:
                        raise MalformedResponse(f"non-JSON response from {url}") from e
                    if not isinstance(data, dict):
                        raise MalformedResponse(f"expected a JSON object from {url}")
                    return data
            except requests.Timeout as e:
                last = ModelTimeout(f"request to {url} timed out after {self._cfg.timeout_s}s")
                last.__cause__ = e
            except requests.ConnectionError as e:
                last = TransportError(f"connection to {url} failed: {e}")
                last.__cause__ = e
            except requests.RequestException as e:
                raise TransportError(f"request to {url} failed: {e}") from e

            if attempt < attempts - 1:
                delay = self._cfg.backoff_s * (2 ** attempt)
                logger.warning("attempt %d/%d to %s failed (%s); retrying in %.2fs", attempt + 1, attempts, url, last, delay)
                self._sleep(delay)

        logger.error("giving up on %s after %d attempts: %s", url, attempts, last)
        assert last is not None
        raise last

    def _completions_url(self) -> str:
        if not self._cfg.base_url:
            raise UnsupportedOperation("no completions endpoint configured (MODEL_ENDPOINT)")
        return self._cfg.base_url.rstrip("/") + self._cfg.completions_path

    def generate(self, request: GenerationRequest) -> str:
        """
        Return the completion text for `request`.

        Raises
        ------
        TransportError, ModelTimeout
            After all retries.
        MalformedResponse
            If the response carries no text.
        """
        body: Dict[str, Any] = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if request.stop:
            body["stop"] = list(request.stop)
        if self._cfg.model:
            body["model"] = self._cfg.model

        data = self._post(self._completions_url(), body)
        if isinstance(data.get("text"), str):
            return data["text"]
        try:
            text = data["choices"][0]["text"]
        except (KeyError, IndexError, TypeError) as e:
            raise MalformedResponse("completion response has no text") from e
        if not isinstance(text, str):
            raise MalformedResponse("completion text is not a string")
        return text

    def token_logprobs(self, text: str) -> TokenLogProbs:
        """
        Score `text` token by token.

        Raises
        ------
        EmptySequence
            If `text` is empty.
        UnsupportedOperation
            If the endpoint does not return log-probabilities.
        """
        if not text:
            raise EmptySequence("cannot score empty text")
        body: Dict[str, Any] = {"prompt": text, "max_tokens": 0, "echo": True, "logprobs": 0}
        if self._cfg.model:
            body["model"] = self._cfg.model

        data = self._post(self._completions_url(), body)
        block: Any = data
        if "tokens" not in data:
            try:
                block = data["choices"][0]["logprobs"]
            except (KeyError, IndexError, TypeError):
                block = None
        if not isinstance(block, dict) or "tokens" not in block or "token_logprobs" not in block:
            raise UnsupportedOperation("endpoint did not return token log-probabilities")

        tokens: List[str] = []
        lps: List[float] = []
        for tok, lp in zip(block["tokens"], block["token_logprobs"]):
            if lp is None:
                continue  # first echoed token has no conditional probability
            tokens.append(str(tok))
            lps.append(min(float(lp), 0.0))
        if not tokens:
            raise MalformedResponse("endpoint returned no scored tokens")
        return TokenLogProbs(tuple(tokens), tuple(lps))

    def embed(self, text: str) -> EmbeddingVector:
        """
        Embed `text` and L2-normalize the result.

        Raises
        ------
        DimensionMismatch
            If the endpoint's dimension differs from ``cfg.embed_dim``.
        """
        if not text:
            raise EmptySequence("cannot embed empty text")
        base = (self._cfg.embed_url or self._cfg.base_url or "").rstrip("/")
        body: Dict[str, Any] = {"input": text}
        if self._cfg.model:
            body["model"] = self._cfg.model

        data = self._post(base + self._cfg.embed_path, body)
        values = data.get("embedding")
        if values is None:
            try:
                values = data["data"][0]["embedding"]
            except (KeyError, IndexError, TypeError) as e:
                raise MalformedResponse("embedding response has no vector") from e
        if not isinstance(values, list) or not values:
            raise MalformedResponse("embedding is not a non-empty list")
        if self._cfg.embed_dim and len(values) != self._cfg.embed_dim:
            raise DimensionMismatch(f"endpoint returned dim {len(values)}, expected {self._cfg.embed_dim}")
        try:
            return EmbeddingVector.normalized([float(v) for v in values])
        except (TypeError, ValueError, ValidationError) as e:
            raise MalformedResponse(f"embedding is not a usable vector: {e}") from e
