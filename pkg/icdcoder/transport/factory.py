from __future__ import annotations

from icdcoder.domain.errors import ConfigError
from icdcoder.transport.base import ModelClient
from icdcoder.transport.client_config import ModelClientConfig
from icdcoder.transport.http_client import HttpModelClient
from icdcoder.transport.mock_client import MockModelClient


def build_client(cfg: ModelClientConfig, name: str = "mock") -> ModelClient:
    """
    Instantiate the client selected by ``cfg.kind``.

    Raises
    ------
    ConfigError
        For an unknown kind.
    """
    if cfg.kind == "mock":
        return MockModelClient(seed=cfg.seed, embed_dim=cfg.embed_dim, name=name)
    if cfg.kind == "http":
        return HttpModelClient(cfg)
    raise ConfigError(f"unknown client kind: {cfg.kind!r}")
