"""
Unit tests for icdcoder.core.config.yaml_config and icdcoder.bootstrap.

These tests validate:
- the shipped config.yaml loads with the documented defaults
- path resolution (explicit path, ICDCODER_CONFIG, built-in defaults)
- environment overrides for endpoints and secrets, and secret redaction
- range validation and the unquoted split-ratio guard
- command-line overrides layered over the file
"""

from __future__ import annotations

from pathlib import Path

import pytest

from icdcoder.bootstrap import CliOverrides, apply_overrides, build_pipeline
from icdcoder.core.config.yaml_config import ENV_API_KEY, ENV_CONFIG, ENV_EMBED_ENDPOINT, ENV_ENDPOINT, load_pipeline_config
from icdcoder.domain.errors import ConfigError

REPO_CONFIG = Path(__file__).resolve().parents[2] / "config.yaml"


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    # setenv first so teardown also drops values loaded from .env files
    for name in (ENV_CONFIG, ENV_ENDPOINT, ENV_API_KEY, ENV_EMBED_ENDPOINT):
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)


def _write(tmp_path: Path, text: str) -> str:
    p = tmp_path / "config.yaml"
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_shipped_config_loads() -> None:
    cfg = load_pipeline_config(str(REPO_CONFIG), use_env=False)
    assert [c.name for c in cfg.judge.candidates] == ["pubmedgpt2", "llama2", "mistral", "medllama2", "biomistral"]
    assert [c.client.seed for c in cfg.judge.candidates] == [1, 2, 3, 4, 5]
    assert cfg.judge.client.seed == 101
    assert cfg.judge.probe_count == 50
    assert cfg.dedup.similarity_threshold == 0.9
    assert cfg.dedup.ppl_margin == 0.05
    assert cfg.split.ratios == "8:1:1"
    assert cfg.prompt.budget == 2048
    assert cfg.evaluation.top_k == 50
    assert cfg.paths.code_table is None
    assert cfg.source == str(REPO_CONFIG.resolve())


def test_candidates_inherit_shared_client_settings(tmp_path) -> None:
    cfg = load_pipeline_config(
        _write(tmp_path, "client:\n  kind: mock\n  embed_dim: 16\njudge:\n  candidates:\n    - name: a\n      seed: 3\n"),
        use_env=False,
    )
    assert cfg.judge.candidates[0].client.embed_dim == 16
    assert cfg.judge.candidates[0].client.seed == 3
    assert cfg.judge.client.embed_dim == 16


def test_missing_explicit_file(tmp_path) -> None:
    with pytest.raises(FileNotFoundError):
        load_pipeline_config(str(tmp_path / "nope.yaml"))


def test_defaults_without_any_file(tmp_path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    cfg = load_pipeline_config()
    assert cfg.source is None
    assert cfg.runtime.parallelism == 1
    assert cfg.judge.candidates == ()


def test_env_var_selects_config(tmp_path, monkeypatch) -> None:
    monkeypatch.setenv(ENV_CONFIG, _write(tmp_path, "runtime:\n  parallelism: 3\n"))
    assert load_pipeline_config().runtime.parallelism == 3


def test_environment_overrides_endpoints_and_secret(tmp_path, monkeypatch) -> None:
    path = _write(
        tmp_path,
        "client:\n  kind: http\n  base_url: http://file-host\njudge:\n  client:\n    base_url: http://judge-host\n",
    )
    monkeypatch.setenv(ENV_ENDPOINT, "http://env-host")
    monkeypatch.setenv(ENV_EMBED_ENDPOINT, "http://embed-host")
    monkeypatch.setenv(ENV_API_KEY, "s3cret")
    cfg = load_pipeline_config(path)
    assert cfg.client.base_url == "http://env-host"
    assert cfg.client.embed_url == "http://embed-host"
    assert cfg.judge.client.base_url == "http://judge-host"
    assert cfg.client.api_key == "s3cret"
    assert cfg.to_dict()["client"]["api_key"] == "***"
    assert "s3cret" not in str(cfg.to_dict())


def test_dotenv_next_to_config(tmp_path) -> None:
    path = _write(tmp_path, "client:\n  kind: http\n")
    (tmp_path / ".env").write_text(f"{ENV_ENDPOINT}=http://dotenv-host\n", encoding="utf-8")
    assert load_pipeline_config(path).client.base_url == "http://dotenv-host"


def test_config_hash_is_stable_and_sensitive(tmp_path) -> None:
    a = load_pipeline_config(_write(tmp_path, "runtime:\n  seed: 1\n"), use_env=False)
    b = load_pipeline_config(_write(tmp_path, "runtime:\n  seed: 1\n"), use_env=False)
    c = load_pipeline_config(_write(tmp_path, "runtime:\n  seed: 2\n"), use_env=False)
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert len(a.config_hash) == 64


@pytest.mark.parametrize(
    "text",
    [
        "split:\n  ratios: 8:1:1\n",
        "split:\n  ratios: \"8:1\"\n",
        "dedup:\n  similarity_threshold: 1.5\n",
        "dedup:\n  index: lsh\n",
        "client:\n  kind: grpc\n",
        "client:\n  kind: http\n",
        "ranking:\n  tie_policy: coin\n",
        "prompt:\n  budget: 10\n",
        "evaluation:\n  top_k: 0\n",
        "judge:\n  candidates:\n    - seed: 1\n",
        "judge:\n  candidates:\n    - name: a\n    - name: a\n",
        "runtime:\n  parallelism: two\n",
        "dedup: [1, 2]\n",
        "- not a mapping\n",
        "client: {kind: mock\n",
    ],
)
def test_invalid_configs_raise_config_error(tmp_path, text: str) -> None:
    with pytest.raises(ConfigError):
        load_pipeline_config(_write(tmp_path, text), use_env=False)


def test_cli_overrides(tmp_path) -> None:
    cfg = load_pipeline_config(str(REPO_CONFIG), use_env=False)
    out = apply_overrides(
        cfg,
        CliOverrides(seed=9, parallelism=2, allow_missing=True, log_level="debug", judge_endpoint="http://judge:9"),
    )
    assert (out.runtime.seed, out.split.seed, out.runtime.parallelism) == (9, 9, 2)
    assert out.runtime.log_level == "DEBUG"
    assert out.evaluation.allow_missing is True
    assert (out.judge.client.kind, out.judge.client.base_url) == ("http", "http://judge:9")
    assert apply_overrides(cfg, CliOverrides()) == cfg
    with pytest.raises(ConfigError):
        apply_overrides(cfg, CliOverrides(parallelism=0))


def test_build_pipeline_wires_service() -> None:
    svc = build_pipeline(str(REPO_CONFIG), CliOverrides(parallelism=1))
    assert svc.parallelism == 1
    assert svc.config.judge.probe_count == 50
