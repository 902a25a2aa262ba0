from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml
from dotenv import load_dotenv

from icdcoder.domain.errors import ConfigError, InvalidRatios
from icdcoder.domain.models import SplitRatios
from icdcoder.transport.client_config import ModelClientConfig

ENV_CONFIG = "ICDCODER_CONFIG"
ENV_ENDPOINT = "MODEL_ENDPOINT"
ENV_API_KEY = "MODEL_API_KEY"
ENV_EMBED_ENDPOINT = "EMBED_ENDPOINT"


@dataclass(frozen=True)
class CandidateConfig:
    """One candidate model of the judging tournament."""
    name: str
    client: ModelClientConfig


@dataclass(frozen=True)
class JudgeConfig:
    """Tournament settings: judge client, candidates, probes and decoding."""
    client: ModelClientConfig = field(default_factory=ModelClientConfig)
    candidates: Tuple[CandidateConfig, ...] = ()
    probe_count: int = 50
    probes_file: Optional[str] = None
    order_policy: str = "fixed"
    max_tokens: int = 256
    temperature: float = 0.0
    candidate_template: Optional[str] = None
    judge_template: Optional[str] = None


@dataclass(frozen=True)
class RankingConfig:
    """Strength estimation settings."""
    tie_policy: str = "half"
    tol: float = 1e-9
    max_iter: int = 100
    dampen: float = 0.0


@dataclass(frozen=True)
class DedupConfig:
    """Redundancy-aware sampling thresholds."""
    similarity_threshold: float = 0.9
    ppl_margin: float = 0.05
    index: str = "exact"


@dataclass(frozen=True)
class CleanConfig:
    """Extra stripping rules appended to the built-in ones."""
    strip_rules: Tuple[str, ...] = ()
    use_default_rules: bool = True


@dataclass(frozen=True)
class SplitConfig:
    ratios: str = "8:1:1"
    seed: int = 0


@dataclass(frozen=True)
class PromptConfig:
    """Prompt rendering settings."""
    mode: str = "universal"
    sections: str = "dd"
    budget: int = 2048
    instruction: Optional[str] = None


@dataclass(frozen=True)
class EvaluationConfig:
    top_k: int = 50
    allow_missing: bool = False


@dataclass(frozen=True)
class PathsConfig:
    """Optional input files referenced by several subcommands."""
    code_table: Optional[str] = None
    frequency_source: Optional[str] = None


@dataclass(frozen=True)
class RuntimeConfig:
    parallelism: int = 1
    seed: int = 0
    log_level: str = "INFO"


@dataclass(frozen=True)
class PipelineConfig:
    """
    Root pipeline configuration loaded from YAML.

    This is the single source of truth for tunable values; CLI flags override
    it and environment variables override endpoints and secrets only.
    """
    client: ModelClientConfig = field(default_factory=ModelClientConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    clean: CleanConfig = field(default_factory=CleanConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    prompt: PromptConfig = field(default_factory=PromptConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)
    source: Optional[str] = field(default=None, compare=False)

    def to_dict(self, redact: bool = True) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("source", None)
        if redact:
            _redact(data)
        return data

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the resolved config (secrets redacted)."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _redact(obj: Any) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k == "api_key" and v:
                obj[k] = "***"
            else:
                _redact(v)
    elif isinstance(obj, list):
        for v in obj:
            _redact(v)


def _read_yaml(path: Path) -> Dict[str, Any]:
    with path.open("r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a YAML mapping at the root")
    return data


def _resolve_default_config_path() -> Optional[Path]:
    """
    Resolve config.yaml location.

    Priority:
    1) ICDCODER_CONFIG env var if provided
    2) ./config.yaml in current working directory, if present
    """
    env = os.getenv(ENV_CONFIG)
    if env:
        return Path(env).expanduser().resolve()
    candidate = Path("config.yaml").resolve()
    return candidate if candidate.exists() else None


def _group(raw: Mapping[str, Any], name: str) -> Dict[str, Any]:
    g = raw.get(name) or {}
    if not isinstance(g, dict):
        raise ConfigError(f"config group {name!r} must be a mapping")
    return g


def _client(raw: Mapping[str, Any], base: Optional[ModelClientConfig] = None) -> ModelClientConfig:
    b = base or ModelClientConfig()
    try:
        return ModelClientConfig(
            kind=str(raw.get("kind", b.kind)),
            seed=int(raw.get("seed", b.seed)),
            base_url=raw.get("base_url", b.base_url),
            completions_path=str(raw.get("completions_path", b.completions_path)),
            embed_url=raw.get("embed_url", b.embed_url),
            embed_path=str(raw.get("embed_path", b.embed_path)),
            model=raw.get("model", b.model),
            api_key=raw.get("api_key", b.api_key),
            timeout_s=float(raw.get("timeout_s", b.timeout_s)),
            retries=int(raw.get("retries", b.retries)),
            backoff_s=float(raw.get("backoff_s", b.backoff_s)),
            embed_dim=int(raw.get("embed_dim", b.embed_dim)),
            verify_tls=bool(raw.get("verify_tls", b.verify_tls)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid client settings: {e}") from e


def _apply_env(c: ModelClientConfig, primary: bool) -> ModelClientConfig:
    endpoint = os.getenv(ENV_ENDPOINT)
    embed = os.getenv(ENV_EMBED_ENDPOINT)
    key = os.getenv(ENV_API_KEY)
    changes: Dict[str, Any] = {}
    if endpoint and (primary or not c.base_url):
        changes["base_url"] = endpoint
    if embed and (primary or not c.embed_url):
        changes["embed_url"] = embed
    if key:
        changes["api_key"] = key
    return replace(c, **changes) if changes else c


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    """
    Check documented ranges.

    Raises
    ------
    ConfigError
        On the first out-of-range value.
    """
    def need(ok: bool, msg: str) -> None:
        if not ok:
            raise ConfigError(msg)

    clients = [cfg.client, cfg.judge.client] + [c.client for c in cfg.judge.candidates]
    for c in clients:
        need(c.kind in ("mock", "http"), f"client kind must be 'mock' or 'http', got {c.kind!r}")
        need(c.timeout_s > 0, "timeout_s must be > 0")
        need(c.retries >= 0, "retries must be >= 0")
        need(c.backoff_s >= 0, "backoff_s must be >= 0")
        need(c.embed_dim >= 1, "embed_dim must be >= 1")
        need(c.kind != "http" or bool(c.base_url or c.embed_url), "http clients need base_url or MODEL_ENDPOINT")

    names = [c.name for c in cfg.judge.candidates]
    need(len(set(names)) == len(names), "candidate names must be unique")
    need(cfg.judge.probe_count >= 1, "probe_count must be >= 1")
    need(cfg.judge.order_policy in ("fixed", "both"), "order_policy must be 'fixed' or 'both'")
    need(cfg.judge.max_tokens >= 1, "judge.max_tokens must be >= 1")
    need(cfg.judge.temperature >= 0, "judge.temperature must be >= 0")

    need(cfg.ranking.tie_policy in ("half", "discard"), "tie_policy must be 'half' or 'discard'")
    need(cfg.ranking.tol > 0, "ranking.tol must be > 0")
    need(cfg.ranking.max_iter >= 1, "ranking.max_iter must be >= 1")
    need(cfg.ranking.dampen >= 0, "ranking.dampen must be >= 0")

    need(0.0 < cfg.dedup.similarity_threshold < 1.0, "similarity_threshold must lie in (0, 1)")
    need(cfg.dedup.ppl_margin >= 0, "ppl_margin must be >= 0")
    need(cfg.dedup.index in ("exact", "ann"), "dedup.index must be 'exact' or 'ann'")

    try:
        SplitRatios.parse(cfg.split.ratios)
    except InvalidRatios as e:
        raise ConfigError(str(e)) from e

    need(cfg.prompt.mode in ("universal", "specific"), "prompt.mode must be 'universal' or 'specific'")
    need(cfg.prompt.budget >= 64, "prompt.budget must be >= 64")
    need(cfg.evaluation.top_k >= 1, "evaluation.top_k must be >= 1")
    need(cfg.runtime.parallelism >= 1, "parallelism must be >= 1")
    return cfg


def load_pipeline_config(path: Optional[str] = None, use_env: bool = True) -> PipelineConfig:
    """
    Load pipeline configuration from YAML and convert into typed config objects.

    Parameters
    ----------
    path
        Explicit path to config.yaml. If None, uses default resolution; with
        no file found, built-in defaults are used.
    use_env
        Load ``.env`` next to the config and apply endpoint/secret variables.

    Returns
    -------
    PipelineConfig
        Parsed and validated configuration.

    Raises
    ------
    FileNotFoundError
        If an explicit config file does not exist.
    ConfigError
        If fields are malformed or out of range.
    """
    if path:
        cfg_path: Optional[Path] = Path(path).expanduser().resolve()
        if not cfg_path.exists():
            raise FileNotFoundError(f"Config not found: {cfg_path}")
    else:
        cfg_path = _resolve_default_config_path()
        if cfg_path is not None and not cfg_path.exists():
            raise FileNotFoundError(f"Config not found: {cfg_path}")

    raw: Dict[str, Any] = _read_yaml(cfg_path) if cfg_path else {}
    if use_env:
        load_dotenv((cfg_path.parent if cfg_path else Path.cwd()) / ".env")

    try:
        cfg = _build(raw)
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"invalid config: {e}") from e

    if use_env:
        cfg = replace(
            cfg,
            client=_apply_env(cfg.client, primary=True),
            judge=replace(
                cfg.judge,
                client=_apply_env(cfg.judge.client, primary=False),
                candidates=tuple(
                    CandidateConfig(c.name, _apply_env(c.client, primary=False)) for c in cfg.judge.candidates
                ),
            ),
        )
    cfg = replace(cfg, source=str(cfg_path) if cfg_path else None)
    return validate_config(cfg)


def _build(raw: Mapping[str, Any]) -> PipelineConfig:
    # ---- client ----
    client = _client(_group(raw, "client"))

    # ---- judge ----
    j = _group(raw, "judge")
    candidates: List[CandidateConfig] = []
    for item in j.get("candidates") or []:
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError("every judge candidate needs a name")
        candidates.append(CandidateConfig(name=str(item["name"]), client=_client(item, client)))
    judge = JudgeConfig(
        client=_client(j.get("client") or {}, client),
        candidates=tuple(candidates),
        probe_count=int(j.get("probe_count", 50)),
        probes_file=j.get("probes_file"),
        order_policy=str(j.get("order_policy", "fixed")),
        max_tokens=int(j.get("max_tokens", 256)),
        temperature=float(j.get("temperature", 0.0)),
        candidate_template=j.get("candidate_template"),
        judge_template=j.get("judge_template"),
    )

    # ---- ranking ----
    r = _group(raw, "ranking")
    ranking = RankingConfig(
        tie_policy=str(r.get("tie_policy", "half")),
        tol=float(r.get("tol", 1e-9)),
        max_iter=int(r.get("max_iter", 100)),
        dampen=float(r.get("dampen", 0.0)),
    )

    # ---- dedup ----
    d = _group(raw, "dedup")
    dedup = DedupConfig(
        similarity_threshold=float(d.get("similarity_threshold", 0.9)),
        ppl_margin=float(d.get("ppl_margin", 0.05)),
        index=str(d.get("index", "exact")),
    )

    # ---- clean ----
    c = _group(raw, "clean")
    clean = CleanConfig(
        strip_rules=tuple(str(x) for x in c.get("strip_rules") or []),
        use_default_rules=bool(c.get("use_default_rules", True)),
    )

    s = _group(raw, "split")
    if isinstance(s.get("ratios"), int):
        raise ConfigError("split.ratios must be a quoted string such as \"8:1:1\"")
    p = _group(raw, "prompt")
    e = _group(raw, "evaluation")
    pa = _group(raw, "paths")
    rt = _group(raw, "runtime")

    return PipelineConfig(
        client=client,
        judge=judge,
        ranking=ranking,
        dedup=dedup,
        clean=clean,
        split=SplitConfig(ratios=str(s.get("ratios", "8:1:1")), seed=int(s.get("seed", 0))),
        prompt=PromptConfig(
            mode=str(p.get("mode", "universal")),
            sections=str(p.get("sections", "dd")),
            budget=int(p.get("budget", 2048)),
            instruction=p.get("instruction"),
        ),
        evaluation=EvaluationConfig(
            top_k=int(e.get("top_k", 50)),
            allow_missing=bool(e.get("allow_missing", False)),
        ),
        paths=PathsConfig(code_table=pa.get("code_table"), frequency_source=pa.get("frequency_source")),
        runtime=RuntimeConfig(
            parallelism=int(rt.get("parallelism", 1)),
            seed=int(rt.get("seed", 0)),
            log_level=str(rt.get("log_level", "INFO")).upper(),
        ),
    )
