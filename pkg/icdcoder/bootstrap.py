from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from icdcoder.core.config.yaml_config import PipelineConfig, load_pipeline_config, validate_config
from icdcoder.services.pipeline import ClientFactory, PipelineService
from icdcoder.transport.factory import build_client


@dataclass(frozen=True)
class CliOverrides:
    """Global command-line flags; ``None`` keeps the configured value."""
    seed: Optional[int] = None
    parallelism: Optional[int] = None
    allow_missing: Optional[bool] = None
    log_level: Optional[str] = None
    code_table: Optional[str] = None
    judge_endpoint: Optional[str] = None


def apply_overrides(cfg: PipelineConfig, o: CliOverrides) -> PipelineConfig:
    """
    Layer command-line flags over the loaded configuration and re-validate.

    ``--seed`` sets both the runtime seed and the split seed. A judge endpoint
    switches the judge client to HTTP.
    """
    runtime = cfg.runtime
    split = cfg.split
    if o.seed is not None:
        runtime = replace(runtime, seed=o.seed)
        split = replace(split, seed=o.seed)
    if o.parallelism is not None:
        runtime = replace(runtime, parallelism=o.parallelism)
    if o.log_level is not None:
        runtime = replace(runtime, log_level=o.log_level.upper())

    evaluation = cfg.evaluation
    if o.allow_missing is not None:
        evaluation = replace(evaluation, allow_missing=o.allow_missing)

    paths = cfg.paths
    if o.code_table is not None:
        paths = replace(paths, code_table=o.code_table)

    judge = cfg.judge
    if o.judge_endpoint:
        judge = replace(judge, client=replace(judge.client, kind="http", base_url=o.judge_endpoint))

    out = replace(cfg, runtime=runtime, split=split, evaluation=evaluation, paths=paths, judge=judge)
    return validate_config(out)


def build_pipeline(
    config_path: Optional[str] = None,
    overrides: Optional[CliOverrides] = None,
    client_factory: ClientFactory = build_client,
) -> PipelineService:
    """Load config, apply flags and wire the pipeline service."""
    cfg = load_pipeline_config(config_path)
    if overrides is not None:
        cfg = apply_overrides(cfg, overrides)
    return PipelineService(config=cfg, client_factory=client_factory)
