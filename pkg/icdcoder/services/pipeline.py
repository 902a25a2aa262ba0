from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from icdcoder.core.config.yaml_config import PipelineConfig
from icdcoder.core.corpus.cleaning import DEFAULT_STRIP_RULES, CleaningOptions, clean_corpus
from icdcoder.core.corpus.codes import load_code_table, validate_code
from icdcoder.core.corpus.splitting import SPLIT_NAMES, stratified_split
from icdcoder.core.corpus.stats import chapter_histogram, code_frequency, section_combinations, split_chapter_table
from icdcoder.core.dedup.index import IndexKind
from icdcoder.core.dedup.sampling import deduplicate
from icdcoder.core.evaluation.metrics import evaluate, matched_subset, prediction_from_json
from icdcoder.core.judging.tournament import CandidateModel, GenerationParams, run_tournament
from icdcoder.core.judging.win_matrix import (
    WinRateMatrix,
    average_win_rates,
    build_win_matrix,
    comparison_graph,
    position_bias_audit,
)
from icdcoder.core.prompting.target import PredictionCodes, format_target
from icdcoder.core.prompting.template import DEFAULT_INSTRUCTION, PromptMode, build_prompt
from icdcoder.core.prompting.tokens import TokenBudget
from icdcoder.core.ranking.result import rank_report
from icdcoder.core.ranking.spectral import TiePolicy, ilsr_rank, lsr_rank
from icdcoder.domain.errors import CodeRejected, ConfigError, InputFormatError, NotIrreducible, ValidationError
from icdcoder.domain.matchups import MatchupObservation, OrderPolicy
from icdcoder.domain.models import CodedRecord, IcdCode, SectionKind, SplitRatios
from icdcoder.services.manifest import RunManifest
from icdcoder.transport.base import ModelClient
from icdcoder.transport.client_config import ModelClientConfig
from icdcoder.transport.factory import build_client
from icdcoder.transport.jsonl import (
    encode_record,
    encode_rejection,
    load_records,
    read_json,
    read_jsonl,
    write_json,
    write_jsonl,
)

logger = logging.getLogger(__name__)

ClientFactory = Callable[[ModelClientConfig, str], ModelClient]

# untruncated prompt length for the over-budget statistic
_UNBOUNDED = TokenBudget(max_tokens=10**9)


def _sibling(path: str | Path, suffix: str) -> Path:
    """``out/obs.jsonl`` + ``.matrix.json`` -> ``out/obs.matrix.json``."""
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _parse_sections(csv: Optional[str]) -> List[SectionKind]:
    if not csv:
        return []
    return [SectionKind.from_short_name(n) for n in csv.split(",") if n.strip()]


def read_probes(path: str | Path) -> List[IcdCode]:
    """
    Read probe codes, one per line; blank lines and ``#`` comments are skipped.

    Raises
    ------
    InputFormatError
        For a line that is not a well-formed code.
    """
    probes: List[IcdCode] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                probes.append(validate_code(text))
            except CodeRejected as e:
                raise InputFormatError(str(path), line_no, str(e)) from e
    return probes


def read_observations(path: str | Path) -> List[MatchupObservation]:
    out: List[MatchupObservation] = []
    for line_no, obj in read_jsonl(path):
        try:
            out.append(MatchupObservation.from_json(obj))
        except KeyError as e:
            raise InputFormatError(str(path), line_no, f"missing field {e}") from e
        except (ValueError, ValidationError) as e:
            raise InputFormatError(str(path), line_no, str(e)) from e
    return out


def read_predictions(path: str | Path) -> Dict[str, PredictionCodes]:
    """
    Read model answers keyed by record id.

    Each line is ``{"id", "raw_output"}`` or ``{"id", "main_code", "other_codes"}``.
    """
    out: Dict[str, PredictionCodes] = {}
    for line_no, obj in read_jsonl(path):
        rid = obj.get("id")
        if rid is None:
            raise InputFormatError(str(path), line_no, "missing field 'id'")
        rid = str(rid)
        if rid in out:
            raise InputFormatError(str(path), line_no, f"duplicate prediction for {rid!r}")
        out[rid] = prediction_from_json(obj)
    return out


def load_matrix(path: str | Path) -> WinRateMatrix:
    """Win matrix from a matrix JSON document or an observations JSONL file."""
    if str(path).endswith(".jsonl"):
        return build_win_matrix(read_observations(path))
    obj = read_json(path)
    if not isinstance(obj, dict):
        raise InputFormatError(str(path), 1, "win matrix JSON must be an object")
    return WinRateMatrix.from_json(obj)


@dataclass
class PipelineService:
    """
    Run pipeline stages from files to files.

    Responsibilities
    ----------------
    - Resolve per-stage settings: explicit arguments first, then `config`.
    - Read inputs, call the core stage, write outputs atomically.
    - Write a run manifest next to every primary output.

    Notes
    -----
    Stage logic lives in `icdcoder.core`; this class only wires files,
    clients and settings together. Every method returns a short summary
    mapping for the command line.

    Parameters
    ----------
    config
        Resolved pipeline configuration.
    client_factory
        Builds a model client from its settings and a display name.
    """

    config: PipelineConfig = field(default_factory=PipelineConfig)
    client_factory: ClientFactory = build_client

    def _manifest(self, command: str, inputs: Sequence[Optional[str | Path]]) -> RunManifest:
        m = RunManifest(command=command, config_hash=self.config.config_hash)
        m.add_inputs(inputs)
        m.seeds["runtime"] = self.config.runtime.seed
        return m

    @property
    def parallelism(self) -> int:
        return self.config.runtime.parallelism

    # ---- corpus ----

    def clean(self, in_path: str, out_path: str, rejections_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Clean a raw corpus.

        Side Effects
        ------------
        - Writes cleaned records to `out_path`.
        - Writes the rejection log (default ``<out stem>.rejections.jsonl``).
        """
        cfg = self.config
        manifest = self._manifest("clean", [in_path, cfg.paths.code_table])
        rules = (DEFAULT_STRIP_RULES if cfg.clean.use_default_rules else ()) + cfg.clean.strip_rules
        table = load_code_table(cfg.paths.code_table) if cfg.paths.code_table else None

        raw = [obj for _, obj in read_jsonl(in_path, objects_only=False)]
        records, rejections = clean_corpus(raw, CleaningOptions(rules=rules, code_table=table, parallelism=self.parallelism))

        rej_path = Path(rejections_path) if rejections_path else _sibling(out_path, ".rejections.jsonl")
        write_jsonl(out_path, (encode_record(r) for r in records))
        write_jsonl(rej_path, (encode_rejection(r) for r in rejections))
        manifest.outputs = [str(out_path), str(rej_path)]
        manifest.finish(out_path)
        return {"kept": len(records), "rejected": len(rejections), "rejections": str(rej_path)}

    def split(
        self,
        in_path: str,
        out_dir: str,
        ratios: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> Dict[str, Any]:
        """
        Stratified train/dev/test split.

        Side Effects
        ------------
        - Writes ``train.jsonl``, ``dev.jsonl``, ``test.jsonl`` and ``split.json``
          (counts, seed, ratios) into `out_dir`.
        """
        cfg = self.config
        split_ratios = SplitRatios.parse(ratios or cfg.split.ratios)
        split_seed = cfg.split.seed if seed is None else seed
        manifest = self._manifest("split", [in_path])
        manifest.seeds["split"] = split_seed

        result = stratified_split(load_records(in_path), split_ratios, split_seed)
        out = Path(out_dir)
        for name, part in zip(SPLIT_NAMES, result.parts()):
            write_jsonl(out / f"{name}.jsonl", (encode_record(r) for r in part))
            manifest.outputs.append(str(out / f"{name}.jsonl"))

        summary = {
            "counts": result.sizes(),
            "seed": split_seed,
            "ratios": list(split_ratios.as_tuple()),
            "chapters": {k: list(v) for k, v in split_chapter_table(*result.parts()).items()},
        }
        write_json(out / "split.json", summary)
        manifest.outputs.append(str(out / "split.json"))
        manifest.finish(out / "split.json")
        return {"counts": summary["counts"], "seed": split_seed}

    def dedup(
        self,
        in_path: str,
        out_path: str,
        report_path: Optional[str] = None,
        threshold: Optional[float] = None,
        ppl_margin: Optional[float] = None,
        index: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Redundancy-aware sampling.

        Side Effects
        ------------
        - Calls the configured client for embeddings and perplexities.
        - Writes the reduced corpus and the report (default ``<out stem>.report.json``).
        """
        cfg = self.config
        th = cfg.dedup.similarity_threshold if threshold is None else threshold
        margin = cfg.dedup.ppl_margin if ppl_margin is None else ppl_margin
        try:
            kind = IndexKind(index or cfg.dedup.index)
        except ValueError:
            raise ValidationError(f"unknown index kind {index!r}") from None
        if not 0.0 < th < 1.0:
            raise ValidationError(f"threshold must lie in (0, 1), got {th}")

        manifest = self._manifest("dedup", [in_path])
        manifest.seeds["client"] = cfg.client.seed
        client = self.client_factory(cfg.client, "embedder")
        kept, report = deduplicate(
            load_records(in_path),
            client,
            th,
            ppl_margin=margin,
            index_kind=kind,
            parallelism=self.parallelism,
        )

        rep_path = Path(report_path) if report_path else _sibling(out_path, ".report.json")
        doc = report.to_json()
        doc["client"] = client.describe()
        write_jsonl(out_path, (encode_record(r) for r in kept))
        write_json(rep_path, doc)
        manifest.outputs = [str(out_path), str(rep_path)]
        manifest.finish(out_path)
        return {"before": report.before_count, "after": report.after_count, "report": str(rep_path)}

    # ---- model selection ----

    def _probes(self, probes_file: Optional[str], corpus: Optional[str]) -> List[IcdCode]:
        path = probes_file or self.config.judge.probes_file
        if path:
            probes = read_probes(path)
        elif corpus:
            probes = code_frequency(load_records(corpus)).top_k(self.config.judge.probe_count)
        else:
            raise ValidationError("judge needs --probes-file, judge.probes_file or --corpus")
        if not probes:
            raise ValidationError("no probe codes")
        return probes

    def judge(
        self,
        out_path: str,
        probes_file: Optional[str] = None,
        corpus: Optional[str] = None,
        order_policy: Optional[str] = None,
        matrix_path: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Pairwise tournament among the configured candidates.

        Side Effects
        ------------
        - Calls every candidate once per probe and the judge once per matchup.
        - Writes observations (JSONL), the win matrix (default ``<out stem>.matrix.json``)
          and failures (``<out stem>.failures.jsonl``); with both orders, also a
          position-bias audit (``<out stem>.bias.json``).
        """
        jc = self.config.judge
        if len(jc.candidates) < 2:
            raise ConfigError("judge.candidates needs at least two models")
        try:
            policy = OrderPolicy(order_policy or jc.order_policy)
        except ValueError:
            raise ValidationError(f"unknown order policy {order_policy!r}") from None

        probes = self._probes(probes_file, corpus)
        manifest = self._manifest("judge", [probes_file or jc.probes_file, corpus])
        manifest.seeds["judge"] = jc.client.seed
        for c in jc.candidates:
            manifest.seeds[f"candidate:{c.name}"] = c.client.seed

        candidates = [CandidateModel(c.name, self.client_factory(c.client, c.name)) for c in jc.candidates]
        judge_client = self.client_factory(jc.client, "judge")
        params = GenerationParams(max_tokens=jc.max_tokens, temperature=jc.temperature)
        result = run_tournament(
            candidates,
            probes,
            judge_client,
            policy,
            params=params,
            judge_params=params,
            parallelism=self.parallelism,
            candidate_template=jc.candidate_template,
            judge_template=jc.judge_template,
        )
        matrix = build_win_matrix(result.observations, models=[c.name for c in candidates])

        mat_path = Path(matrix_path) if matrix_path else _sibling(out_path, ".matrix.json")
        fail_path = _sibling(out_path, ".failures.jsonl")
        write_jsonl(out_path, (o.to_json() for o in result.observations))
        write_json(mat_path, matrix.to_json())
        write_jsonl(fail_path, (f.to_json() for f in result.failures))
        manifest.outputs = [str(out_path), str(mat_path), str(fail_path)]

        summary: Dict[str, Any] = {
            "observations": len(result.observations),
            "failures": len(result.failures),
            "matrix": str(mat_path),
        }
        if policy is OrderPolicy.BOTH:
            bias_path = _sibling(out_path, ".bias.json")
            bias = position_bias_audit(result.observations, models=matrix.models)
            write_json(bias_path, bias.to_json())
            manifest.outputs.append(str(bias_path))
            summary["position_a_share"] = bias.position_a_share
        manifest.finish(out_path)
        return summary

    def rank(
        self,
        in_path: str,
        out_path: str,
        tie_policy: Optional[str] = None,
        dampen: Optional[float] = None,
    ) -> Dict[str, Any]:
        """
        Rank models from a win matrix or observations with ILSR and LSR.

        The top-level fields of the output are the ILSR estimate; the single
        spectral step is reported under ``"lsr"``.

        Side Effects
        ------------
        - Writes the ranking JSON.
        """
        rc = self.config.ranking
        try:
            policy = TiePolicy(tie_policy or rc.tie_policy)
        except ValueError:
            raise ValidationError(f"unknown tie policy {tie_policy!r}") from None
        eps = rc.dampen if dampen is None else dampen
        if eps < 0:
            raise ValidationError("dampen must be >= 0")

        manifest = self._manifest("rank", [in_path])
        matrix = load_matrix(in_path)
        ilsr = ilsr_rank(matrix, tie_policy=policy, tol=rc.tol, max_iter=rc.max_iter, dampen=eps)
        doc = ilsr.to_json()
        try:
            doc["lsr"] = lsr_rank(matrix, dampen=eps).to_json()
        except NotIrreducible as e:
            # ties can connect the ILSR graph while the win-rate graph stays split
            logger.warning("lsr ranking unavailable: %s", e)
            doc["lsr"] = {"error": str(e)}

        graph = comparison_graph(matrix)
        doc["report"] = rank_report(ilsr).to_json()
        doc["average_win_rates"] = average_win_rates(matrix)
        doc["graph"] = {
            "edges": sorted([list(e) for e in graph.edges]),
            "tie_edges": sorted(sorted(e) for e in graph.tie_edges),
            "strongly_connected": graph.strongly_connected,
            "out_degree": graph.out_degree,
        }
        write_json(out_path, doc)
        manifest.outputs = [str(out_path)]
        manifest.finish(out_path)
        return {"selected": ilsr.selected, "converged": ilsr.converged, "iterations": ilsr.iterations}

    # ---- fine-tuning data and scoring ----

    def prompt(
        self,
        in_path: str,
        out_path: str,
        mode: Optional[str] = None,
        sections: Optional[str] = None,
        budget: Optional[int] = None,
    ) -> Dict[str, Any]:
        """
        Render instruction prompts and targets.

        Side Effects
        ------------
        - Writes JSONL ``{"id", "prompt", "target", "warnings"}``.
        """
        pc = self.config.prompt
        prompt_mode = PromptMode.parse(mode or pc.mode, sections if sections is not None else pc.sections)
        token_budget = TokenBudget(max_tokens=pc.budget if budget is None else budget)
        instruction = pc.instruction or DEFAULT_INSTRUCTION

        manifest = self._manifest("prompt", [in_path])
        rows: List[Dict[str, Any]] = []
        truncated = 0
        for r in load_records(in_path):
            rendered = build_prompt(r, prompt_mode, token_budget, instruction)
            truncated += bool(rendered.warnings)
            rows.append(
                {
                    "id": r.id,
                    "prompt": rendered.text,
                    "target": format_target(r.main_code, r.other_codes),
                    "warnings": list(rendered.warnings),
                }
            )
        write_jsonl(out_path, rows)
        manifest.outputs = [str(out_path)]
        manifest.finish(out_path)
        logger.info("rendered %d %s prompts, %d truncated", len(rows), prompt_mode.label, truncated)
        return {"prompts": len(rows), "truncated": truncated, "mode": prompt_mode.label}

    def eval(
        self,
        gold_path: str,
        predictions_path: str,
        out_path: str,
        top_k: Optional[int] = None,
        frequency_source: Optional[str] = None,
        allow_missing: Optional[bool] = None,
        require_sections: Optional[str] = None,
        exact_sections: bool = False,
    ) -> Dict[str, Any]:
        """
        Score predictions on the full code set and on the top-K codes.

        Side Effects
        ------------
        - Writes a metrics JSON with one report per scope.
        """
        ec = self.config.evaluation
        k = ec.top_k if top_k is None else top_k
        freq_path = frequency_source or self.config.paths.frequency_source
        if not freq_path:
            raise ValidationError("eval needs --frequency-source or paths.frequency_source")
        missing_ok = ec.allow_missing if allow_missing is None else allow_missing

        manifest = self._manifest("eval", [gold_path, predictions_path, freq_path])
        gold: List[CodedRecord] = load_records(gold_path)
        wanted = _parse_sections(require_sections)
        if wanted or exact_sections:
            gold = matched_subset(gold, wanted or [SectionKind.DISCHARGE_DIAGNOSIS], exact=exact_sections)

        predictions = read_predictions(predictions_path)
        subset_ids = {r.id for r in gold}
        if len(subset_ids) < len(predictions):
            predictions = {rid: p for rid, p in predictions.items() if rid in subset_ids}

        reports = evaluate(gold, predictions, k, code_frequency(load_records(freq_path)), allow_missing=missing_ok)
        parse_warnings = sum(len(p.parse_warnings) for p in predictions.values())
        doc = {
            "reports": [r.to_json() for r in reports],
            "n_gold": len(gold),
            "sections": [s.short_name for s in wanted],
            "exact_sections": exact_sections,
            "parse_warnings": parse_warnings,
        }
        write_json(out_path, doc)
        manifest.outputs = [str(out_path)]
        manifest.finish(out_path)
        return {r.scope: {"f1": r.f1, "mdca": r.mdca} for r in reports}

    def stats(
        self,
        in_path: str,
        out_path: str,
        top_k: Optional[int] = None,
        budget: Optional[int] = None,
        split_dir: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Corpus statistics: top-K codes, chapter histogram, section combinations.

        With `split_dir`, the per-split chapter table of ``train/dev/test.jsonl``
        is added.
        """
        k = self.config.evaluation.top_k if top_k is None else top_k
        limit = self.config.prompt.budget if budget is None else budget
        inputs: List[Optional[str | Path]] = [in_path]
        if split_dir:
            inputs += [Path(split_dir) / f"{n}.jsonl" for n in SPLIT_NAMES]
        manifest = self._manifest("stats", inputs)

        records = load_records(in_path)
        table = code_frequency(records)
        universal = PromptMode.universal()
        combos = section_combinations(
            records,
            length_fn=lambda r: build_prompt(r, universal, _UNBOUNDED).token_count,
            budget=limit,
        )
        doc: Dict[str, Any] = {
            "records": len(records),
            "distinct_codes": len(table),
            "top_k": [{"code": c.value, "count": n} for c, n in table.entries[:k]],
            "chapters": chapter_histogram(records),
            "section_combinations": [
                {
                    "sections": s.label,
                    "containing": s.containing,
                    "exclusive": s.exclusive,
                    "over_budget_pct": s.over_budget_pct,
                }
                for s in combos
            ],
            "budget": limit,
        }
        if split_dir:
            parts = [load_records(Path(split_dir) / f"{n}.jsonl") for n in SPLIT_NAMES]
            doc["split_chapters"] = {ch: list(v) for ch, v in split_chapter_table(*parts).items()}
        write_json(out_path, doc)
        manifest.outputs = [str(out_path)]
        manifest.finish(out_path)
        return {"records": len(records), "distinct_codes": len(table)}
