from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, NoReturn, Optional

from icdcoder import __version__
from icdcoder.bootstrap import CliOverrides, build_pipeline
from icdcoder.domain.errors import ConfigError, ModelClientError, RankingError, ValidationError
from icdcoder.services.pipeline import PipelineService

logger = logging.getLogger("icdcoder.cli")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TRANSPORT = 2

LOG_FORMAT = "[%(levelname)s][%(name)s] %(message)s"


def configure_logging(level: str = "INFO") -> None:
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2 (reserved for transport failures)."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="icdcoder", description="ICD-10-CM coding pipeline: data refinement, model selection, evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="path to config.yaml (default: $ICDCODER_CONFIG or ./config.yaml)")
    p.add_argument("--seed", type=int, help="runtime and split seed")
    p.add_argument("--parallelism", type=int, help="bound on concurrent model calls")
    p.add_argument("--allow-missing", action="store_true", default=None, help="score missing predictions as empty")
    p.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)
    p.add_argument("--code-table", help="strict ICD-10-CM code table, one code per line")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("clean", help="normalize text, strip non-clinical content, validate codes")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--rejections", help="rejection log path")

    s = sub.add_parser("split", help="multi-label stratified train/dev/test split")
    s.add_argument("input")
    s.add_argument("out_dir")
    s.add_argument("--ratios", help='e.g. "8:1:1"')

    s = sub.add_parser("dedup", help="redundancy-aware sampling")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--report")
    s.add_argument("--threshold", type=float)
    s.add_argument("--ppl-margin", type=float)
    s.add_argument("--index", choices=["exact", "ann"])

    s = sub.add_parser("judge", help="pairwise LLM-as-judge tournament")
    s.add_argument("output", help="observations JSONL")
    s.add_argument("--probes-file")
    s.add_argument("--corpus", help="take the top probe_count codes of this corpus as probes")
    s.add_argument("--order-policy", choices=["fixed", "both"])
    s.add_argument("--matrix", help="win matrix JSON path")
    s.add_argument("--judge-endpoint", help="HTTP endpoint of the judge model")

    s = sub.add_parser("rank", help="ILSR and LSR strength estimation")
    s.add_argument("input", help="win matrix JSON or observations JSONL")
    s.add_argument("output")
    s.add_argument("--tie-policy", choices=["half", "discard"])
    s.add_argument("--dampen", type=float)

    s = sub.add_parser("prompt", help="render section-aware instruction prompts")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--mode", choices=["universal", "specific"])
    s.add_argument("--sections", help="dd,op,mh,pr,tc")
    s.add_argument("--budget", type=int)

    s = sub.add_parser("eval", help="micro P/R/F1 and MDCA, full and top-K scope")
    s.add_argument("gold")
    s.add_argument("predictions")
    s.add_argument("output")
    s.add_argument("--top-k", type=int)
    s.add_argument("--frequency-source", help="corpus whose code frequencies define the top-K set")
    s.add_argument("--require-sections", help="score only records having these sections, e.g. dd,mh")
    s.add_argument("--exact-sections", action="store_true")

    s = sub.add_parser("stats", help="code frequencies, chapter histogram, section combinations")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--top-k", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--split-dir", help="directory holding train/dev/test.jsonl")
    return p


def _dispatch(svc: PipelineService, a: argparse.Namespace) -> Dict[str, Any]:
    commands: Dict[str, Callable[[], Dict[str, Any]]] = {
        "clean": lambda: svc.clean(a.input, a.output, a.rejections),
        "split": lambda: svc.split(a.input, a.out_dir, a.ratios),
        "dedup": lambda: svc.dedup(a.input, a.output, a.report, a.threshold, a.ppl_margin, a.index),
        "judge": lambda: svc.judge(a.output, a.probes_file, a.corpus, a.order_policy, a.matrix),
        "rank": lambda: svc.rank(a.input, a.output, a.tie_policy, a.dampen),
        "prompt": lambda: svc.prompt(a.input, a.output, a.mode, a.sections, a.budget),
        "eval": lambda: svc.eval(
            a.gold,
            a.predictions,
            a.output,
            a.top_k,
            a.frequency_source,
            require_sections=a.require_sections,
            exact_sections=a.exact_sections,
        ),
        "stats": lambda: svc.stats(a.input, a.output, a.top_k, a.budget, a.split_dir),
    }
    return commands[a.command]()


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns
    -------
    int
        0 on success, 1 on invalid input/config or an unrankable matrix,
        2 on model transport failure.
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "INFO")

    overrides = CliOverrides(
        seed=args.seed,
        parallelism=args.parallelism,
        allow_missing=args.allow_missing,
        log_level=args.log_level,
        code_table=args.code_table,
        judge_endpoint=getattr(args, "judge_endpoint", None),
    )
    try:
        svc = build_pipeline(args.config, overrides)
        configure_logging(svc.config.runtime.log_level)
        summary = _dispatch(svc, args)
    except ModelClientError as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_TRANSPORT
    except (ValidationError, ConfigError, RankingError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_INVALID

    print(f"[{args.command.upper()}] {json.dumps(summary, sort_keys=True)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
