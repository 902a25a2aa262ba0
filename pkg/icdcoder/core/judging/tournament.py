"""
Pairwise judging tournament.

For every unordered pair of candidates and every probe code the judge sees both
candidates' descriptions of the code and picks one. Candidate generations are
requested once per (model, probe) and reused across all pairs; judge calls are
dispatched through `BoundedWorkerPool` and merged by key, so the result does not
depend on completion order.

Failure Handling
----------------
- A model client error while generating or judging turns the affected matchups
  into `MatchupFailure` entries; the tournament keeps going.
- If more than half of the matchups fail, `TournamentAborted` is raised.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from icdcoder.core.judging.prompts import ProbePrompts, build_probe_prompts
from icdcoder.core.judging.verdicts import parse_verdict
from icdcoder.domain.errors import ModelClientError, TournamentAborted, ValidationError
from icdcoder.domain.matchups import MatchupFailure, MatchupObservation, OrderPolicy
from icdcoder.domain.models import IcdCode
from icdcoder.runtime.worker_pool import BoundedWorkerPool
from icdcoder.transport.base import GenerationRequest, ModelClient

logger = logging.getLogger(__name__)

# (challenger, opponent, probe, order)
MatchupKey = Tuple[str, str, str, int]


@dataclass(frozen=True)
class CandidateModel:
    name: str
    client: ModelClient


@dataclass(frozen=True)
class GenerationParams:
    """Decoding parameters for candidate and judge calls."""

    max_tokens: int = 256
    temperature: float = 0.0

    def request(self, prompt: str) -> GenerationRequest:
        return GenerationRequest(prompt=prompt, max_tokens=self.max_tokens, temperature=self.temperature)


@dataclass
class TournamentResult:
    """
    Outcome of `run_tournament`.

    Parameters
    ----------
    observations
        Judged matchups sorted by (pair, probe, order).
    failures
        Matchups that could not be judged.
    """

    observations: List[MatchupObservation] = field(default_factory=list)
    failures: List[MatchupFailure] = field(default_factory=list)

    @property
    def attempted(self) -> int:
        return len(self.observations) + len(self.failures)


def schedule_matchups(
    names: Sequence[str],
    probes: Sequence[IcdCode],
    order_policy: OrderPolicy = OrderPolicy.FIXED,
) -> List[MatchupKey]:
    """
    Enumerate matchup keys in deterministic order.

    Fixed order yields C(k, 2) * |probes| keys; both-orders doubles that.
    """
    keys: List[MatchupKey] = []
    for a, b in itertools.combinations(names, 2):
        for probe in probes:
            keys.append((a, b, probe.value, 1))
            if order_policy is OrderPolicy.BOTH:
                keys.append((b, a, probe.value, 2))
    return keys


def run_tournament(
    candidates: Sequence[CandidateModel],
    probes: Sequence[IcdCode],
    judge: ModelClient,
    order_policy: OrderPolicy = OrderPolicy.FIXED,
    *,
    params: Optional[GenerationParams] = None,
    judge_params: Optional[GenerationParams] = None,
    parallelism: int = 1,
    candidate_template: Optional[str] = None,
    judge_template: Optional[str] = None,
) -> TournamentResult:
    """
    Run all pairwise matchups.

    Parameters
    ----------
    candidates
        At least two models with unique names.
    probes
        Non-empty list of probe codes; duplicates are ignored.
    judge
        Client used for verdicts.
    order_policy
        A/B position assignment.
    params, judge_params
        Decoding parameters for candidates and judge (default: temperature 0,
        256 max tokens).
    parallelism
        Bound on concurrent model calls.

    Raises
    ------
    ValidationError
        Fewer than two candidates, duplicate names or no probes.
    TournamentAborted
        More than half of the matchups failed.
    """
    names = [c.name for c in candidates]
    if len(names) < 2:
        raise ValidationError("a tournament needs at least two candidates")
    if len(set(names)) != len(names):
        raise ValidationError("candidate names must be unique")
    probes = list(dict.fromkeys(probes))
    if not probes:
        raise ValidationError("a tournament needs at least one probe code")

    params = params or GenerationParams()
    judge_params = judge_params or params
    by_name = {c.name: c for c in candidates}
    prompts: Dict[str, ProbePrompts] = {
        p.value: build_probe_prompts(p, candidate_template, judge_template) for p in probes
    }
    pool = BoundedWorkerPool(parallelism=parallelism, name="icdcoder-judge")

    gen_items = [((name, p.value), (name, p.value)) for name in names for p in probes]

    def _generate(item: Tuple[str, str]) -> str:
        name, code = item
        return by_name[name].client.generate(params.request(prompts[code].candidate_prompt))

    generations = pool.run(_generate, gen_items)
    for (name, code), outcome in generations.items():
        if not outcome.ok:
            if not isinstance(outcome.error, ModelClientError):
                raise outcome.error  # type: ignore[misc]
            logger.warning("generation failed for %s on %s: %s", name, code, outcome.error)

    keys = schedule_matchups(names, probes, order_policy)
    failures: Dict[MatchupKey, str] = {}
    judge_items: List[Tuple[MatchupKey, MatchupKey]] = []
    for key in keys:
        challenger, opponent, code, _ = key
        missing = [n for n in (challenger, opponent) if not generations[(n, code)].ok]
        if missing:
            failures[key] = f"generation failed for {', '.join(missing)}: {generations[(missing[0], code)].error}"
        else:
            judge_items.append((key, key))

    def _judge(key: MatchupKey) -> str:
        challenger, opponent, code, _ = key
        text = prompts[code].judge_prompt(
            generations[(challenger, code)].value or "",
            generations[(opponent, code)].value or "",
        )
        return judge.generate(judge_params.request(text))

    verdicts = pool.run(_judge, judge_items)

    result = TournamentResult()
    for key in keys:
        challenger, opponent, code, order = key
        if key in failures:
            result.failures.append(MatchupFailure(challenger, opponent, IcdCode(code), failures[key]))
            continue
        outcome = verdicts[key]
        if not outcome.ok:
            if not isinstance(outcome.error, ModelClientError):
                raise outcome.error  # type: ignore[misc]
            result.failures.append(MatchupFailure(challenger, opponent, IcdCode(code), str(outcome.error)))
            continue
        raw = outcome.value or ""
        result.observations.append(
            MatchupObservation(
                probe_code=IcdCode(code),
                challenger=challenger,
                opponent=opponent,
                verdict=parse_verdict(raw),
                raw_judge_output=raw,
                order=order,
            )
        )

    logger.info(
        "tournament finished: %d matchups, %d judged, %d failed",
        len(keys),
        len(result.observations),
        len(result.failures),
    )
    if len(result.failures) * 2 > len(keys):
        raise TournamentAborted(f"{len(result.failures)} of {len(keys)} matchups failed")
    return result
