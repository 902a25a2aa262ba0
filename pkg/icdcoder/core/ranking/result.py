"""
Ranking results, selection probabilities and the final report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from icdcoder.domain.errors import EmptyAlternativeSet, UnknownModel, ValidationError

TIE_GAP = 1e-6


@dataclass(frozen=True)
class RankingResult:
    """
    Plackett-Luce strengths over an ordered model list.

    Parameters
    ----------
    models
        Model names.
    pi
        Strengths, strictly positive for irreducible input, summing to one.
    logits
        ``ln(pi)`` recentred to mean zero.
    iterations
        Spectral solves performed.
    converged
        Whether the iteration met its tolerance.
    method
        ``"lsr"``, ``"ilsr"`` or ``"logits"``.
    dampen
        Rate added to every off-diagonal cell, 0 when unused.
    residual
        Balance-equation residual of the final solve.
    tie_policy
        ILSR tie handling, if any.
    """

    models: Tuple[str, ...]
    pi: Tuple[float, ...]
    logits: Tuple[float, ...]
    iterations: int = 1
    converged: bool = True
    method: str = "lsr"
    dampen: float = 0.0
    residual: float = 0.0
    tie_policy: Optional[str] = None
    selection_probabilities: Dict[Tuple[str, ...], Dict[str, float]] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        if not (len(self.models) == len(self.pi) == len(self.logits)):
            raise ValidationError("models, pi and logits must align")
        if self.models and abs(sum(self.pi) - 1.0) > 1e-9:
            raise ValidationError("pi must sum to 1")

    @classmethod
    def from_pi(cls, models: Sequence[str], pi: Any, **kwargs: Any) -> "RankingResult":
        arr = np.asarray(pi, dtype=np.float64)
        arr = arr / arr.sum()
        with np.errstate(divide="ignore"):
            log_pi = np.log(arr)
        logits = log_pi - log_pi.mean() if np.all(np.isfinite(log_pi)) else log_pi
        return cls(models=tuple(models), pi=tuple(arr.tolist()), logits=tuple(logits.tolist()), **kwargs)

    def strength(self, model: str) -> float:
        try:
            return self.pi[self.models.index(model)]
        except ValueError:
            raise UnknownModel(model) from None

    @property
    def selected(self) -> str:
        return rank_report(self).selected

    def to_json(self) -> Dict[str, Any]:
        return {
            "models": list(self.models),
            "pi": list(self.pi),
            "logits": list(self.logits),
            "converged": self.converged,
            "iterations": self.iterations,
            "selected": self.selected,
            "method": self.method,
            "dampen": self.dampen,
            "residual": self.residual,
            "tie_policy": self.tie_policy,
        }


def result_from_logits(models: Sequence[str], logits: Sequence[float]) -> RankingResult:
    """Strengths from mean-centred logits, i.e. a softmax."""
    z = np.asarray(logits, dtype=np.float64)
    if len(models) != z.size or z.size == 0:
        raise ValidationError("one logit per model is required")
    pi = np.exp(z - z.max())
    return RankingResult.from_pi(models, pi, method="logits")


def selection_probability(result: RankingResult, alternatives: Iterable[str]) -> Dict[str, float]:
    """
    Probability of choosing each alternative from the set.

    ``p(m | A) = pi_m / sum_{a in A} pi_a``; over the full model set this is pi.

    Raises
    ------
    EmptyAlternativeSet
        `alternatives` is empty.
    UnknownModel
        An alternative is not part of the result.
    """
    alts = list(dict.fromkeys(alternatives))
    if not alts:
        raise EmptyAlternativeSet("alternative set is empty")
    strengths = [result.strength(m) for m in alts]
    total = float(sum(strengths))
    if total <= 0:
        return {m: 1.0 / len(alts) for m in alts}
    probs = {m: s / total for m, s in zip(alts, strengths)}
    result.selection_probabilities[tuple(alts)] = probs
    return probs


@dataclass(frozen=True)
class RankEntry:
    rank: int
    model: str
    pi: float
    logit: float
    tied: bool


@dataclass(frozen=True)
class RankReport:
    """
    Models ordered by strength.

    ``tied`` marks entries whose strength is within `TIE_GAP` of a neighbour;
    `selected` is the strongest model (ties broken by name).
    """

    entries: Tuple[RankEntry, ...]
    selected: str

    def to_json(self) -> Dict[str, Any]:
        return {
            "selected": self.selected,
            "ranking": [
                {"rank": e.rank, "model": e.model, "pi": e.pi, "logit": e.logit, "tied": e.tied}
                for e in self.entries
            ],
        }


def rank_report(result: RankingResult, tie_gap: float = TIE_GAP) -> RankReport:
    if not result.models:
        raise ValidationError("cannot report an empty ranking")
    order = sorted(range(len(result.models)), key=lambda i: (-result.pi[i], result.models[i]))
    pis = [result.pi[i] for i in order]
    entries: List[RankEntry] = []
    for pos, i in enumerate(order):
        tied = (pos > 0 and pis[pos - 1] - pis[pos] < tie_gap) or (
            pos + 1 < len(pis) and pis[pos] - pis[pos + 1] < tie_gap
        )
        entries.append(
            RankEntry(rank=pos + 1, model=result.models[i], pi=result.pi[i], logit=result.logits[i], tied=tied)
        )
    return RankReport(entries=tuple(entries), selected=entries[0].model)
