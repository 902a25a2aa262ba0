"""
Multi-label coding metrics.

Micro precision/recall/F1 pool true positives, false positives and false
negatives over all records. Gold and predicted sets include the main code. A
top-K scope keeps only codes among the K most frequent training codes, on both
sides. Main diagnosis code accuracy (MDCA) is an exact match on the main code
and ignores the scope.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import AbstractSet, Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from icdcoder.core.prompting.target import PredictionCodes, parse_prediction
from icdcoder.domain.errors import AlignmentError, InvalidScope, MissingPrediction
from icdcoder.domain.models import CodedRecord, CodeFrequencyTable, IcdCode, SectionKind

logger = logging.getLogger(__name__)

SCOPE_NOTE = "top-K scope filters both gold and predicted codes; MDCA ignores the scope"


@dataclass(frozen=True)
class Scope:
    """
    Evaluation scope.

    Parameters
    ----------
    codes
        ``None`` for the full code set, otherwise the top-K code set.
    k
        K of a top-K scope.
    """

    codes: Optional[FrozenSet[IcdCode]] = None
    k: Optional[int] = None

    def __post_init__(self) -> None:
        if self.codes is not None and not self.codes:
            raise InvalidScope("a top-K scope needs at least one code")

    @classmethod
    def full(cls) -> "Scope":
        return cls()

    @classmethod
    def top_k(cls, table: CodeFrequencyTable, k: int) -> "Scope":
        if k < 1:
            raise InvalidScope(f"top_k must be >= 1, got {k}")
        codes = frozenset(table.top_k(k))
        if not codes:
            raise InvalidScope("frequency source has no codes")
        return cls(codes=codes, k=k)

    @property
    def is_full(self) -> bool:
        return self.codes is None

    @property
    def label(self) -> str:
        return "full" if self.is_full else f"top{self.k if self.k is not None else len(self.codes or ())}"


def scope_codes(codes: AbstractSet[IcdCode], scope: Scope) -> FrozenSet[IcdCode]:
    if scope.codes is None:
        return frozenset(codes)
    return frozenset(codes) & scope.codes


@dataclass(frozen=True)
class ScoredRun:
    """
    Gold records aligned with predictions under one scope.

    Raises
    ------
    AlignmentError
        If `gold` and `predicted` differ in length.
    """

    gold: Tuple[CodedRecord, ...]
    predicted: Tuple[PredictionCodes, ...]
    scope: Scope = field(default_factory=Scope.full)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold", tuple(self.gold))
        object.__setattr__(self, "predicted", tuple(self.predicted))
        if len(self.gold) != len(self.predicted):
            raise AlignmentError(f"{len(self.gold)} gold records but {len(self.predicted)} predictions")

    def with_scope(self, scope: Scope) -> "ScoredRun":
        return ScoredRun(self.gold, self.predicted, scope)


@dataclass(frozen=True)
class MetricsReport:
    """
    Scores of one run.

    ``zero_denominator`` lists metrics that were set to 0 because their
    denominator was 0.
    """

    scope: str
    precision: float
    recall: float
    f1: float
    mdca: float
    tp: int
    fp: int
    fn: int
    n_records: int
    zero_denominator: Tuple[str, ...] = ()
    note: str = SCOPE_NOTE

    def to_json(self) -> Dict[str, Any]:
        return {
            "scope": self.scope,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mdca": self.mdca,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "n_records": self.n_records,
            "zero_denominator": list(self.zero_denominator),
            "note": self.note,
        }


def record_counts(gold: CodedRecord, pred: PredictionCodes, scope: Scope) -> Tuple[int, int, int]:
    """``(tp, fp, fn)`` of one record."""
    g = scope_codes(gold.code_set(), scope)
    p = scope_codes(pred.code_set(), scope)
    return len(g & p), len(p - g), len(g - p)


def mdca(run: ScoredRun) -> float:
    if not run.gold:
        return 0.0
    hits = sum(1 for g, p in zip(run.gold, run.predicted) if p.main_code is not None and p.main_code == g.main_code)
    return hits / len(run.gold)


def micro_prf(run: ScoredRun) -> MetricsReport:
    tp = fp = fn = 0
    for g, p in zip(run.gold, run.predicted):
        a, b, c = record_counts(g, p, run.scope)
        tp, fp, fn = tp + a, fp + b, fn + c

    zero: List[str] = []
    if tp + fp == 0:
        zero.append("precision")
    if tp + fn == 0:
        zero.append("recall")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        zero.append("f1")

    return MetricsReport(
        scope=run.scope.label,
        precision=precision,
        recall=recall,
        f1=f1,
        mdca=mdca(run),
        tp=tp,
        fp=fp,
        fn=fn,
        n_records=len(run.gold),
        zero_denominator=tuple(zero),
    )


def prediction_from_json(obj: Mapping[str, Any]) -> PredictionCodes:
    """Accept ``{"raw_output"}`` model answers or pre-parsed ``{"main_code", "other_codes"}``."""
    if "raw_output" in obj:
        return parse_prediction(str(obj.get("raw_output") or ""))
    return PredictionCodes.from_json(dict(obj))


def align_predictions(
    gold: Sequence[CodedRecord],
    predictions: Mapping[str, PredictionCodes],
    allow_missing: bool = False,
) -> List[PredictionCodes]:
    """
    Predictions in gold order.

    Raises
    ------
    MissingPrediction
        A gold record has no prediction and `allow_missing` is false.
    """
    out: List[PredictionCodes] = []
    missing = 0
    for r in gold:
        p = predictions.get(r.id)
        if p is None:
            if not allow_missing:
                raise MissingPrediction(r.id)
            missing += 1
            p = PredictionCodes(parse_warnings=("missing prediction",))
        out.append(p)
    if missing:
        logger.warning("%d gold records have no prediction; scored as empty", missing)
    extra = set(predictions) - {r.id for r in gold}
    if extra:
        logger.warning("%d predictions have no gold record and are ignored", len(extra))
    return out


def evaluate(
    gold: Sequence[CodedRecord],
    predictions: Mapping[str, PredictionCodes],
    top_k: int,
    frequency_source: CodeFrequencyTable,
    allow_missing: bool = False,
) -> List[MetricsReport]:
    """
    Full-scope and top-K reports.

    Parameters
    ----------
    gold
        Gold records.
    predictions
        Predictions keyed by record id.
    top_k
        K of the top-K scope (>= 1).
    frequency_source
        Code frequencies the top-K set is drawn from, normally the training split.
    allow_missing
        Score records without a prediction as empty predictions.

    Raises
    ------
    InvalidScope
        `top_k` < 1.
    MissingPrediction
        See `align_predictions`.
    """
    if top_k < 1:
        raise InvalidScope(f"top_k must be >= 1, got {top_k}")
    run = ScoredRun(tuple(gold), tuple(align_predictions(gold, predictions, allow_missing)))
    reports = [micro_prf(run), micro_prf(run.with_scope(Scope.top_k(frequency_source, top_k)))]
    for r in reports:
        logger.info("%s: P=%.4f R=%.4f F1=%.4f MDCA=%.4f", r.scope, r.precision, r.recall, r.f1, r.mdca)
    return reports


def matched_subset(
    records: Iterable[CodedRecord],
    sections: Iterable[SectionKind],
    exact: bool = False,
) -> List[CodedRecord]:
    """
    Records whose present sections contain `sections` (or equal them with `exact`).
    """
    wanted = frozenset(sections)
    if exact:
        return [r for r in records if r.present_sections() == wanted]
    return [r for r in records if wanted <= r.present_sections()]
