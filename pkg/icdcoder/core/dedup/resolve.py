"""
Keep-or-drop rule for a redundant pair.

The record whose perplexity is at least `ppl_margin` (5 % by default) higher
than its partner's carries more information for the model and is retained.
Otherwise the longer text wins; equal lengths keep the smaller id.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional

from icdcoder.domain.errors import ValidationError
from icdcoder.domain.models import CodedRecord

DEFAULT_PPL_MARGIN = 0.05
_RATIO_EPS = 1e-12


class DedupRule(str, Enum):
    PPL = "ppl"
    LENGTH = "length"


@dataclass(frozen=True)
class DedupDecision:
    """
    Outcome of one resolved pair.

    Parameters
    ----------
    kept_id, removed_id
        Record ids.
    rule
        Rule that decided.
    ppl_kept, ppl_removed
        Perplexities of both records.
    similarity
        Similarity of the pair.
    """

    kept_id: str
    removed_id: str
    rule: DedupRule
    ppl_kept: Optional[float]
    ppl_removed: Optional[float]
    similarity: float

    def to_json(self) -> Dict[str, Any]:
        return {
            "kept": self.kept_id,
            "removed": self.removed_id,
            "rule": self.rule.value,
            "ppl_kept": self.ppl_kept,
            "ppl_removed": self.ppl_removed,
            "similarity": self.similarity,
        }


def resolve_pair(
    a: CodedRecord,
    b: CodedRecord,
    ppl_a: float,
    ppl_b: float,
    similarity: float = 1.0,
    ppl_margin: float = DEFAULT_PPL_MARGIN,
) -> DedupDecision:
    """
    Decide which record of a redundant pair is kept.

    Examples
    --------
    ``ppl_a=12.0, ppl_b=11.0`` keeps `a` by perplexity (12.0 >= 11.55);
    ``ppl_a=10.2, ppl_b=10.0`` falls back to text length.
    """
    if ppl_a <= 0 or ppl_b <= 0:
        raise ValidationError("perplexities must be positive")
    if ppl_margin < 0:
        raise ValidationError("ppl_margin must be >= 0")

    hi, lo = (a, b) if ppl_a >= ppl_b else (b, a)
    ppl_hi, ppl_lo = max(ppl_a, ppl_b), min(ppl_a, ppl_b)
    if ppl_hi / ppl_lo >= 1.0 + ppl_margin - _RATIO_EPS:
        return DedupDecision(hi.id, lo.id, DedupRule.PPL, ppl_hi, ppl_lo, similarity)

    len_a, len_b = len(a.full_text()), len(b.full_text())
    if len_a != len_b:
        keep, drop = (a, b) if len_a > len_b else (b, a)
    else:
        keep, drop = (a, b) if a.id < b.id else (b, a)
    ppl = {a.id: ppl_a, b.id: ppl_b}
    return DedupDecision(keep.id, drop.id, DedupRule.LENGTH, ppl[keep.id], ppl[drop.id], similarity)
