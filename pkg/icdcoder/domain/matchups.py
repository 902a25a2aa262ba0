"""
Pairwise judging domain models.

A `MatchupObservation` records *what the judge said* about one probe code for
one ordered pair of candidate models. The challenger is always the model shown
in position A, the opponent the model shown in position B; `order` tells
whether that presentation follows the candidate list order (1) or is the
swapped presentation used to audit position bias (2).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from icdcoder.domain.errors import ValidationError
from icdcoder.domain.models import IcdCode


class Verdict(str, Enum):
    """
    Judge verdict in position terms.

    Members
    -------
    A : str
        The response in position A (the challenger) is better.
    B : str
        The response in position B (the opponent) is better.
    TIE : str
        No clear preference could be extracted.
    """

    A = "A"
    B = "B"
    TIE = "tie"


class OrderPolicy(str, Enum):
    """
    How candidates are placed in the A/B slots of the judge prompt.

    Members
    -------
    FIXED : str
        One judgement per pair and probe; the earlier candidate is position A.
    BOTH : str
        Two judgements per pair and probe, one in each presentation order.
    """

    FIXED = "fixed"
    BOTH = "both"


@dataclass(frozen=True)
class MatchupObservation:
    """
    One judged comparison.

    Parameters
    ----------
    probe_code
        ICD-10-CM code both candidates were asked to describe.
    challenger
        Model shown in position A.
    opponent
        Model shown in position B.
    verdict
        Parsed judge verdict.
    raw_judge_output
        Unparsed judge text.
    order
        1 for candidate-list order, 2 for the swapped presentation.
    """

    probe_code: IcdCode
    challenger: str
    opponent: str
    verdict: Verdict
    raw_judge_output: str = ""
    order: int = 1

    def __post_init__(self) -> None:
        if self.challenger == self.opponent:
            raise ValidationError("challenger and opponent must differ")
        if self.order not in (1, 2):
            raise ValidationError("order must be 1 or 2")

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.challenger, self.opponent, self.probe_code.value)

    @property
    def winner(self) -> Optional[str]:
        if self.verdict is Verdict.A:
            return self.challenger
        if self.verdict is Verdict.B:
            return self.opponent
        return None

    def to_json(self) -> Dict[str, Any]:
        return {
            "probe": self.probe_code.value,
            "challenger": self.challenger,
            "opponent": self.opponent,
            "verdict": self.verdict.value,
            "raw": self.raw_judge_output,
            "order": self.order,
        }

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "MatchupObservation":
        return cls(
            probe_code=IcdCode(str(obj["probe"]).strip().upper()),
            challenger=str(obj["challenger"]),
            opponent=str(obj["opponent"]),
            verdict=Verdict(obj["verdict"]),
            raw_judge_output=str(obj.get("raw", "")),
            order=int(obj.get("order", 1)),
        )


@dataclass(frozen=True)
class MatchupFailure:
    """
    A matchup that could not be judged.

    Parameters
    ----------
    challenger, opponent
        Models in positions A and B.
    probe_code
        Probe code of the matchup.
    error
        Human-readable failure description.
    """

    challenger: str
    opponent: str
    probe_code: IcdCode
    error: str

    def to_json(self) -> Dict[str, Any]:
        return {
            "challenger": self.challenger,
            "opponent": self.opponent,
            "probe": self.probe_code.value,
            "error": self.error,
        }
