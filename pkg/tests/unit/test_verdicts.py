"""
Unit tests for icdcoder.core.judging.verdicts.

parse_verdict is total: every input yields A, B or TIE, and the first
matching rule of the cascade decides.
"""

from __future__ import annotations

import random
import string

import pytest

from icdcoder.core.judging.verdicts import parse_verdict
from icdcoder.domain.matchups import Verdict


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("B", Verdict.B),
        ("A", Verdict.A),
        ("  [[A]] ", Verdict.A),
        ("B.", Verdict.B),
        ("Verdict: B", Verdict.B),
        ("Final answer: [[A]]", Verdict.A),
        ("2 (Note: This result does NOT follow your format)", Verdict.B),
        ("1", Verdict.A),
        ("Response A is better", Verdict.A),
        ("I think response b is the better one", Verdict.B),
        ("I find both responses adequate.", Verdict.TIE),
        ("", Verdict.TIE),
        ("12 items", Verdict.TIE),
    ],
)
def test_parse_verdict_examples(raw: str, expected: Verdict) -> None:
    assert parse_verdict(raw) is expected


def test_parse_verdict_never_raises() -> None:
    rng = random.Random(0)
    alphabet = string.printable + "ÄБ中"
    for _ in range(500):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
        assert parse_verdict(text) in (Verdict.A, Verdict.B, Verdict.TIE)
    assert parse_verdict(None) is Verdict.TIE  # type: ignore[arg-type]
