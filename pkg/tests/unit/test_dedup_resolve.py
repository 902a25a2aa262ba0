"""
Unit tests for icdcoder.core.dedup.resolve.

The perplexity rule needs the higher perplexity to be at least 5 % above the
lower one; otherwise the longer text is kept and equal lengths keep the
smaller id.
"""

from __future__ import annotations

import pytest

from icdcoder.core.dedup.resolve import DedupRule, resolve_pair
from icdcoder.domain.errors import ValidationError
from icdcoder.domain.models import CodedRecord, IcdCode, SectionKind


def _rec(rid: str, text: str) -> CodedRecord:
    return CodedRecord(id=rid, sections={SectionKind.DISCHARGE_DIAGNOSIS: text}, main_code=IcdCode("I10"))


SHORT = _rec("r1", "Essential hypertension")
LONG = _rec("r2", "Essential hypertension, poorly controlled")


def test_perplexity_rule_keeps_higher() -> None:
    d = resolve_pair(SHORT, LONG, 12.0, 11.0)
    assert (d.kept_id, d.removed_id, d.rule) == ("r1", "r2", DedupRule.PPL)
    assert (d.ppl_kept, d.ppl_removed) == (12.0, 11.0)


def test_small_gap_falls_back_to_length() -> None:
    d = resolve_pair(SHORT, LONG, 10.2, 10.0)
    assert (d.kept_id, d.rule) == ("r2", DedupRule.LENGTH)
    assert (d.ppl_kept, d.ppl_removed) == (10.0, 10.2)


def test_margin_boundary() -> None:
    assert resolve_pair(SHORT, LONG, 10.5, 10.0).rule is DedupRule.PPL
    assert resolve_pair(SHORT, LONG, 10.5, 10.0).kept_id == "r1"
    at_1049 = resolve_pair(SHORT, LONG, 10.49, 10.0)
    assert (at_1049.rule, at_1049.kept_id) == (DedupRule.LENGTH, "r2")


def test_equal_everything_keeps_smaller_id() -> None:
    a, b = _rec("r1", "same text"), _rec("r2", "same text")
    assert resolve_pair(b, a, 7.0, 7.0).kept_id == "r1"
    assert resolve_pair(a, b, 7.0, 7.0).removed_id == "r2"


def test_custom_margin_and_json() -> None:
    d = resolve_pair(SHORT, LONG, 10.2, 10.0, similarity=0.93, ppl_margin=0.01)
    assert d.rule is DedupRule.PPL
    assert d.to_json() == {
        "kept": "r1",
        "removed": "r2",
        "rule": "ppl",
        "ppl_kept": 10.2,
        "ppl_removed": 10.0,
        "similarity": 0.93,
    }


def test_invalid_arguments() -> None:
    with pytest.raises(ValidationError):
        resolve_pair(SHORT, LONG, 0.0, 1.0)
    with pytest.raises(ValidationError):
        resolve_pair(SHORT, LONG, 2.0, 1.0, ppl_margin=-0.1)
