"""
Unit tests for icdcoder.domain.models.

These tests verify:
- Enum stability (section keys, priorities, short names)
- Dataclass immutability (frozen models)
- Record invariants (non-empty discharge diagnosis, duplicate-free codes)
- Split ratio parsing and code frequency ordering
"""

from __future__ import annotations

from dataclasses import FrozenInstanceError

import pytest

from icdcoder.domain.errors import CodeRejected, InvalidRatios, ValidationError
from icdcoder.domain.models import (
    CodedRecord,
    CodeFrequencyTable,
    IcdCode,
    SectionKind,
    SplitRatios,
    unique_codes,
)


def _mk_record(rid: str = "r1", dd: str = "Essential hypertension", **sections: str) -> CodedRecord:
    secs = {SectionKind.DISCHARGE_DIAGNOSIS: dd}
    for k, v in sections.items():
        secs[SectionKind(k)] = v
    return CodedRecord(id=rid, sections=secs, main_code=IcdCode("I10"), other_codes=(IcdCode("E11.9"),))


def test_section_kind_values_are_corpus_keys() -> None:
    """
    SectionKind values double as JSON keys of the corpus format and must not change.
    """
    assert SectionKind.DISCHARGE_DIAGNOSIS.value == "discharge_diagnosis"
    assert SectionKind.OPERATION_NOTE.value == "operation_note"
    assert SectionKind.MEDICAL_HISTORY.value == "medical_history"
    assert SectionKind.PATHOLOGY_REPORT.value == "pathology_report"
    assert SectionKind.TREATMENT_COURSE.value == "treatment_course"


def test_section_priority_order() -> None:
    assert [s.short_name for s in SectionKind.by_priority()] == ["dd", "op", "mh", "pr", "tc"]
    assert SectionKind.DISCHARGE_DIAGNOSIS.priority == 1
    assert SectionKind.TREATMENT_COURSE.priority == 5


def test_section_from_short_name_accepts_both_spellings() -> None:
    assert SectionKind.from_short_name(" MH ") is SectionKind.MEDICAL_HISTORY
    assert SectionKind.from_short_name("pathology_report") is SectionKind.PATHOLOGY_REPORT
    with pytest.raises(ValidationError):
        SectionKind.from_short_name("xx")


def test_icd_code_chapter_key_and_pattern() -> None:
    assert IcdCode("I10").chapter_key == "I"
    assert IcdCode("E11.9").chapter_key == "E"
    with pytest.raises(CodeRejected):
        IcdCode("i10")


def test_coded_record_is_frozen() -> None:
    r = _mk_record()
    with pytest.raises(FrozenInstanceError):
        r.id = "x"  # type: ignore[misc]


def test_coded_record_rejects_empty_discharge_diagnosis() -> None:
    with pytest.raises(ValidationError):
        _mk_record(dd="   ")


def test_coded_record_rejects_main_code_in_others() -> None:
    with pytest.raises(ValidationError):
        CodedRecord(
            id="r",
            sections={SectionKind.DISCHARGE_DIAGNOSIS: "x"},
            main_code=IcdCode("I10"),
            other_codes=(IcdCode("I10"),),
        )


def test_coded_record_views() -> None:
    r = _mk_record(medical_history="HTN for 10 years", treatment_course="")
    assert r.present_sections() == {SectionKind.DISCHARGE_DIAGNOSIS, SectionKind.MEDICAL_HISTORY}
    assert r.all_codes() == (IcdCode("I10"), IcdCode("E11.9"))
    assert r.code_set() == {IcdCode("I10"), IcdCode("E11.9")}
    assert r.full_text() == "Essential hypertension\n\nHTN for 10 years"
    assert r.section_text(SectionKind.TREATMENT_COURSE) is None


def test_split_ratios_parse_weights() -> None:
    r = SplitRatios.parse("8:1:1")
    assert r.as_tuple() == pytest.approx((0.8, 0.1, 0.1))


@pytest.mark.parametrize("text", ["8:1", "8:0:2", "a:b:c", "-1:1:1"])
def test_split_ratios_parse_rejects_bad_input(text: str) -> None:
    with pytest.raises(InvalidRatios):
        SplitRatios.parse(text)


def test_split_ratios_must_sum_to_one() -> None:
    with pytest.raises(InvalidRatios):
        SplitRatios(0.5, 0.3, 0.3)


def test_code_frequency_table_order_and_top_k() -> None:
    t = CodeFrequencyTable.from_counts({IcdCode("E11.9"): 2, IcdCode("I10"): 5, IcdCode("A09"): 2})
    assert [c.value for c in t.top_k(10)] == ["I10", "A09", "E11.9"]
    assert [c.value for c in t.top_k(1)] == ["I10"]
    assert t.total() == 9
    assert t.as_dict() == {"I10": 5, "A09": 2, "E11.9": 2}


def test_unique_codes_keeps_first_occurrence() -> None:
    kept, dropped = unique_codes([IcdCode("I10"), IcdCode("E11.9"), IcdCode("I10")])
    assert kept == [IcdCode("I10"), IcdCode("E11.9")]
    assert dropped == [IcdCode("I10")]
