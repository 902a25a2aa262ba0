"""
Unit tests for icdcoder.core.prompting.template.

These tests validate:
- universal prompts carry all five section headers, missing ones as "Nil"
- section-specific prompts only carry present sections of their mode
- priority-based truncation (lowest priority first, discharge diagnosis last)
- budget compliance on fuzzed records
"""

from __future__ import annotations

import random
import string
from typing import Dict

import pytest

from icdcoder.core.prompting.template import (
    HEADER_PREFIX,
    PromptKind,
    PromptMode,
    build_prompt,
    incremental_modes,
    render_prompt,
    truncate_sections,
)
from icdcoder.core.prompting.tokens import TokenBudget, whitespace_tokenizer
from icdcoder.domain.errors import BudgetTooSmall, ValidationError
from icdcoder.domain.models import CodedRecord, IcdCode, SectionKind


def _rec(**sections: str) -> CodedRecord:
    secs: Dict[SectionKind, str] = {SectionKind.from_short_name(k): v for k, v in sections.items()}
    return CodedRecord(id="r1", sections=secs, main_code=IcdCode("I10"))


def _words(n: int, tag: str = "w") -> str:
    return " ".join(f"{tag}{i}" for i in range(n))


def _headers(text: str):
    return [line[len(HEADER_PREFIX):] for line in text.split("\n") if line.startswith(HEADER_PREFIX)]


# ---- modes ----


def test_mode_parsing_and_labels() -> None:
    assert PromptMode.parse("universal").label == "universal"
    m = PromptMode.parse("specific", "mh")
    assert m.kind is PromptKind.SPECIFIC
    assert m.included_sections == (SectionKind.DISCHARGE_DIAGNOSIS, SectionKind.MEDICAL_HISTORY)
    assert m.label == "dd+mh"
    assert PromptMode.parse("SPECIFIC", "tc,dd,op").label == "dd+op+tc"
    with pytest.raises(ValidationError):
        PromptMode.parse("mixed")
    with pytest.raises(ValidationError):
        PromptMode(PromptKind.SPECIFIC, (SectionKind.MEDICAL_HISTORY,))
    assert [x.label for x in incremental_modes()] == ["dd", "dd+op", "dd+op+mh", "dd+op+mh+pr", "dd+op+mh+pr+tc"]


# ---- rendering ----


def test_universal_fills_missing_sections_with_nil() -> None:
    text = render_prompt(_rec(dd="Essential hypertension"), PromptMode.universal())
    assert _headers(text) == [
        "Discharge Diagnosis",
        "Operation Note",
        "Medical History",
        "Pathology Report",
        "Treatment Course",
    ]
    assert text.split("\n").count("Nil") == 4
    assert "### Discharge Diagnosis\nEssential hypertension" in text


def test_specific_omits_absent_sections() -> None:
    rec = _rec(dd="Essential hypertension", tc="Amlodipine started")
    assert _headers(render_prompt(rec, PromptMode.specific([SectionKind.DISCHARGE_DIAGNOSIS]))) == [
        "Discharge Diagnosis"
    ]
    text = render_prompt(rec, PromptMode.parse("specific", "mh,tc"))
    assert _headers(text) == ["Discharge Diagnosis", "Treatment Course"]
    assert "Nil" not in text


def test_record_within_budget_has_no_warnings() -> None:
    p = build_prompt(_rec(dd="Essential hypertension", mh="HTN"), PromptMode.universal())
    assert p.warnings == ()
    assert p.token_count == whitespace_tokenizer.count(p.text)


def test_over_budget_record_keeps_diagnosis() -> None:
    rec = _rec(dd=_words(5, "dx"), op=_words(40, "op"), mh=_words(40, "mh"), tc=_words(40, "tc"))
    p = build_prompt(rec, PromptMode.universal(), TokenBudget(max_tokens=100))
    assert p.token_count <= 100
    assert _words(5, "dx") in p.text
    assert any("Treatment Course" in w for w in p.warnings)
    assert "op39" not in p.text or "tc39" not in p.text


def test_budget_too_small() -> None:
    with pytest.raises(BudgetTooSmall):
        build_prompt(_rec(dd="x"), PromptMode.universal(), TokenBudget(max_tokens=64), instruction=_words(80))


@pytest.mark.parametrize("seed", range(10))
def test_fuzzed_records_respect_budget(seed: int) -> None:
    rng = random.Random(seed)
    for _ in range(30):
        sections = {"dd": " ".join(rng.choice(string.ascii_letters) * rng.randint(1, 6) for _ in range(rng.randint(1, 10)))}
        for short in ("op", "mh", "pr", "tc"):
            if rng.random() < 0.6:
                sections[short] = _words(rng.randint(1, 300), short)
        rec = _rec(**sections)
        budget = TokenBudget(max_tokens=rng.randint(64, 400))
        mode = rng.choice([PromptMode.universal()] + incremental_modes())
        p = build_prompt(rec, mode, budget)
        assert whitespace_tokenizer.count(p.text) <= budget.max_tokens
        assert sections["dd"] in p.text
        if mode.kind is PromptKind.UNIVERSAL:
            assert len(_headers(p.text)) == 5


# ---- truncation ----


def test_truncation_only_shortens_lowest_priority() -> None:
    sections = [(k, _words(10, k.short_name)) for k in SectionKind.by_priority()]
    out, warnings = truncate_sections(sections, 45)
    assert [whitespace_tokenizer.count(t) for _, t in out] == [10, 10, 10, 10, 5]
    assert out[4][1] == _words(5, "tc")
    assert warnings == ["Treatment Course truncated to 5 of 10 tokens"]


def test_truncation_identity_within_budget() -> None:
    sections = [(SectionKind.MEDICAL_HISTORY, "b c"), (SectionKind.DISCHARGE_DIAGNOSIS, "a")]
    out, warnings = truncate_sections(sections, 3)
    assert out == [(SectionKind.DISCHARGE_DIAGNOSIS, "a"), (SectionKind.MEDICAL_HISTORY, "b c")]
    assert warnings == []


def test_truncation_two_full_removals_recount() -> None:
    sections = [
        (SectionKind.DISCHARGE_DIAGNOSIS, _words(10, "dd")),
        (SectionKind.MEDICAL_HISTORY, _words(8, "mh")),
        (SectionKind.TREATMENT_COURSE, _words(6, "tc")),
    ]
    out, warnings = truncate_sections(sections, 10)
    assert sum(whitespace_tokenizer.count(t) for _, t in out) == 10
    assert out == [
        (SectionKind.DISCHARGE_DIAGNOSIS, _words(10, "dd")),
        (SectionKind.MEDICAL_HISTORY, ""),
        (SectionKind.TREATMENT_COURSE, ""),
    ]
    assert warnings == ["Treatment Course removed (6 tokens)", "Medical History removed (8 tokens)"]


def test_truncation_cuts_diagnosis_only_when_alone_too_long() -> None:
    out, warnings = truncate_sections([(SectionKind.DISCHARGE_DIAGNOSIS, _words(10, "dd"))], 4)
    assert out == [(SectionKind.DISCHARGE_DIAGNOSIS, _words(4, "dd"))]
    assert "alone exceeds" in warnings[0]
    with pytest.raises(ValidationError):
        truncate_sections([(SectionKind.MEDICAL_HISTORY, "x")], 4)
