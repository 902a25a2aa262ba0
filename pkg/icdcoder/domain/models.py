"""
Domain models and enums.

This module defines the core corpus-level types used across the system:
- ICD-10-CM diagnosis codes and their chapter key
- Discharge-summary sections and their checking priority
- Coded records (one discharge summary plus its gold codes)
- Split ratios and code frequency tables

These are immutable (frozen) dataclasses so records can be shared between
worker threads and pipeline stages without copying.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from icdcoder.domain.errors import CodeRejected, InvalidRatios, ValidationError

CODE_PATTERN = re.compile(r"^[A-Z][0-9][0-9A-Z](\.[0-9A-Z]{1,4})?$")


@dataclass(frozen=True, order=True)
class IcdCode:
    """
    Canonical ICD-10-CM diagnosis code.

    Parameters
    ----------
    value
        Uppercase code string without whitespace (e.g. ``"I10"``, ``"E11.9"``).

    Raises
    ------
    CodeRejected
        If `value` does not match the code pattern.
    """

    value: str

    def __post_init__(self) -> None:
        if not CODE_PATTERN.match(self.value):
            raise CodeRejected(self.value, "malformed")

    @property
    def chapter_key(self) -> str:
        """Chapter axis used for distribution plots: the leading letter."""
        return self.value[0]

    def __str__(self) -> str:
        return self.value


class SectionKind(str, Enum):
    """
    Named section of a semi-structured discharge summary.

    The enum value is the JSON key used in the corpus format. Each member has
    a checking priority (1 = most important) recommended by clinical coders;
    prompts list sections in this order and truncation removes the highest
    number first.

    Members
    -------
    DISCHARGE_DIAGNOSIS : str
        Discharge diagnosis, the anchor section present in every record.
    OPERATION_NOTE : str
        Operation note.
    MEDICAL_HISTORY : str
        Medical history (HPI, past history).
    PATHOLOGY_REPORT : str
        Pathology report.
    TREATMENT_COURSE : str
        Treatment course.
    """

    DISCHARGE_DIAGNOSIS = "discharge_diagnosis"
    OPERATION_NOTE = "operation_note"
    MEDICAL_HISTORY = "medical_history"
    PATHOLOGY_REPORT = "pathology_report"
    TREATMENT_COURSE = "treatment_course"

    @property
    def priority(self) -> int:
        return _SECTION_PRIORITY[self]

    @property
    def display_name(self) -> str:
        return _SECTION_DISPLAY[self]

    @property
    def short_name(self) -> str:
        return _SECTION_SHORT[self]

    @classmethod
    def by_priority(cls) -> List["SectionKind"]:
        """All sections ordered from priority 1 to 5."""
        return sorted(cls, key=lambda s: s.priority)

    @classmethod
    def from_short_name(cls, name: str) -> "SectionKind":
        key = name.strip().lower()
        for s in cls:
            if s.short_name == key or s.value == key:
                return s
        raise ValidationError(f"unknown section name: {name!r}")


_SECTION_PRIORITY: Dict[SectionKind, int] = {
    SectionKind.DISCHARGE_DIAGNOSIS: 1,
    SectionKind.OPERATION_NOTE: 2,
    SectionKind.MEDICAL_HISTORY: 3,
    SectionKind.PATHOLOGY_REPORT: 4,
    SectionKind.TREATMENT_COURSE: 5,
}

_SECTION_DISPLAY: Dict[SectionKind, str] = {
    SectionKind.DISCHARGE_DIAGNOSIS: "Discharge Diagnosis",
    SectionKind.OPERATION_NOTE: "Operation Note",
    SectionKind.MEDICAL_HISTORY: "Medical History",
    SectionKind.PATHOLOGY_REPORT: "Pathology Report",
    SectionKind.TREATMENT_COURSE: "Treatment Course",
}

_SECTION_SHORT: Dict[SectionKind, str] = {
    SectionKind.DISCHARGE_DIAGNOSIS: "dd",
    SectionKind.OPERATION_NOTE: "op",
    SectionKind.MEDICAL_HISTORY: "mh",
    SectionKind.PATHOLOGY_REPORT: "pr",
    SectionKind.TREATMENT_COURSE: "tc",
}


@dataclass(frozen=True)
class CodedRecord:
    """
    One discharge summary with its gold ICD-10-CM codes.

    Parameters
    ----------
    id
        Opaque record identifier.
    sections
        Section text keyed by kind; absent or ``None`` means the section is missing.
    main_code
        Principal diagnosis code.
    other_codes
        Secondary codes in their original order.

    Raises
    ------
    ValidationError
        If the discharge diagnosis is empty, the main code is repeated in
        `other_codes`, or `other_codes` contains duplicates.
    """

    id: str
    sections: Mapping[SectionKind, Optional[str]]
    main_code: IcdCode
    other_codes: Tuple[IcdCode, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "other_codes", tuple(self.other_codes))
        dd = self.sections.get(SectionKind.DISCHARGE_DIAGNOSIS)
        if not dd or not dd.strip():
            raise ValidationError(f"record {self.id!r}: discharge diagnosis is empty")
        if self.main_code in self.other_codes:
            raise ValidationError(f"record {self.id!r}: main code repeated in other codes")
        if len(set(self.other_codes)) != len(self.other_codes):
            raise ValidationError(f"record {self.id!r}: duplicate other codes")

    def section_text(self, kind: SectionKind) -> Optional[str]:
        text = self.sections.get(kind)
        return text if text else None

    def present_sections(self) -> FrozenSet[SectionKind]:
        """Sections with non-empty text."""
        return frozenset(k for k in SectionKind if self.section_text(k))

    def all_codes(self) -> Tuple[IcdCode, ...]:
        """Main code followed by the other codes."""
        return (self.main_code,) + self.other_codes

    def code_set(self) -> FrozenSet[IcdCode]:
        return frozenset(self.all_codes())

    def full_text(self) -> str:
        """Present sections concatenated in priority order, blank-line separated."""
        parts = [self.section_text(k) for k in SectionKind.by_priority()]
        return "\n\n".join(p for p in parts if p)


@dataclass(frozen=True)
class SplitRatios:
    """
    Train/dev/test proportions.

    Raises
    ------
    InvalidRatios
        If a fraction is outside (0, 1) or the fractions do not sum to 1.
    """

    train: float = 0.8
    dev: float = 0.1
    test: float = 0.1

    def __post_init__(self) -> None:
        for name, v in (("train", self.train), ("dev", self.dev), ("test", self.test)):
            if not 0.0 < v < 1.0:
                raise InvalidRatios(f"{name} ratio {v} is not in (0, 1)")
        if abs(self.train + self.dev + self.test - 1.0) > 1e-9:
            raise InvalidRatios("split ratios must sum to 1")

    @classmethod
    def parse(cls, text: str) -> "SplitRatios":
        """
        Parse ``"8:1:1"`` style weights (or fractions) into normalized ratios.
        """
        try:
            parts = [float(p) for p in text.split(":")]
        except ValueError as e:
            raise InvalidRatios(f"cannot parse ratios {text!r}") from e
        if len(parts) != 3 or any(p <= 0 for p in parts):
            raise InvalidRatios(f"expected three positive weights, got {text!r}")
        total = sum(parts)
        return cls(parts[0] / total, parts[1] / total, parts[2] / total)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.train, self.dev, self.test)


@dataclass(frozen=True)
class CodeFrequencyTable:
    """
    Code occurrence counts sorted by count descending, then code ascending.

    Parameters
    ----------
    entries
        ``(code, count)`` pairs in the canonical order.
    """

    entries: Tuple[Tuple[IcdCode, int], ...] = ()

    @classmethod
    def from_counts(cls, counts: Mapping[IcdCode, int]) -> "CodeFrequencyTable":
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].value))
        return cls(entries=tuple((c, int(n)) for c, n in ordered if n >= 1))

    def top_k(self, k: int) -> List[IcdCode]:
        return [c for c, _ in self.entries[: max(k, 0)]]

    def total(self) -> int:
        return sum(n for _, n in self.entries)

    def as_dict(self) -> Dict[str, int]:
        return {c.value: n for c, n in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Rejection:
    """
    One record dropped during cleaning.

    Parameters
    ----------
    id
        Record identifier (or ``"<line N>"`` when the id itself is missing).
    reason
        Short machine-readable reason (e.g. ``"no_codes"``, ``"malformed"``).
    """

    id: str
    reason: str


def unique_codes(codes: Iterable[IcdCode]) -> Tuple[List[IcdCode], List[IcdCode]]:
    """
    Remove duplicate codes keeping the first occurrence.

    Returns
    -------
    tuple
        ``(kept, dropped_duplicates)``.
    """
    seen = set()
    kept: List[IcdCode] = []
    dropped: List[IcdCode] = []
    for c in codes:
        if c in seen:
            dropped.append(c)
            continue
        seen.add(c)
        kept.append(c)
    return kept, dropped
