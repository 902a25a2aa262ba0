"""
Unit tests for icdcoder.core.corpus.stats.

These tests validate hand-counted code frequencies, chapter histograms,
the per-split chapter table and section-combination coverage.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from icdcoder.core.corpus.stats import (
    chapter_histogram,
    code_frequency,
    cumulative_combinations,
    section_combinations,
    split_chapter_table,
)
from icdcoder.domain.models import CodedRecord, IcdCode, SectionKind


def _rec(rid: str, main: str, others: List[str] = (), sections: Optional[Dict[str, str]] = None) -> CodedRecord:
    secs = {SectionKind.DISCHARGE_DIAGNOSIS: f"diagnosis of {rid}"}
    for k, v in (sections or {}).items():
        secs[SectionKind.from_short_name(k)] = v
    return CodedRecord(id=rid, sections=secs, main_code=IcdCode(main), other_codes=tuple(IcdCode(c) for c in others))


def _fixture() -> List[CodedRecord]:
    return [
        _rec("r1", "I10", ["E11.9"]),
        _rec("r2", "I10", ["I25.10", "E78.5"], {"mh": "HTN"}),
        _rec("r3", "J18.9", ["I10"], {"op": "none", "mh": "smoker"}),
        _rec("r4", "E11.9", [], {"mh": "DM"}),
        _rec("r5", "N18.3", ["I10", "E11.9"], {"op": "AVF", "mh": "CKD", "pr": "n/a", "tc": "HD"}),
    ]


def test_code_frequency_empty() -> None:
    assert code_frequency([]).entries == ()


def test_code_frequency_two_identical_records() -> None:
    t = code_frequency([_rec("a", "I10"), _rec("b", "I10")])
    assert t.entries == ((IcdCode("I10"), 2),)


def test_code_frequency_hand_counted_fixture() -> None:
    t = code_frequency(_fixture())
    assert t.as_dict() == {"I10": 4, "E11.9": 3, "E78.5": 1, "I25.10": 1, "J18.9": 1, "N18.3": 1}
    assert [c.value for c in t.top_k(2)] == ["I10", "E11.9"]


def test_chapter_histogram_examples() -> None:
    assert chapter_histogram([_rec("a", "I10", ["I25.1"])]) == {"I": 2}
    assert chapter_histogram([_rec("a", "I10", ["E11.9"])]) == {"E": 1, "I": 1}
    assert chapter_histogram(_fixture()) == {"E": 4, "I": 5, "J": 1, "N": 1}


def test_split_chapter_table() -> None:
    f = _fixture()
    table = split_chapter_table(f[:3], f[3:4], f[4:])
    assert table == {"E": (2, 1, 1), "I": (4, 0, 1), "J": (1, 0, 0), "N": (0, 0, 1)}


def test_cumulative_combinations_order() -> None:
    labels = ["+".join(s.short_name for s in c) for c in cumulative_combinations()]
    assert labels == ["dd", "dd+mh", "dd+op", "dd+op+mh", "dd+op+mh+pr", "dd+op+mh+pr+tc"]


def test_section_combinations_counts_and_budget_share() -> None:
    stats = {s.label: s for s in section_combinations(_fixture(), length_fn=lambda r: len(r.present_sections()), budget=2)}
    assert (stats["dd"].containing, stats["dd"].exclusive) == (5, 1)
    assert (stats["dd+mh"].containing, stats["dd+mh"].exclusive) == (4, 2)
    assert (stats["dd+op+mh"].containing, stats["dd+op+mh"].exclusive) == (2, 1)
    assert (stats["dd+op+mh+pr+tc"].containing, stats["dd+op+mh+pr+tc"].exclusive) == (1, 1)
    # records with more than two sections: r3 and r5
    assert stats["dd"].over_budget_pct == 40.0
    assert stats["dd+op"].over_budget_pct == 100.0


def test_section_combinations_without_length_function() -> None:
    stats = section_combinations(_fixture())
    assert all(s.over_budget_pct is None for s in stats)
