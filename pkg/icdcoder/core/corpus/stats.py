"""
Corpus statistics: code frequencies, chapter histograms and section combinations.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from icdcoder.domain.models import CodeFrequencyTable, CodedRecord, IcdCode, SectionKind


def code_frequency(records: Iterable[CodedRecord]) -> CodeFrequencyTable:
    """
    Count code occurrences; each record contributes each of its codes once.

    The main code counts exactly like the other codes.
    """
    counts: Counter = Counter()
    for r in records:
        counts.update(r.code_set())
    return CodeFrequencyTable.from_counts(counts)


def top_k(table: CodeFrequencyTable, k: int) -> List[IcdCode]:
    """First `k` codes of the table (the most frequent ones)."""
    return table.top_k(k)


def chapter_histogram(records: Iterable[CodedRecord]) -> Dict[str, int]:
    """
    Code occurrences grouped by chapter key, sorted by chapter letter.
    """
    counts: Counter = Counter()
    for r in records:
        counts.update(c.chapter_key for c in r.code_set())
    return dict(sorted(counts.items()))


def split_chapter_table(
    train: Sequence[CodedRecord],
    dev: Sequence[CodedRecord],
    test: Sequence[CodedRecord],
) -> Dict[str, Tuple[int, int, int]]:
    """Per-chapter code occurrences in each split: ``chapter -> (train, dev, test)``."""
    hists = [chapter_histogram(part) for part in (train, dev, test)]
    chapters = sorted(set().union(*hists))
    return {ch: (hists[0].get(ch, 0), hists[1].get(ch, 0), hists[2].get(ch, 0)) for ch in chapters}


@dataclass(frozen=True)
class SectionCombinationStat:
    """
    Section-combination coverage of a corpus.

    Parameters
    ----------
    sections
        The combination, in priority order.
    containing
        Records whose present sections include the combination.
    exclusive
        Records whose present sections are exactly the combination.
    over_budget_pct
        Percentage of `containing` records whose measured length exceeds the budget
        (``None`` when no length function was supplied or nothing contains it).
    """

    sections: Tuple[SectionKind, ...]
    containing: int
    exclusive: int
    over_budget_pct: Optional[float] = None

    @property
    def label(self) -> str:
        return "+".join(s.short_name for s in self.sections)


def cumulative_combinations() -> List[Tuple[SectionKind, ...]]:
    """
    Section combinations examined by default.

    The cumulative priority chain (dd, dd+op, dd+op+mh, ...) plus the
    discharge-diagnosis + medical-history pair, the most common co-occurrence.
    """
    order = SectionKind.by_priority()
    chain = [tuple(order[: i + 1]) for i in range(len(order))]
    pair = (SectionKind.DISCHARGE_DIAGNOSIS, SectionKind.MEDICAL_HISTORY)
    return chain[:1] + [pair] + chain[1:]


def section_combinations(
    records: Sequence[CodedRecord],
    combinations: Optional[Sequence[Sequence[SectionKind]]] = None,
    length_fn: Optional[Callable[[CodedRecord], int]] = None,
    budget: Optional[int] = None,
) -> List[SectionCombinationStat]:
    """
    Count records containing (and exclusively containing) each section combination.

    Parameters
    ----------
    records
        Cleaned records.
    combinations
        Combinations to report; defaults to `cumulative_combinations()`.
    length_fn
        Optional token-length function (e.g. token count of the rendered prompt).
    budget
        Token budget compared against `length_fn`.
    """
    combos = [tuple(sorted(c, key=lambda s: s.priority)) for c in (combinations or cumulative_combinations())]
    present: List[FrozenSet[SectionKind]] = [r.present_sections() for r in records]
    lengths: Optional[List[int]] = None
    if length_fn is not None and budget is not None:
        lengths = [length_fn(r) for r in records]

    out: List[SectionCombinationStat] = []
    for combo in combos:
        want = frozenset(combo)
        idx = [i for i, p in enumerate(present) if want <= p]
        exclusive = sum(1 for i in idx if present[i] == want)
        pct: Optional[float] = None
        if lengths is not None and idx:
            over = sum(1 for i in idx if lengths[i] > budget)  # type: ignore[operator]
            pct = 100.0 * over / len(idx)
        out.append(SectionCombinationStat(sections=combo, containing=len(idx), exclusive=exclusive, over_budget_pct=pct))
    return out
