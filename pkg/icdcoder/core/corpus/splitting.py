"""
Multi-label stratified train/dev/test splitting.

Implements iterative stratification: labels are processed rarest first, and
each still-unassigned example carrying the current label goes to the split
that most wants that label. This keeps per-label proportions close to the
requested ratios even for codes that occur only a handful of times.
"""

from __future__ import annotations

import heapq
import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from icdcoder.domain.errors import EmptyCorpus, ValidationError
from icdcoder.domain.models import CodedRecord, SplitRatios

logger = logging.getLogger(__name__)

SPLIT_NAMES: Tuple[str, str, str] = ("train", "dev", "test")


@dataclass(frozen=True)
class SplitResult:
    """
    Three disjoint partitions of a corpus, each in input order.
    """

    train: List[CodedRecord]
    dev: List[CodedRecord]
    test: List[CodedRecord]
    seed: int

    def parts(self) -> Tuple[List[CodedRecord], List[CodedRecord], List[CodedRecord]]:
        return (self.train, self.dev, self.test)

    def sizes(self) -> Dict[str, int]:
        return {name: len(part) for name, part in zip(SPLIT_NAMES, self.parts())}


def _pick_split(label_want: List[float], split_want: List[float], rng: random.Random) -> int:
    best = max(label_want)
    cands = [j for j, w in enumerate(label_want) if w == best]
    if len(cands) > 1:
        cap = max(split_want[j] for j in cands)
        cands = [j for j in cands if split_want[j] == cap]
    if len(cands) > 1:
        return cands[rng.randrange(len(cands))]
    return cands[0]


def stratified_split(records: Sequence[CodedRecord], ratios: SplitRatios, seed: int = 0) -> SplitResult:
    """
    Split records into train/dev/test preserving per-code proportions.

    Algorithm
    ---------
    1. Shuffle example order with a `random.Random(seed)` generator.
    2. Desired counts: ``ratio_j * N`` per split and ``ratio_j * |D_l|`` per
       split and label.
    3. While examples remain, take the label with the fewest unassigned
       examples (ties by code string) and assign each of its unassigned
       examples to the split with the largest desired count for that label;
       ties go to the split with the largest overall remaining capacity, then
       to a seeded random draw. Desired counts of every label of the example
       and of the split are decremented.

    Parameters
    ----------
    records
        Non-empty corpus; every record carries at least its main code.
    ratios
        Target proportions.
    seed
        Seed for the shuffle and the final tie-break.

    Returns
    -------
    SplitResult
        Exact partition of `records`; deterministic for a fixed seed.

    Raises
    ------
    EmptyCorpus
        If `records` is empty.
    """
    n = len(records)
    if n == 0:
        raise EmptyCorpus("cannot split an empty corpus")
    ids = [r.id for r in records]
    if len(set(ids)) != n:
        raise ValidationError("record ids must be unique to split a corpus")

    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)

    labels_of: List[List[str]] = [sorted(c.value for c in r.code_set()) for r in records]
    examples_of: Dict[str, List[int]] = defaultdict(list)
    for i in order:
        for lab in labels_of[i]:
            examples_of[lab].append(i)

    fractions = ratios.as_tuple()
    split_want = [f * n for f in fractions]
    label_want: Dict[str, List[float]] = {lab: [f * len(ex) for f in fractions] for lab, ex in examples_of.items()}
    remaining: Dict[str, int] = {lab: len(ex) for lab, ex in examples_of.items()}

    heap: List[Tuple[int, str]] = [(cnt, lab) for lab, cnt in remaining.items()]
    heapq.heapify(heap)

    assigned = [-1] * n
    left = n
    while left > 0 and heap:
        cnt, lab = heapq.heappop(heap)
        if cnt != remaining[lab] or cnt == 0:
            continue  # stale entry
        for i in examples_of[lab]:
            if assigned[i] >= 0:
                continue
            j = _pick_split(label_want[lab], split_want, rng)
            assigned[i] = j
            left -= 1
            split_want[j] -= 1.0
            for other in labels_of[i]:
                label_want[other][j] -= 1.0
                remaining[other] -= 1
                if other != lab and remaining[other] > 0:
                    heapq.heappush(heap, (remaining[other], other))

    parts: Tuple[List[CodedRecord], List[CodedRecord], List[CodedRecord]] = ([], [], [])
    for i, r in enumerate(records):
        parts[assigned[i]].append(r)

    result = SplitResult(train=parts[0], dev=parts[1], test=parts[2], seed=seed)
    logger.info("split %d records into %s (seed=%d)", n, result.sizes(), seed)
    return result
