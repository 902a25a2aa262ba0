"""
Redundancy-aware sampling.

Every record is embedded and paired with its nearest neighbour. A pair is
redundant when the neighbour is more similar than the threshold *and* both
records carry exactly the same code set. Pairs are resolved greedily with
`resolve_pair`, most similar first and by ids within equal similarity; a pair
whose member was already removed is skipped, so no record is removed twice.
The pairs kept at a higher threshold are a prefix of those at a lower one, so
raising the threshold never removes more records.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import stats

from icdcoder.core.dedup.index import IndexKind, build_index
from icdcoder.core.dedup.resolve import DEFAULT_PPL_MARGIN, DedupDecision, resolve_pair
from icdcoder.domain.errors import AlignmentError, DegenerateInput, ModelClientError, ValidationError
from icdcoder.domain.models import CodedRecord
from icdcoder.runtime.worker_pool import BoundedWorkerPool
from icdcoder.transport.base import EmbeddingVector, ModelClient, perplexity

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.9
SIMILARITY_DEFINITION = "cosine similarity of unit embeddings, 1 - L2^2 / 2"


@dataclass(frozen=True)
class RedundantPair:
    """Canonical pair (``first_id < second_id``) of near-duplicate records."""

    first_id: str
    second_id: str
    similarity: float


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Sample Pearson correlation.

    Raises
    ------
    AlignmentError
        Lengths differ.
    DegenerateInput
        Fewer than two points or zero variance.
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape:
        raise AlignmentError(f"length mismatch: {xs.size} vs {ys.size}")
    if xs.size < 2:
        raise DegenerateInput("pearson needs at least two points")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise DegenerateInput("pearson is undefined for zero variance")
    r, _ = stats.pearsonr(xs, ys)
    return float(np.clip(r, -1.0, 1.0))


def find_redundant_pairs(
    records: Sequence[CodedRecord],
    vectors: Sequence[EmbeddingVector],
    threshold: float = DEFAULT_THRESHOLD,
    index_kind: IndexKind = IndexKind.EXACT,
) -> List[RedundantPair]:
    """
    Canonical, de-duplicated near-duplicate pairs, most similar first.

    Raises
    ------
    AlignmentError
        `records` and `vectors` differ in length.
    ValidationError
        `threshold` outside (0, 1).
    """
    if len(records) != len(vectors):
        raise AlignmentError(f"{len(records)} records but {len(vectors)} vectors")
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    if len(records) < 2:
        return []

    by_id = {r.id: r for r in records}
    index = build_index([r.id for r in records], vectors, index_kind)
    pairs: Dict[Tuple[str, str], float] = {}
    for hit in index.all_nearest(threshold):
        if hit is None or hit.similarity <= threshold:
            continue
        if by_id[hit.query_id].code_set() != by_id[hit.neighbor_id].code_set():
            continue
        key = tuple(sorted((hit.query_id, hit.neighbor_id)))
        pairs[key] = max(pairs.get(key, -1.0), hit.similarity)  # type: ignore[index]

    ordered = sorted(pairs.items(), key=lambda kv: (-kv[1], kv[0]))
    return [RedundantPair(a, b, s) for (a, b), s in ordered]


@dataclass
class DedupReport:
    """
    Summary of a deduplication run.

    Parameters
    ----------
    before_count, after_count
        Corpus sizes.
    decisions
        One entry per removed record.
    chapter_reduction
        Main-code chapter -> (before, after).
    pearson_r
        Correlation between chapter sizes and chapter reductions; ``None``
        when undefined (fewer than two chapters or zero variance).
    """

    before_count: int
    after_count: int
    decisions: List[DedupDecision] = field(default_factory=list)
    chapter_reduction: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    pearson_r: Optional[float] = None
    threshold: float = DEFAULT_THRESHOLD
    ppl_margin: float = DEFAULT_PPL_MARGIN
    index_kind: str = IndexKind.EXACT.value
    pairs_found: int = 0

    def __post_init__(self) -> None:
        if self.after_count != self.before_count - len(self.decisions):
            raise ValidationError("after_count must equal before_count minus removals")

    def to_json(self) -> Dict[str, Any]:
        return {
            "similarity": SIMILARITY_DEFINITION,
            "threshold": self.threshold,
            "ppl_margin": self.ppl_margin,
            "index": self.index_kind,
            "before_count": self.before_count,
            "after_count": self.after_count,
            "pairs_found": self.pairs_found,
            "pearson_r": self.pearson_r,
            "chapter_reduction": {k: list(v) for k, v in self.chapter_reduction.items()},
            "decisions": [d.to_json() for d in self.decisions],
        }


def chapter_reduction(
    before: Sequence[CodedRecord],
    after: Sequence[CodedRecord],
) -> Dict[str, Tuple[int, int]]:
    """
    Records per chapter before and after, keyed by the main code's chapter.

    Each record counts once, under its main code. `chapter_histogram` in the
    corpus stats counts every code instead, so the two tables differ for
    records whose other codes fall in other chapters.
    """
    b = Counter(r.main_code.chapter_key for r in before)
    a = Counter(r.main_code.chapter_key for r in after)
    return {ch: (b[ch], a.get(ch, 0)) for ch in sorted(b)}


def _reduction_correlation(table: Dict[str, Tuple[int, int]]) -> Optional[float]:
    sizes = [before for before, _ in table.values()]
    drops = [before - after for before, after in table.values()]
    try:
        return pearson(sizes, drops)
    except DegenerateInput as e:
        logger.info("chapter correlation undefined: %s", e)
        return None


def _gather(
    pool: BoundedWorkerPool,
    fn: Any,
    records: Sequence[CodedRecord],
    what: str,
) -> Dict[str, Any]:
    outcomes = pool.run(fn, [(r.id, r) for r in records])
    for rid, o in outcomes.items():
        if not o.ok:
            err = o.error
            if isinstance(err, ModelClientError):
                err.args = (f"{what} failed for record {rid!r}: {err}",)
                setattr(err, "record_id", rid)
            raise err  # type: ignore[misc]
    return {rid: o.value for rid, o in outcomes.items()}


def deduplicate(
    records: Sequence[CodedRecord],
    client: ModelClient,
    threshold: float = DEFAULT_THRESHOLD,
    *,
    ppl_margin: float = DEFAULT_PPL_MARGIN,
    index_kind: IndexKind = IndexKind.EXACT,
    parallelism: int = 1,
    ppl_client: Optional[ModelClient] = None,
) -> Tuple[List[CodedRecord], DedupReport]:
    """
    Remove one record of every redundant pair.

    Parameters
    ----------
    records
        Cleaned records with unique ids.
    client
        Embedding client; also scores perplexity unless `ppl_client` is set.
    threshold
        Similarity a neighbour must exceed.
    ppl_margin
        Relative perplexity gap for the PPL rule.
    index_kind
        Nearest-neighbour backend.
    parallelism
        Bound on concurrent client calls.

    Returns
    -------
    (kept, report)
        Surviving records in input order and the run report.
    """
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValidationError("record ids must be unique")
    scorer = ppl_client or client
    pool = BoundedWorkerPool(parallelism=parallelism, name="icdcoder-dedup")

    vectors = _gather(pool, lambda r: client.embed(r.full_text()), records, "embedding")
    pairs = find_redundant_pairs(records, [vectors[i] for i in ids], threshold, index_kind)

    involved = sorted({p.first_id for p in pairs} | {p.second_id for p in pairs})
    by_id = {r.id: r for r in records}
    ppl = _gather(
        pool,
        lambda r: perplexity(scorer.token_logprobs(r.full_text())),
        [by_id[i] for i in involved],
        "perplexity",
    )

    removed: Set[str] = set()
    decisions: List[DedupDecision] = []
    for p in pairs:
        if p.first_id in removed or p.second_id in removed:
            continue
        d = resolve_pair(
            by_id[p.first_id], by_id[p.second_id], ppl[p.first_id], ppl[p.second_id], p.similarity, ppl_margin
        )
        removed.add(d.removed_id)
        decisions.append(d)

    kept = [r for r in records if r.id not in removed]
    table = chapter_reduction(records, kept)
    report = DedupReport(
        before_count=len(records),
        after_count=len(kept),
        decisions=decisions,
        chapter_reduction=table,
        pearson_r=_reduction_correlation(table),
        threshold=threshold,
        ppl_margin=ppl_margin,
        index_kind=IndexKind(index_kind).value,
        pairs_found=len(pairs),
    )
    logger.info(
        "dedup: %d -> %d records (%d pairs, threshold %.3f)",
        report.before_count,
        report.after_count,
        len(pairs),
        threshold,
    )
    return kept, report
