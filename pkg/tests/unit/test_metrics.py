"""
Unit tests for icdcoder.core.evaluation.metrics.

These tests validate:
- micro precision/recall/F1 on hand-counted fixtures
- MDCA exact-match semantics (scope ignored)
- top-K scope filtering of both gold and predictions
- missing prediction handling and the zero-denominator convention
- order invariance and aggregation properties
"""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Sequence

import pytest

from icdcoder.core.corpus.stats import code_frequency
from icdcoder.core.evaluation.metrics import (
    Scope,
    ScoredRun,
    align_predictions,
    evaluate,
    matched_subset,
    mdca,
    micro_prf,
    prediction_from_json,
    scope_codes,
)
from icdcoder.core.prompting.target import PredictionCodes
from icdcoder.domain.errors import AlignmentError, InvalidScope, MissingPrediction
from icdcoder.domain.models import CodedRecord, CodeFrequencyTable, IcdCode, SectionKind


def _gold(rid: str, codes: Sequence[str], **sections: str) -> CodedRecord:
    secs = {SectionKind.DISCHARGE_DIAGNOSIS: "dx"}
    secs.update({SectionKind.from_short_name(k): v for k, v in sections.items()})
    return CodedRecord(
        id=rid, sections=secs, main_code=IcdCode(codes[0]), other_codes=tuple(IcdCode(c) for c in codes[1:])
    )


def _pred(main: Optional[str], others: Sequence[str] = ()) -> PredictionCodes:
    return PredictionCodes(
        main_code=IcdCode(main) if main else None, other_codes=tuple(IcdCode(c) for c in others)
    )


def _table(counts: Dict[str, int]) -> CodeFrequencyTable:
    return CodeFrequencyTable.from_counts({IcdCode(c): n for c, n in counts.items()})


def test_hand_counted_fixture() -> None:
    run = ScoredRun(
        (_gold("r1", ["A00", "B00", "C00"]), _gold("r2", ["A00"])),
        (_pred("A00", ["B00", "D00"]), _pred("A00")),
    )
    r = micro_prf(run)
    assert (r.tp, r.fp, r.fn) == (3, 1, 1)
    assert (r.precision, r.recall, r.f1) == pytest.approx((0.75, 0.75, 0.75))
    assert r.zero_denominator == ()
    assert r.scope == "full"


def test_perfect_and_empty_predictions() -> None:
    gold = (_gold("r1", ["I10", "E11.9"]), _gold("r2", ["J18.9"]))
    perfect = micro_prf(ScoredRun(gold, (_pred("I10", ["E11.9"]), _pred("J18.9"))))
    assert (perfect.precision, perfect.recall, perfect.f1, perfect.mdca) == (1.0, 1.0, 1.0, 1.0)

    empty = micro_prf(ScoredRun(gold, (_pred(None), _pred(None))))
    assert (empty.precision, empty.recall, empty.f1, empty.mdca) == (0.0, 0.0, 0.0, 0.0)
    assert empty.zero_denominator == ("precision", "f1")


def test_mdca_examples() -> None:
    gold = (_gold("r1", ["I10"]), _gold("r2", ["E11.9"]))
    assert mdca(ScoredRun(gold, (_pred("I10"), _pred("I10")))) == 0.5
    assert mdca(ScoredRun(gold, (_pred(None, ["I10"]), _pred(None)))) == 0.0
    assert mdca(ScoredRun(gold, (_pred("I10"), _pred("E11.9")))) == 1.0


def test_scope_codes_and_top_k() -> None:
    top = Scope(codes=frozenset({IcdCode("I10")}), k=1)
    assert scope_codes({IcdCode("I10")}, Scope.full()) == {IcdCode("I10")}
    assert scope_codes({IcdCode("I10"), IcdCode("Z99.9")}, top) == {IcdCode("I10")}
    assert scope_codes({IcdCode("Z99.9")}, top) == frozenset()
    assert Scope.top_k(_table({"I10": 3, "E11.9": 1}), 1).codes == {IcdCode("I10")}
    assert top.label == "top1"
    with pytest.raises(InvalidScope):
        Scope.top_k(_table({"I10": 1}), 0)
    with pytest.raises(InvalidScope):
        Scope.top_k(_table({}), 5)


def test_mdca_ignores_scope() -> None:
    gold = (_gold("r1", ["Z99.9", "I10"]),)
    run = ScoredRun(gold, (_pred("Z99.9", ["I10"]),), Scope(codes=frozenset({IcdCode("I10")}), k=1))
    r = micro_prf(run)
    assert (r.tp, r.fp, r.fn) == (1, 0, 0)
    assert r.mdca == 1.0


def test_alignment_and_missing_predictions() -> None:
    with pytest.raises(AlignmentError):
        ScoredRun((_gold("r1", ["I10"]),), ())
    gold = [_gold("r1", ["I10"]), _gold("r2", ["E11.9"])]
    with pytest.raises(MissingPrediction) as ei:
        align_predictions(gold, {"r1": _pred("I10")})
    assert ei.value.record_id == "r2"
    aligned = align_predictions(gold, {"r1": _pred("I10"), "extra": _pred("J18.9")}, allow_missing=True)
    assert aligned[1].main_code is None
    assert aligned[1].parse_warnings == ("missing prediction",)


def test_evaluate_three_record_tally() -> None:
    gold = [
        _gold("r1", ["I10", "E11.9", "N18.3"]),
        _gold("r2", ["E11.9", "I10"]),
        _gold("r3", ["J18.9", "Z99.9"]),
    ]
    preds = {
        "r1": _pred("I10", ["E11.9"]),
        "r2": _pred("I10", ["E11.9", "E78.5"]),
        "r3": _pred("J18.9", ["J96.0"]),
    }
    train = _table({"I10": 10, "E11.9": 8, "J18.9": 2, "Z99.9": 1})
    full, top = evaluate(gold, preds, top_k=2, frequency_source=train)

    # full: r1 tp2 fn1; r2 tp2 fp1; r3 tp1 fp1 fn1
    assert (full.tp, full.fp, full.fn) == (5, 2, 2)
    assert full.precision == pytest.approx(5 / 7)
    assert full.mdca == pytest.approx(2 / 3)
    # top-2 = {I10, E11.9}: r1 tp2; r2 tp2; r3 nothing
    assert (top.tp, top.fp, top.fn) == (4, 0, 0)
    assert top.scope == "top2"
    assert top.mdca == full.mdca
    assert top.to_json()["note"].startswith("top-K scope")

    with pytest.raises(InvalidScope):
        evaluate(gold, preds, top_k=0, frequency_source=train)


def test_predictions_equal_gold_score_one() -> None:
    gold = [_gold(f"r{i}", ["I10", "E11.9"] if i % 2 else ["J18.9"]) for i in range(6)]
    preds = {g.id: PredictionCodes(g.main_code, g.other_codes) for g in gold}
    for report in evaluate(gold, preds, top_k=1, frequency_source=code_frequency(gold)):
        assert (report.precision, report.recall, report.f1, report.mdca) == (1.0, 1.0, 1.0, 1.0)


def _random_run(seed: int) -> ScoredRun:
    rng = random.Random(seed)
    pool = ["I10", "E11.9", "N18.3", "J18.9", "E78.5", "Z99.9", "K35.2"]
    gold: List[CodedRecord] = []
    preds: List[PredictionCodes] = []
    for i in range(25):
        g = rng.sample(pool, rng.randint(1, 4))
        p = rng.sample(pool, rng.randint(0, 4))
        gold.append(_gold(f"r{i}", g))
        preds.append(_pred(p[0] if p else None, p[1:]))
    return ScoredRun(tuple(gold), tuple(preds))


@pytest.mark.parametrize("seed", range(5))
def test_metric_properties(seed: int) -> None:
    run = _random_run(seed)
    r = micro_prf(run)

    pairs = list(zip(run.gold, run.predicted))
    random.Random(seed).shuffle(pairs)
    shuffled = micro_prf(ScoredRun(tuple(g for g, _ in pairs), tuple(p for _, p in pairs)))
    assert shuffled == r

    # pooling all (record, code) pairs first gives the same counts
    gold_pool = {(g.id, c) for g in run.gold for c in g.code_set()}
    pred_pool = {(g.id, c) for g, p in zip(run.gold, run.predicted) for c in p.code_set()}
    assert (r.tp, r.fp, r.fn) == (len(gold_pool & pred_pool), len(pred_pool - gold_pool), len(gold_pool - pred_pool))

    if r.precision + r.recall > 0:
        assert r.f1 == pytest.approx(2 * r.precision * r.recall / (r.precision + r.recall), abs=1e-12)

    top = micro_prf(run.with_scope(Scope(codes=frozenset({IcdCode("I10"), IcdCode("E11.9")}), k=2)))
    assert top.tp <= r.tp and top.fn <= r.fn


def test_prediction_from_json_shapes() -> None:
    raw = prediction_from_json({"id": "r1", "raw_output": "MAINCODE: I10\nOTHERCODE: E11.9"})
    assert raw.main_code == IcdCode("I10") and raw.other_codes == (IcdCode("E11.9"),)
    parsed = prediction_from_json({"id": "r1", "main_code": "J18.9", "other_codes": []})
    assert parsed.main_code == IcdCode("J18.9")


def test_matched_subset() -> None:
    records = [_gold("a", ["I10"]), _gold("b", ["I10"], mh="HTN"), _gold("c", ["I10"], mh="HTN", tc="rest")]
    wanted = [SectionKind.DISCHARGE_DIAGNOSIS, SectionKind.MEDICAL_HISTORY]
    assert [r.id for r in matched_subset(records, wanted)] == ["b", "c"]
    assert [r.id for r in matched_subset(records, wanted, exact=True)] == ["b"]
