"""
Stress tests for concurrent model calls.

Tournament, cleaning and deduplication fan work out over a bounded worker
pool. These tests validate that:
- results do not depend on the degree of parallelism
- the pool never runs more tasks at once than its bound
- a shared client is safe to call from many threads

Notes
-----
Threading tests are probabilistic: they increase confidence but do not prove
the absence of races. Run multiple times for higher confidence, e.g. with
``pytest -m stress --count=20``.
"""

from __future__ import annotations

import random
import threading
import time
from typing import List

import pytest

from icdcoder.core.corpus.cleaning import CleaningOptions, clean_corpus
from icdcoder.core.dedup.sampling import deduplicate
from icdcoder.core.judging.tournament import CandidateModel, run_tournament
from icdcoder.domain.matchups import OrderPolicy
from icdcoder.domain.models import CodedRecord, IcdCode, SectionKind
from icdcoder.runtime.worker_pool import BoundedWorkerPool
from icdcoder.transport.mock_client import MockModelClient

_WORDS = ["chest", "pain", "fever", "cough", "renal", "failure", "acute", "chronic", "sepsis", "anemia"]


def _probes(n: int) -> List[IcdCode]:
    return [IcdCode(f"J{10 + i}") for i in range(n)]


@pytest.mark.stress
def test_tournament_is_independent_of_parallelism() -> None:
    cands = [CandidateModel(f"m{i}", MockModelClient(seed=i, name=f"m{i}")) for i in range(5)]
    judge = MockModelClient(seed=42, name="judge")

    serial = run_tournament(cands, _probes(20), judge, OrderPolicy.BOTH, parallelism=1)
    parallel = run_tournament(cands, _probes(20), judge, OrderPolicy.BOTH, parallelism=16)

    assert len(serial.observations) == 400
    assert [o.to_json() for o in parallel.observations] == [o.to_json() for o in serial.observations]


@pytest.mark.stress
def test_pool_respects_bound_under_contention() -> None:
    bound = 4
    active = 0
    peak = 0
    lock = threading.Lock()

    def task(x: int) -> int:
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        time.sleep(0.001)
        with lock:
            active -= 1
        return x

    out = BoundedWorkerPool(parallelism=bound).map(task, list(range(300)))

    assert out == list(range(300))
    assert 1 <= peak <= bound


@pytest.mark.stress
def test_shared_client_from_many_threads() -> None:
    client = MockModelClient(seed=3)
    texts = [f"note {i} " + " ".join(_WORDS[: i % len(_WORDS) + 1]) for i in range(50)]
    expected = [client.embed(t).values for t in texts]
    start = threading.Barrier(8)
    errors: List[BaseException] = []

    def worker() -> None:
        start.wait()
        try:
            for t, want in zip(texts, expected):
                assert client.embed(t).values == want
        except BaseException as e:
            errors.append(e)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=10)

    assert errors == []


@pytest.mark.stress
def test_clean_and_dedup_are_independent_of_parallelism() -> None:
    rng = random.Random(11)
    raw = []
    for i in range(200):
        text = " ".join(rng.choice(_WORDS) for _ in range(12))
        raw.append({"id": f"r{i:03d}", "sections": {"discharge_diagnosis": text}, "main_code": rng.choice(["I10", "J18.9"])})
    # exact copies guarantee some redundant pairs
    raw += [dict(raw[i], id=f"c{i:03d}") for i in range(0, 200, 10)]

    serial, _ = clean_corpus(raw, CleaningOptions(parallelism=1))
    parallel, _ = clean_corpus(raw, CleaningOptions(parallelism=8))
    assert parallel == serial

    client = MockModelClient(seed=5, embed_dim=64)
    kept_1, report_1 = deduplicate(serial, client, 0.9, parallelism=1)
    kept_8, report_8 = deduplicate(serial, client, 0.9, parallelism=8)
    assert [r.id for r in kept_8] == [r.id for r in kept_1]
    assert report_8.after_count == report_1.after_count < report_1.before_count
