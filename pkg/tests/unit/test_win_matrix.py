"""
Unit tests for icdcoder.core.judging.win_matrix.

These tests validate:
- tallying observations into wins/ties/totals and the conservation invariant
- absent cells stay undefined instead of zero
- the comparison graph (edges, tie edges, strong connectivity)
- position-bias audit on both-orders observations
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from icdcoder.core.judging.win_matrix import (
    WinRateMatrix,
    average_win_rates,
    build_win_matrix,
    comparison_graph,
    position_bias_audit,
)
from icdcoder.domain.errors import DuplicateObservation, UnknownModel, ValidationError
from icdcoder.domain.matchups import MatchupObservation, Verdict
from icdcoder.domain.models import IcdCode


def _obs(a: str, b: str, code: str, verdict: Verdict, order: int = 1) -> MatchupObservation:
    return MatchupObservation(IcdCode(code), a, b, verdict, raw_judge_output=verdict.value, order=order)


def test_three_of_four_plus_one_tie() -> None:
    obs = [
        _obs("x", "y", "I10", Verdict.A),
        _obs("x", "y", "I11", Verdict.A),
        _obs("x", "y", "I12", Verdict.A),
        _obs("x", "y", "I13", Verdict.TIE),
    ]
    m = build_win_matrix(obs, ["x", "y"])
    assert m.wins.tolist() == [[0, 3], [0, 0]]
    assert m.ties.tolist() == [[0, 1], [1, 0]]
    assert m.totals.tolist() == [[0, 4], [4, 0]]
    assert m.rate("x", "y") == 0.75
    assert m.rate("y", "x") == 0.0


def test_absent_cells_are_undefined() -> None:
    m = build_win_matrix([_obs("a", "b", "I10", Verdict.B)], ["a", "b", "c"])
    assert m.rate("a", "c") is None
    rates = m.rate_matrix()
    assert rates[1, 0] == 1.0
    assert math.isnan(rates[0, 2]) and math.isnan(rates[0, 0])
    assert average_win_rates(m) == {"a": 0.0, "b": 1.0, "c": None}


def test_unknown_and_duplicate_observations() -> None:
    with pytest.raises(UnknownModel):
        build_win_matrix([_obs("a", "z", "I10", Verdict.A)], ["a", "b"])
    with pytest.raises(DuplicateObservation):
        build_win_matrix([_obs("a", "b", "I10", Verdict.A), _obs("a", "b", "I10", Verdict.B)])
    both = build_win_matrix([_obs("a", "b", "I10", Verdict.A), _obs("b", "a", "I10", Verdict.B, order=2)])
    assert both.wins.tolist() == [[0, 2], [0, 0]]


def test_default_model_order_is_sorted() -> None:
    m = build_win_matrix([_obs("zeta", "alpha", "I10", Verdict.A)])
    assert m.models == ("alpha", "zeta")


def test_matrix_invariants_checked() -> None:
    with pytest.raises(ValidationError):
        WinRateMatrix(("a", "b"), np.array([[1, 0], [0, 0]]), np.zeros((2, 2)), np.array([[2, 0], [0, 0]]))
    with pytest.raises(ValidationError):
        WinRateMatrix(("a", "b"), np.array([[0, 1], [0, 0]]), np.zeros((2, 2)), np.array([[0, 2], [2, 0]]))
    with pytest.raises(ValidationError):
        WinRateMatrix.from_counts(["a", "b"], [[0, 1], [0, 0]], [[0, 1], [0, 0]])


def test_json_shape() -> None:
    m = WinRateMatrix.from_counts(["a", "b"], [[0, 2], [1, 0]], [[0, 1], [1, 0]])
    obj = m.to_json()
    assert obj == {"models": ["a", "b"], "wins": [[0, 2], [1, 0]], "ties": [[0, 1], [1, 0]], "totals": [[0, 4], [4, 0]]}
    assert WinRateMatrix.from_json(obj).totals.tolist() == [[0, 4], [4, 0]]
    with pytest.raises(ValidationError):
        WinRateMatrix.from_json({"models": ["a"]})


def test_comparison_graph_edges_and_connectivity() -> None:
    m = WinRateMatrix.from_counts(["a", "b", "c"], [[0, 1, 0], [0, 0, 1], [1, 0, 0]], [[0, 0, 1], [0, 0, 0], [1, 0, 0]])
    g = comparison_graph(m)
    assert g.edges == {("b", "a"), ("c", "b"), ("a", "c")}
    assert g.tie_edges == {frozenset(("a", "c"))}
    assert g.strongly_connected
    assert g.out_degree == {"a": 1, "b": 1, "c": 1}

    chain = comparison_graph(WinRateMatrix.from_counts(["a", "b"], [[0, 3], [0, 0]]))
    assert chain.edges == {("b", "a")}
    assert not chain.strongly_connected
    assert comparison_graph(WinRateMatrix.from_counts(["solo"], [[0]])).strongly_connected


def test_position_bias_audit() -> None:
    obs = [
        _obs("a", "b", "I10", Verdict.A, order=1),
        _obs("b", "a", "I10", Verdict.A, order=2),  # flipped: position A won both times
        _obs("a", "b", "I11", Verdict.A, order=1),
        _obs("b", "a", "I11", Verdict.B, order=2),  # consistent: a won both
        _obs("a", "b", "I12", Verdict.TIE, order=1),
    ]
    report = position_bias_audit(obs, ["a", "b"])
    assert (report.position_a_wins, report.position_b_wins, report.ties) == (3, 1, 1)
    assert report.position_a_share == 0.75
    assert (report.paired, report.flipped) == (2, 1)
    assert report.flip_rate == 0.5
    assert report.order1.wins.tolist() == [[0, 2], [0, 0]]
    assert report.order2.wins.tolist() == [[0, 1], [1, 0]]
    assert report.to_json()["flip_rate"] == 0.5
