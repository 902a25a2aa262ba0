"""
Win-rate matrix and comparison graph.

``wins[i][j]`` counts matchups model i won against model j, ``ties`` is
symmetric and ``totals[i][j] = wins[i][j] + wins[j][i] + ties[i][j]``. Rates of
cells without any matchup are absent (``None``/NaN), never zero, so ranking can
tell "never compared" from "never won".
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from icdcoder.domain.errors import DuplicateObservation, UnknownModel, ValidationError
from icdcoder.domain.matchups import MatchupObservation, Verdict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WinRateMatrix:
    """
    Pairwise tallies over an ordered model list.

    Parameters
    ----------
    models
        Model names; index i of every matrix refers to ``models[i]``.
    wins, ties, totals
        ``k x k`` integer arrays.
    """

    models: Tuple[str, ...]
    wins: np.ndarray
    ties: np.ndarray
    totals: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "models", tuple(self.models))
        k = len(self.models)
        if len(set(self.models)) != k:
            raise ValidationError("model names must be unique")
        for name in ("wins", "ties", "totals"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.shape != (k, k):
                raise ValidationError(f"{name} must be {k}x{k}, got {arr.shape}")
            if (arr < 0).any():
                raise ValidationError(f"{name} must be non-negative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.check()

    @property
    def size(self) -> int:
        return len(self.models)

    def check(self) -> None:
        """
        Verify zero diagonals, symmetric ties and conservation.

        Raises
        ------
        ValidationError
            If any invariant is violated.
        """
        if np.diag(self.wins).any() or np.diag(self.ties).any():
            raise ValidationError("a model cannot play itself")
        if not np.array_equal(self.ties, self.ties.T):
            raise ValidationError("ties must be symmetric")
        if not np.array_equal(self.wins + self.wins.T + self.ties, self.totals):
            raise ValidationError("wins + wins.T + ties must equal totals")

    def index(self, name: str) -> int:
        try:
            return self.models.index(name)
        except ValueError:
            raise UnknownModel(name) from None

    def rate(self, winner: str, loser: str) -> Optional[float]:
        """Share of matchups `winner` won against `loser`; ``None`` if they never met."""
        i, j = self.index(winner), self.index(loser)
        if self.totals[i, j] == 0:
            return None
        return float(self.wins[i, j]) / float(self.totals[i, j])

    def rate_matrix(self) -> np.ndarray:
        """Float matrix of rates with NaN for absent cells (including the diagonal)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.wins / self.totals.astype(np.float64)
        out[self.totals == 0] = np.nan
        return out

    def to_json(self) -> Dict[str, Any]:
        return {
            "models": list(self.models),
            "wins": self.wins.tolist(),
            "ties": self.ties.tolist(),
            "totals": self.totals.tolist(),
        }

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "WinRateMatrix":
        try:
            return cls(
                models=tuple(str(m) for m in obj["models"]),
                wins=np.asarray(obj["wins"], dtype=np.int64),
                ties=np.asarray(obj["ties"], dtype=np.int64),
                totals=np.asarray(obj["totals"], dtype=np.int64),
            )
        except KeyError as e:
            raise ValidationError(f"win matrix JSON lacks {e.args[0]!r}") from None

    @classmethod
    def from_counts(
        cls,
        models: Sequence[str],
        wins: Any,
        ties: Any = None,
    ) -> "WinRateMatrix":
        """Build from a wins matrix (and optional symmetric ties); totals are derived."""
        w = np.asarray(wins, dtype=np.int64)
        t = np.zeros_like(w) if ties is None else np.asarray(ties, dtype=np.int64)
        return cls(models=tuple(models), wins=w, ties=t, totals=w + w.T + t)


def build_win_matrix(
    observations: Iterable[MatchupObservation],
    models: Optional[Sequence[str]] = None,
) -> WinRateMatrix:
    """
    Tally observations into a `WinRateMatrix`.

    Parameters
    ----------
    observations
        Judged matchups.
    models
        Known model set and its order. Defaults to the sorted names found in
        the observations.

    Raises
    ------
    UnknownModel
        An observation names a model outside `models`.
    DuplicateObservation
        Two observations share (challenger, opponent, probe, order).
    """
    obs = list(observations)
    if models is None:
        models = sorted({o.challenger for o in obs} | {o.opponent for o in obs})
    names = tuple(models)
    index = {m: i for i, m in enumerate(names)}
    k = len(names)
    wins = np.zeros((k, k), dtype=np.int64)
    ties = np.zeros((k, k), dtype=np.int64)

    seen: Dict[Tuple[str, str, str, int], Verdict] = {}
    for o in obs:
        for name in (o.challenger, o.opponent):
            if name not in index:
                raise UnknownModel(name)
        key = o.key + (o.order,)
        if key in seen:
            raise DuplicateObservation(
                f"duplicate matchup {key!r} ({seen[key].value} vs {o.verdict.value})"
            )
        seen[key] = o.verdict

        i, j = index[o.challenger], index[o.opponent]
        if o.verdict is Verdict.A:
            wins[i, j] += 1
        elif o.verdict is Verdict.B:
            wins[j, i] += 1
        else:
            ties[i, j] += 1
            ties[j, i] += 1

    matrix = WinRateMatrix.from_counts(names, wins, ties)
    logger.debug("win matrix over %d models from %d observations", k, len(obs))
    return matrix


@dataclass(frozen=True)
class ComparisonGraph:
    """
    Mixed comparison graph.

    Parameters
    ----------
    nodes
        Model names.
    edges
        Directed edges ``(loser, winner)``; ``(j, i)`` exists iff i beat j.
    tie_edges
        Undirected edges between models that tied at least once.
    strongly_connected
        Whether the win-edge digraph is strongly connected.
    out_degree
        Per model, the number of opponents it beat at least once.
    """

    nodes: Tuple[str, ...]
    edges: FrozenSet[Tuple[str, str]]
    tie_edges: FrozenSet[FrozenSet[str]]
    strongly_connected: bool
    out_degree: Dict[str, int]


def _strongly_connected(adjacency: np.ndarray) -> bool:
    if adjacency.shape[0] <= 1:
        return True
    n_components, _ = connected_components(adjacency, directed=True, connection="strong")
    return int(n_components) == 1


def comparison_graph(matrix: WinRateMatrix) -> ComparisonGraph:
    wins = np.asarray(matrix.wins)
    names = matrix.models
    edges: Set[Tuple[str, str]] = set()
    tie_edges: Set[FrozenSet[str]] = set()
    for i, j in zip(*np.nonzero(wins)):
        edges.add((names[j], names[i]))
    for i, j in zip(*np.nonzero(np.asarray(matrix.ties))):
        if i < j:
            tie_edges.add(frozenset((names[i], names[j])))

    return ComparisonGraph(
        nodes=names,
        edges=frozenset(edges),
        tie_edges=frozenset(tie_edges),
        strongly_connected=_strongly_connected((wins > 0).astype(np.int8)),
        out_degree={names[i]: int((wins[i] > 0).sum()) for i in range(len(names))},
    )


def average_win_rates(matrix: WinRateMatrix) -> Dict[str, Optional[float]]:
    """Mean defined rate of each model against its opponents; ``None`` if it never played."""
    rates = matrix.rate_matrix()
    out: Dict[str, Optional[float]] = {}
    for i, name in enumerate(matrix.models):
        row = rates[i][~np.isnan(rates[i])]
        out[name] = float(row.mean()) if row.size else None
    return out


@dataclass(frozen=True)
class PositionBiasReport:
    """
    Position-bias summary of a both-orders tournament.

    Parameters
    ----------
    position_a_wins, position_b_wins, ties
        Verdict counts in position terms over all observations.
    paired
        Number of (pair, probe) keys judged in both orders.
    flipped
        Paired keys whose winning *model* differs between the two orders.
    order1, order2
        Win matrices built from each presentation order separately.
    """

    position_a_wins: int
    position_b_wins: int
    ties: int
    paired: int
    flipped: int
    order1: WinRateMatrix
    order2: WinRateMatrix

    @property
    def position_a_share(self) -> Optional[float]:
        decided = self.position_a_wins + self.position_b_wins
        return self.position_a_wins / decided if decided else None

    @property
    def flip_rate(self) -> Optional[float]:
        return self.flipped / self.paired if self.paired else None

    def to_json(self) -> Dict[str, Any]:
        return {
            "position_a_wins": self.position_a_wins,
            "position_b_wins": self.position_b_wins,
            "ties": self.ties,
            "position_a_share": self.position_a_share,
            "paired": self.paired,
            "flipped": self.flipped,
            "flip_rate": self.flip_rate,
        }


def position_bias_audit(
    observations: Iterable[MatchupObservation],
    models: Optional[Sequence[str]] = None,
) -> PositionBiasReport:
    obs = list(observations)
    if models is None:
        models = sorted({o.challenger for o in obs} | {o.opponent for o in obs})

    a_wins = sum(1 for o in obs if o.verdict is Verdict.A)
    b_wins = sum(1 for o in obs if o.verdict is Verdict.B)

    # unordered pair + probe -> winner per order
    winners: Dict[Tuple[FrozenSet[str], str], Dict[int, Optional[str]]] = {}
    for o in obs:
        slot = winners.setdefault((frozenset((o.challenger, o.opponent)), o.probe_code.value), {})
        slot[o.order] = o.winner
    paired = [w for w in winners.values() if 1 in w and 2 in w]
    flipped = sum(1 for w in paired if w[1] != w[2])

    return PositionBiasReport(
        position_a_wins=a_wins,
        position_b_wins=b_wins,
        ties=len(obs) - a_wins - b_wins,
        paired=len(paired),
        flipped=flipped,
        order1=build_win_matrix([o for o in obs if o.order == 1], models),
        order2=build_win_matrix([o for o in obs if o.order == 2], models),
    )

