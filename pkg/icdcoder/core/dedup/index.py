"""
Nearest-neighbour index over unit-length embeddings.

Distances are Euclidean; for unit vectors ``similarity = 1 - d**2 / 2`` is the
cosine similarity. Two backends are available through scikit-learn:

- ``exact``: brute-force search (default)
- ``ann``: ball-tree search, sublinear per query on larger corpora

Candidate distances are recomputed directly from the vectors, since the search
backends expand ``|x - y|**2`` and lose precision near zero. Neighbours at equal
distance are ordered by record id, with distances compared after rounding to
`DISTANCE_DECIMALS`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from sklearn.neighbors import NearestNeighbors

from icdcoder.domain.errors import AlignmentError, DimensionMismatch, EmptyInput, ValidationError
from icdcoder.transport.base import EmbeddingVector

logger = logging.getLogger(__name__)

DISTANCE_DECIMALS = 9
# radius slack covering backend rounding
_SEARCH_SLACK = 1e-6


class IndexKind(str, Enum):
    EXACT = "exact"
    ANN = "ann"


@dataclass(frozen=True)
class NeighborHit:
    """
    Nearest neighbour of one record.

    Parameters
    ----------
    query_id, neighbor_id
        Record ids; never equal.
    l2_distance
        Euclidean distance between the embeddings.
    similarity
        ``1 - l2_distance**2 / 2`` clipped to [-1, 1].
    """

    query_id: str
    neighbor_id: str
    l2_distance: float
    similarity: float


def similarity_from_distance(d: float) -> float:
    return float(min(1.0, max(-1.0, 1.0 - d * d / 2.0)))


def distance_for_similarity(threshold: float) -> float:
    """L2 radius matching a similarity threshold on unit vectors."""
    return math.sqrt(max(0.0, 2.0 * (1.0 - threshold)))


class NeighborIndex:
    """
    Index answering nearest-neighbour-excluding-self queries.

    Parameters
    ----------
    ids
        Record ids aligned with `vectors`; must be unique.
    vectors
        Unit-length embeddings of one dimension.
    kind
        Search backend.
    """

    def __init__(
        self,
        ids: Sequence[str],
        vectors: Sequence[EmbeddingVector],
        kind: IndexKind = IndexKind.EXACT,
    ):
        if not vectors:
            raise EmptyInput("cannot index zero vectors")
        if len(ids) != len(vectors):
            raise AlignmentError(f"{len(ids)} ids but {len(vectors)} vectors")
        if len(set(ids)) != len(ids):
            raise ValidationError("index ids must be unique")
        dims = {v.dim for v in vectors}
        if len(dims) != 1:
            raise DimensionMismatch(f"vectors have mixed dimensions {sorted(dims)}")

        self.ids = list(ids)
        self.kind = IndexKind(kind)
        self.matrix = np.vstack([v.as_array() for v in vectors])
        algorithm = "brute" if self.kind is IndexKind.EXACT else "ball_tree"
        self._nn = NearestNeighbors(algorithm=algorithm, metric="euclidean").fit(self.matrix)
        logger.debug("built %s index over %d vectors (dim=%d)", self.kind.value, len(self.ids), self.dim)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def _best(self, i: int, idxs: np.ndarray, radius: float) -> Optional[NeighborHit]:
        others = np.asarray([int(j) for j in idxs if int(j) != i], dtype=np.int64)
        if others.size == 0:
            return None
        exact = np.linalg.norm(self.matrix[others] - self.matrix[i], axis=1)
        cands = [
            (round(float(d), DISTANCE_DECIMALS), self.ids[int(j)], float(d))
            for d, j in zip(exact, others)
            if d <= radius
        ]
        if not cands:
            return None
        _, nid, d = min(cands)
        return NeighborHit(self.ids[i], nid, d, similarity_from_distance(d))

    def nearest(self, i: int) -> Optional[NeighborHit]:
        """
        Nearest other record of entry `i`, or ``None`` for a one-vector index.

        All points at the nearest distance are fetched so ties resolve by id.
        """
        if len(self) == 1:
            return None
        dists, idxs = self._nn.kneighbors(self.matrix[i : i + 1], n_neighbors=min(len(self), 2))
        others = [float(d) for d, j in zip(dists[0], idxs[0]) if int(j) != i]
        radius = others[0] + _SEARCH_SLACK
        return self.nearest_within(i, radius)

    def nearest_within(self, i: int, radius: float) -> Optional[NeighborHit]:
        """Nearest other record of entry `i` at distance <= `radius`, if any."""
        _, idxs = self._nn.radius_neighbors(self.matrix[i : i + 1], radius=radius + _SEARCH_SLACK)
        return self._best(i, idxs[0], radius)

    def all_nearest(self, threshold: Optional[float] = None) -> List[Optional[NeighborHit]]:
        """
        Nearest neighbour of every entry, in index order.

        With a similarity `threshold`, only hits that could pass it are
        searched for; entries whose nearest neighbour lies further out get
        ``None``.
        """
        if threshold is None:
            return [self.nearest(i) for i in range(len(self))]
        radius = distance_for_similarity(threshold) + _SEARCH_SLACK
        return [self.nearest_within(i, radius) for i in range(len(self))]


def build_index(
    ids: Sequence[str],
    vectors: Sequence[EmbeddingVector],
    kind: IndexKind = IndexKind.EXACT,
) -> NeighborIndex:
    return NeighborIndex(ids, vectors, kind)
