"""
Luce spectral ranking.

Plackett-Luce strengths are recovered as the stationary distribution of a
continuous-time Markov chain whose transition rate ``rates[j][i]`` moves
probability mass from the loser j to the winner i. The stationary vector solves
the global balance equations

    pi_i * sum_j rates[i][j] = sum_j pi_j * rates[j][i],   sum_i pi_i = 1

`lsr_rank` feeds win rates straight into the chain; `ilsr_rank` re-weights every
comparison by ``1 / (pi_i + pi_j)`` and repeats until the strengths stop moving,
which converges to the maximum-likelihood estimate.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from icdcoder.core.judging.win_matrix import WinRateMatrix
from icdcoder.core.ranking.result import RankingResult
from icdcoder.domain.errors import NotIrreducible, NumericalFailure, ValidationError

logger = logging.getLogger(__name__)

BALANCE_TOLERANCE = 1e-10
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100

_POWER_MAX_ITER = 200_000


class TiePolicy(str, Enum):
    """
    How ties enter ILSR.

    Members
    -------
    HALF : str
        A tie counts as half a win for each side.
    DISCARD : str
        Ties are ignored.
    """

    HALF = "half"
    DISCARD = "discard"


def _check_rates(rates: np.ndarray) -> np.ndarray:
    lam = np.array(rates, dtype=np.float64)
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
        raise ValidationError(f"rate matrix must be square, got shape {lam.shape}")
    if not np.all(np.isfinite(lam)) or (lam < 0).any():
        raise ValidationError("rates must be finite and non-negative")
    np.fill_diagonal(lam, 0.0)
    return lam


def is_irreducible(rates: np.ndarray) -> bool:
    """Whether the digraph with an edge j -> i for every positive ``rates[j][i]`` is strongly connected."""
    lam = np.asarray(rates)
    if lam.shape[0] <= 1:
        return True
    n_components, _ = connected_components((lam > 0).astype(np.int8), directed=True, connection="strong")
    return int(n_components) == 1


def balance_residual(pi: np.ndarray, rates: np.ndarray) -> float:
    """Largest violation of the balance equations, relative to the largest rate."""
    lam = np.asarray(rates, dtype=np.float64)
    scale = float(lam.max()) if lam.size else 0.0
    if scale == 0.0:
        return 0.0
    lam = lam / scale
    outflow = pi * lam.sum(axis=1)
    inflow = pi @ lam
    return float(np.max(np.abs(outflow - inflow)))


def _generator(lam: np.ndarray) -> np.ndarray:
    q = lam.copy()
    np.fill_diagonal(q, -lam.sum(axis=1))
    return q


def _direct_solve(lam: np.ndarray) -> np.ndarray:
    k = lam.shape[0]
    a = _generator(lam).T
    a[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    return scipy.linalg.solve(a, b)


def _power_solve(lam: np.ndarray) -> np.ndarray:
    # uniformized discrete chain P = I + Q / delta has the same stationary vector
    k = lam.shape[0]
    delta = float(lam.sum(axis=1).max()) * 1.01
    p = np.eye(k) + _generator(lam) / delta
    pi = np.full(k, 1.0 / k)
    for _ in range(_POWER_MAX_ITER):
        nxt = pi @ p
        if np.max(np.abs(nxt - pi)) < 1e-16:
            return nxt
        pi = nxt
    return pi


def stationary_distribution(rates: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Stationary distribution of the rate matrix.

    Parameters
    ----------
    rates
        ``k x k`` non-negative rates; ``rates[j][i]`` is the rate j -> i. The
        diagonal is ignored.

    Returns
    -------
    (pi, residual)
        Strength vector summing to one and the balance residual of the solve.

    Raises
    ------
    NotIrreducible
        The rate digraph is not strongly connected.
    NumericalFailure
        Neither the direct solve nor power iteration meets the residual bound.
    """
    lam = _check_rates(rates)
    k = lam.shape[0]
    if k == 0:
        raise ValidationError("rate matrix is empty")
    if k == 1:
        return np.ones(1), 0.0
    if not is_irreducible(lam):
        raise NotIrreducible("comparison graph is not strongly connected")

    # rescale so the result does not depend on the rate unit
    lam = lam / lam.max()

    try:
        pi = _direct_solve(lam)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        logger.debug("direct stationary solve failed (%s), using power iteration", e)
        pi = _power_solve(lam)
    residual = balance_residual(pi, lam)
    if residual > BALANCE_TOLERANCE or (pi < 0).any():
        logger.debug("direct solve residual %.3e, retrying with power iteration", residual)
        pi = _power_solve(lam)
        residual = balance_residual(pi, lam)

    pi = np.clip(pi, 0.0, None)
    total = pi.sum()
    if total <= 0 or not np.isfinite(total):
        raise NumericalFailure("stationary vector has no mass")
    pi = pi / total
    residual = balance_residual(pi, lam)
    if residual > BALANCE_TOLERANCE:
        raise NumericalFailure(f"balance residual {residual:.3e} exceeds {BALANCE_TOLERANCE:.0e}")
    return pi, residual


def _dampened(lam: np.ndarray, dampen: float) -> np.ndarray:
    if dampen < 0:
        raise ValidationError("dampen must be >= 0")
    if dampen == 0:
        return lam
    out = lam + dampen
    np.fill_diagonal(out, 0.0)
    return out


def lsr_rates(matrix: WinRateMatrix) -> np.ndarray:
    """``rates[j][i] = rate(i over j)``; cells without matchups contribute nothing."""
    rates = np.nan_to_num(matrix.rate_matrix(), nan=0.0)
    return rates.T.copy()


def lsr_rank(matrix: WinRateMatrix, dampen: float = 0.0) -> RankingResult:
    """
    Single spectral step over the win-rate matrix.

    Ties only depress win rates; they add no flow.

    Raises
    ------
    NotIrreducible
        The win graph is not strongly connected (and `dampen` is zero).
    """
    if matrix.size == 1:
        return RankingResult.from_pi(matrix.models, np.ones(1), method="lsr")
    rates = _dampened(lsr_rates(matrix), dampen)
    pi, residual = stationary_distribution(rates)
    logger.info("lsr ranking over %d models, residual %.2e", matrix.size, residual)
    return RankingResult.from_pi(
        matrix.models, pi, iterations=1, converged=True, method="lsr", dampen=dampen, residual=residual
    )


def ilsr_rates(
    wins: np.ndarray,
    ties: np.ndarray,
    pi: np.ndarray,
    tie_policy: TiePolicy = TiePolicy.HALF,
) -> np.ndarray:
    """
    Rates weighted by the current strengths.

    ``rates[j][i] = (wins[i][j] + h * ties[i][j]) / (pi_i + pi_j)`` with
    ``h = 0.5`` under `TiePolicy.HALF` and ``0`` under `TiePolicy.DISCARD`.
    """
    counts = np.asarray(wins, dtype=np.float64)
    if tie_policy is TiePolicy.HALF:
        counts = counts + 0.5 * np.asarray(ties, dtype=np.float64)
    weight = 1.0 / (pi[:, None] + pi[None, :])
    # counts[i][j] is i's credit against j; it drives flow j -> i
    lam = (counts * weight).T
    np.fill_diagonal(lam, 0.0)
    return lam


def ilsr_rank(
    matrix: WinRateMatrix,
    tie_policy: TiePolicy = TiePolicy.HALF,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    dampen: float = 0.0,
    initial: Optional[np.ndarray] = None,
) -> RankingResult:
    """
    Iterative Luce spectral ranking over raw win counts.

    Parameters
    ----------
    matrix
        Win/tie counts.
    tie_policy
        How ties contribute.
    tol
        Stop once the L-infinity change of pi drops below this value.
    max_iter
        Iteration cap; reaching it leaves ``converged=False``.
    dampen
        Added to every off-diagonal rate in each iteration.
    initial
        Starting strengths (default uniform).

    Raises
    ------
    NotIrreducible
        The credit graph is not strongly connected after `tie_policy`.
    """
    tie_policy = TiePolicy(tie_policy)
    if tol <= 0 or max_iter < 1:
        raise ValidationError("tol must be > 0 and max_iter >= 1")
    k = matrix.size
    if k == 1:
        return RankingResult.from_pi(matrix.models, np.ones(1), method="ilsr", tie_policy=tie_policy.value)

    pi = np.full(k, 1.0 / k) if initial is None else np.asarray(initial, dtype=np.float64) / np.sum(initial)
    converged = False
    residual = 0.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        rates = _dampened(ilsr_rates(matrix.wins, matrix.ties, pi, tie_policy), dampen)
        nxt, residual = stationary_distribution(rates)
        change = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if change < tol:
            converged = True
            break

    if not converged:
        logger.warning("ilsr did not converge within %d iterations", max_iter)
    logger.info("ilsr ranking over %d models after %d iterations", k, iterations)
    return RankingResult.from_pi(
        matrix.models,
        pi,
        iterations=iterations,
        converged=converged,
        method="ilsr",
        dampen=dampen,
        residual=residual,
        tie_policy=tie_policy.value,
    )
