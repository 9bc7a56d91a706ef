"""Frequency-based (Naive) privacy scoring.

Sensitivities and visibilities are read off the share frequencies of the
response matrix (PSN) or of the granularity level matrix (PSGN). Items and
users are assumed independent, so every probability is a product of a
per-item and a per-user frequency.
"""

from dataclasses import dataclass

import numpy as np

from .core import GranularityLevelMatrix, ResponseMatrix, ScoreVector
from .typing import FloatMatrix, FloatVector


@dataclass(frozen=True)
class NaiveItemStats:
    """Naive per-item sensitivities and visibility probabilities.

    Attributes:
        sensitivity: ``beta_i = (N - |R_i|) / N`` per item
        item_visibility: ``P_i = |R_i| / N`` per item
        user_visibility: ``P^j = |R^j| / n`` per user
    """

    sensitivity: FloatVector
    item_visibility: FloatVector
    user_visibility: FloatVector


@dataclass(frozen=True)
class NaiveGradedStats:
    """Naive per-level sensitivities and level probabilities.

    Attributes:
        sensitivity: ``beta[i, k]``, shape ``n × (l+1)``; ``beta[i, 0] = 0``
        probability: ``P[i, j, k]``, shape ``n × N × (l+1)``
    """

    sensitivity: FloatMatrix
    probability: np.ndarray


def naive_item_stats(r: ResponseMatrix) -> NaiveItemStats:
    item_counts = r.row_counts().astype(float)
    user_counts = r.column_counts().astype(float)
    return NaiveItemStats(
        sensitivity=(r.N - item_counts) / r.N,
        item_visibility=item_counts / r.N,
        user_visibility=user_counts / r.n,
    )


def naive_sensitivity(r: ResponseMatrix) -> FloatVector:
    """Fraction of users hiding each item."""
    return naive_item_stats(r).sensitivity


def naive_visibility(r: ResponseMatrix, compat_eq33: bool = False) -> FloatMatrix:
    """Visibility ``V[i, j]`` as the product of item and user share fractions.

    Args:
        r: response matrix
        compat_eq33: divide the item count by ``n`` and the user count by ``N``
            instead (the literal printed form; not a probability when n != N)
    """
    item_counts = r.row_counts().astype(float)
    user_counts = r.column_counts().astype(float)
    if compat_eq33:
        return np.outer(item_counts / r.n, user_counts / r.N)
    return np.outer(item_counts / r.N, user_counts / r.n)


def score_psn(r: ResponseMatrix, compat_eq33: bool = False) -> ScoreVector:
    """Naive policy-based privacy score ``PSN^j = sum_i beta_i V[i, j]``."""
    sensitivity = naive_sensitivity(r)
    visibility = naive_visibility(r, compat_eq33=compat_eq33)
    scores = np.zeros(r.N)
    for i in range(r.n):
        scores = scores + sensitivity[i] * visibility[i]
    return ScoreVector(
        r.registry, "PSN", scores, diagnostics={"compat_eq33": bool(compat_eq33)}
    )


def naive_graded_sensitivity(glm: GranularityLevelMatrix) -> FloatMatrix:
    """Per-level sensitivity ``beta[i, k] = (N - #{j : GLM[i, j] >= k}) / N``."""
    at_least = np.stack(
        [(glm.cells >= k).sum(axis=1) for k in range(glm.levels + 1)], axis=1
    )
    return (glm.N - at_least) / glm.N


def naive_graded_probability(glm: GranularityLevelMatrix) -> np.ndarray:
    """Level probability ``P[i, j, k]`` = item level-k fraction × user level-k fraction."""
    item_fraction = np.stack(
        [(glm.cells == k).sum(axis=1) / glm.N for k in range(glm.levels + 1)], axis=1
    )
    user_fraction = np.stack(
        [(glm.cells == k).sum(axis=0) / glm.n for k in range(glm.levels + 1)], axis=1
    )
    return item_fraction[:, None, :] * user_fraction[None, :, :]


def naive_graded_stats(glm: GranularityLevelMatrix) -> NaiveGradedStats:
    return NaiveGradedStats(
        sensitivity=naive_graded_sensitivity(glm),
        probability=naive_graded_probability(glm),
    )


def score_psgn(glm: GranularityLevelMatrix) -> ScoreVector:
    """Naive granularity-based score ``sum_i sum_k beta[i, k] P[i, j, k] k``.

    The ``k = 0`` term is identically zero and skipped.
    """
    stats = naive_graded_stats(glm)
    scores = np.zeros(glm.N)
    for i in range(glm.n):
        for k in range(1, glm.levels + 1):
            scores = scores + stats.sensitivity[i, k] * stats.probability[i, :, k] * k
    return ScoreVector(glm.registry, "PSGN", scores, diagnostics={"levels": glm.levels})
