"""Statistical comparison of the scoring models.

Users are grouped by estimated attitude into ``K`` equal-frequency groups;
within each group the observed share rate of an item is compared with the
rate the model expects, with a chi-square statistic over the share and hide
cells of every group. Score vectors are compared with correlation matrices.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from . import GranulumBase, UndefinedCorrelationError, ValidationError
from .core import (
    GranularityLevelMatrix,
    ItemCatalog,
    ResponseMatrix,
    ScoreVector,
    UserRegistry,
)
from .graph import SocialGraph, pagerank
from .irt import (
    AbilityVector,
    GradedItemParams,
    ItemParams,
    cumulative_probability,
    irt_visibility,
)
from .naive import naive_graded_sensitivity, naive_sensitivity
from .typing import ArrayLike, FloatMatrix

EXPECTED_COUNT_FLOOR = 1e-9

logger = GranulumBase._metadata["logger"]


@dataclass(frozen=True)
class GroupPartition:
    """Equal-frequency split of the users into ``K`` attitude groups.

    Attributes:
        registry: users being partitioned
        K: number of groups
        assignments: group ``1..K`` of every user
    """

    registry: UserRegistry
    K: int
    assignments: np.ndarray

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.K + 1)[1:]

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == group)

    def group_means(self, values: np.ndarray) -> np.ndarray:
        """Mean of ``values[..., j]`` over the members of every group, shape ``(..., K)``."""
        values = np.asarray(values, dtype=float)
        return np.stack(
            [values[..., self.members(g)].mean(axis=-1) for g in range(1, self.K + 1)],
            axis=-1,
        )


@dataclass(frozen=True)
class GofResult:
    """Chi-square goodness of fit of one model on one item.

    ``level`` is set for the per-level tests of the granularity models.
    """

    item: int
    item_id: str
    model: str
    K: int
    chi_square: float
    degrees_of_freedom: int
    p_value: float
    accepted: bool
    level: Optional[int] = None
    clamped_groups: int = 0


def _attitude_values(attitude: Union[ScoreVector, AbilityVector, ArrayLike]) -> np.ndarray:
    if isinstance(attitude, ScoreVector):
        return np.asarray(attitude.values)
    if isinstance(attitude, AbilityVector):
        return np.asarray(attitude.theta)
    return np.asarray(attitude, dtype=float)


def partition_by_attitude(
    attitude: Union[ScoreVector, AbilityVector, ArrayLike],
    K: int,
    registry: Optional[UserRegistry] = None,
) -> GroupPartition:
    """Sort users by attitude and cut them into ``K`` contiguous equal-frequency groups.

    Ties keep user-index order. With ``N = qK + r`` the first ``r`` groups get
    ``q + 1`` users.

    Args:
        attitude: share counts, scores or IRT abilities
        K: number of groups, ``2 <= K <= N``
        registry: users (taken from ``attitude`` when it carries one)
    """
    values = _attitude_values(attitude)
    if registry is None:
        registry = getattr(attitude, "registry", None)
    if registry is None:
        registry = UserRegistry([str(j) for j in range(values.size)])
    N = values.size
    if K < 2:
        raise ValueError(f"At least 2 groups are needed, got K={K}.")
    if K > N:
        raise ValueError(f"Cannot split {N} users into {K} groups.")
    order = np.argsort(values, kind="stable")
    q, r = divmod(N, K)
    sizes = np.full(K, q)
    sizes[:r] += 1
    assignments = np.empty(N, dtype=np.int64)
    assignments[order] = np.repeat(np.arange(1, K + 1), sizes)
    return GroupPartition(registry, K, assignments)


def chi_square_statistic(
    sizes: ArrayLike, observed: ArrayLike, expected: ArrayLike
) -> Tuple[float, int]:
    """Sum over groups of the share and hide cells ``(f p' - f p)^2 / (f p)``.

    Expected counts below ``EXPECTED_COUNT_FLOOR`` are clamped to it.

    Returns:
        ``(statistic, number of clamped cells)``
    """
    f = np.asarray(sizes, dtype=float)
    p_obs = np.asarray(observed, dtype=float)
    p_exp = np.asarray(expected, dtype=float)
    statistic, clamped = 0.0, 0
    for o, e in ((p_obs, p_exp), (1 - p_obs, 1 - p_exp)):
        expected_count = f * e
        small = expected_count < EXPECTED_COUNT_FLOOR
        clamped += int(small.sum())
        denominator = np.where(small, EXPECTED_COUNT_FLOOR, expected_count)
        statistic += float(np.sum((f * o - expected_count) ** 2 / denominator))
    return statistic, clamped


class ShareModel(ABC):
    """Expected per-group share probabilities of one scoring model over ``catalog``."""

    label: str
    estimated_params: int

    def __init__(self, catalog: ItemCatalog):
        self.catalog = catalog

    @abstractmethod
    def expected(self, partition: GroupPartition, level: int = 1) -> FloatMatrix:
        """``p[i, g]`` = expected probability that a member of group ``g`` shares item ``i`` at ``level`` or above."""

    def items(self) -> np.ndarray:
        return np.arange(self.catalog.n)

    def degrees_of_freedom(self, K: int) -> int:
        return K - self.estimated_params


class NaiveShareModel(ShareModel):
    """Share probability ``|R_i| / N``, identical in every group."""

    label = "PSN"
    estimated_params = 1

    def __init__(self, r: ResponseMatrix):
        super().__init__(r.catalog)
        self.rates = 1 - naive_sensitivity(r)

    def expected(self, partition, level=1):
        return np.repeat(self.rates[:, None], partition.K, axis=1)


class IrtShareModel(ShareModel):
    """Share probability averaged over the group members' 2PL visibilities."""

    label = "PSI"
    estimated_params = 2

    def __init__(self, params: ItemParams, theta: AbilityVector):
        super().__init__(params.catalog)
        self.params = params
        self.visibility = irt_visibility(params, theta)

    def items(self):
        return np.flatnonzero(self.params.fitted)

    def expected(self, partition, level=1):
        return partition.group_means(self.visibility)


class NaiveGradedModel(ShareModel):
    """Probability of level ``>= k`` from the item's cumulative level frequency."""

    label = "PSGN"
    estimated_params = 1

    def __init__(self, glm: GranularityLevelMatrix):
        super().__init__(glm.catalog)
        self.at_least = 1 - naive_graded_sensitivity(glm)

    def expected(self, partition, level=1):
        return np.repeat(self.at_least[:, level][:, None], partition.K, axis=1)


class GradedIrtModel(ShareModel):
    """Probability of level ``>= k`` averaged over the group members' GRM curves."""

    label = "PSGI"
    estimated_params = 2

    def __init__(self, params: GradedItemParams, theta: AbilityVector):
        super().__init__(params.catalog)
        self.params = params
        self.theta = np.asarray(theta.theta)

    def items(self):
        return np.flatnonzero(self.params.fitted)

    def expected(self, partition, level=1):
        curves = np.stack(
            [
                cumulative_probability(self.params, i, level, self.theta)
                for i in range(self.catalog.n)
            ]
        )
        return partition.group_means(curves)


def _test_items(
    observed_cells: np.ndarray,
    model: ShareModel,
    partition: GroupPartition,
    alpha: float,
    level: Optional[int],
) -> List[GofResult]:
    df = model.degrees_of_freedom(partition.K)
    if df <= 0:
        raise ValueError(
            f"{model.label} goodness of fit has {df} degrees of freedom with K={partition.K}."
        )
    if observed_cells.shape[1] != partition.registry.N:
        raise ValidationError("Partition and data have different numbers of users.")
    sizes = partition.sizes
    observed = partition.group_means(observed_cells)
    expected = model.expected(partition, level if level is not None else 1)
    results = []
    for i in model.items():
        statistic, clamped = chi_square_statistic(sizes, observed[i], expected[i])
        if clamped:
            logger.warning(
                f"{model.label}: {clamped} near-zero expected count(s) clamped for item "
                f"'{model.catalog[i]}' (K={partition.K})."
            )
        p_value = float(stats.chi2.sf(statistic, df))
        results.append(
            GofResult(
                item=int(i),
                item_id=model.catalog[i],
                model=model.label,
                K=partition.K,
                chi_square=statistic,
                degrees_of_freedom=df,
                p_value=p_value,
                accepted=p_value >= alpha,
                level=level,
                clamped_groups=clamped,
            )
        )
    return results


def goodness_of_fit(
    r: ResponseMatrix, model: ShareModel, partition: GroupPartition, alpha: float = 0.05
) -> List[GofResult]:
    """Chi-square test of every item of a binary share model.

    Args:
        r: observed responses
        model: :class:`NaiveShareModel` (df ``K - 1``) or :class:`IrtShareModel` (df ``K - 2``)
        partition: attitude groups over the users of ``r``
        alpha: significance level

    Returns:
        One GofResult per tested item, by item index. Items excluded from an
        IRT fit are not tested.
    """
    return _test_items(r.cells, model, partition, alpha, level=None)


def goodness_of_fit_graded(
    glm: GranularityLevelMatrix,
    model: ShareModel,
    partition: GroupPartition,
    alpha: float = 0.05,
    k: int = 1,
) -> List[GofResult]:
    """Chi-square test of a granularity model with the levels dichotomized at ``>= k``."""
    if not 1 <= k <= glm.levels:
        raise ValueError(f"Level {k} out of range [1, {glm.levels}].")
    return _test_items((glm.cells >= k).astype(float), model, partition, alpha, level=k)


def accepted_counts(results: Iterable[GofResult]) -> pd.DataFrame:
    """Number of accepted and tested items per ``(K, model, level)``."""
    frame = pd.DataFrame(
        [
            {
                "K": result.K,
                "model": result.model,
                "level": result.level if result.level is not None else 0,
                "accepted": int(result.accepted),
            }
            for result in results
        ],
        columns=["K", "model", "level", "accepted"],
    )
    grouped = frame.groupby(["K", "model", "level"], sort=True)["accepted"]
    return grouped.agg(accepted="sum", tested="count").reset_index()


def _check_pair(x: ScoreVector, y: ScoreVector):
    if x.registry != y.registry:
        raise ValidationError(f"{x.model} and {y.model} scores cover different users.")
    for vector in (x, y):
        if np.ptp(vector.values) == 0:
            raise UndefinedCorrelationError(
                f"{vector.model} scores have zero variance; correlation is undefined."
            )


def pearson(x: ScoreVector, y: ScoreVector) -> float:
    """Sample Pearson correlation of two score vectors over the same users."""
    _check_pair(x, y)
    return float(np.clip(stats.pearsonr(x.values, y.values)[0], -1.0, 1.0))


def spearman(x: ScoreVector, y: ScoreVector) -> float:
    """Spearman rank correlation of two score vectors over the same users."""
    _check_pair(x, y)
    return float(np.clip(stats.spearmanr(x.values, y.values)[0], -1.0, 1.0))


def correlation_matrix(
    scores: Sequence[ScoreVector], method: str = "pearson"
) -> pd.DataFrame:
    """Pairwise correlations, labeled by model; undefined cells are NaN.

    Args:
        scores: score vectors over one registry
        method: ``pearson`` or ``spearman``
    """
    correlate = {"pearson": pearson, "spearman": spearman}.get(method)
    if correlate is None:
        raise ValueError(f"Unknown correlation method '{method}'.")
    labels = [vector.model for vector in scores]
    matrix = np.full((len(scores), len(scores)), np.nan)
    for a in range(len(scores)):
        for b in range(a, len(scores)):
            try:
                if a == b:
                    _check_pair(scores[a], scores[a])
                    value = 1.0
                else:
                    value = correlate(scores[a], scores[b])
            except UndefinedCorrelationError as e:
                logger.warning(str(e))
                continue
            matrix[a, b] = matrix[b, a] = value
    return pd.DataFrame(matrix, index=labels, columns=labels)


def _rank_agreement(x: np.ndarray, y: np.ndarray) -> float:
    keep = np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2 or np.ptp(x[keep]) == 0 or np.ptp(y[keep]) == 0:
        return float("nan")
    return float(stats.spearmanr(x[keep], y[keep])[0])


def sensitivity_comparison(
    r: ResponseMatrix,
    params: ItemParams,
    glm: Optional[GranularityLevelMatrix] = None,
    graded: Optional[GradedItemParams] = None,
) -> Tuple[pd.DataFrame, Optional[pd.DataFrame], float]:
    """Naive against IRT sensitivities, per item and (optionally) per level.

    Returns:
        ``(item table, level table or None, Spearman correlation of the two
        item sensitivity orderings)``. Items excluded from a fit show NaN.
    """
    naive = naive_sensitivity(r)
    items = pd.DataFrame(
        {
            "item_id": list(r.catalog),
            "naive": naive,
            "irt": params.sensitivity,
            "discrimination": params.discrimination,
        }
    )
    agreement = _rank_agreement(naive, np.asarray(params.sensitivity))
    levels = None
    if glm is not None and graded is not None:
        naive_levels = naive_graded_sensitivity(glm)
        irt_levels = graded.sensitivity_table()
        records = []
        for i, item in enumerate(glm.catalog):
            for k in range(1, glm.levels + 1):
                records.append(
                    {
                        "item_id": item,
                        "level": k,
                        "naive": naive_levels[i, k],
                        "irt": irt_levels[i, k],
                    }
                )
        levels = pd.DataFrame.from_records(records)
    return items, levels, agreement


def damping_sweep(
    g: SocialGraph,
    scores: Sequence[ScoreVector],
    dampings: Sequence[float],
    tol: float = 1e-12,
    max_iter: int = 10000,
) -> pd.DataFrame:
    """Pearson correlation of every score vector with PageRank at every damping factor."""
    records = []
    for d in dampings:
        prc = pagerank(g, d, tol, max_iter)
        for vector in scores:
            try:
                value = pearson(vector, prc)
            except UndefinedCorrelationError as e:
                logger.warning(str(e))
                value = float("nan")
            records.append({"damping": d, "model": vector.model, "pearson": value})
    return pd.DataFrame.from_records(records, columns=["damping", "model", "pearson"])
