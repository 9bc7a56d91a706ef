"""Measurement of shared-data granularity and its discretization into levels.

The granularity of a shared profile item is the size in bytes of its text.
Nonzero sizes of one item are grouped into at most ``l`` levels with optimal
one-dimensional k-means (dynamic programming over the sorted values); an
unshared item is always level 0.
"""

import logging
import re
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .core import GranularityLevelMatrix, GranularityMatrix, ItemCatalog
from .typing import ArrayLike

logger = logging.getLogger("granulum")

ENTRY_SEPARATOR = ";"

_WHITESPACE = re.compile(r"\s+")


def normalize_entry(entry: Union[None, str, Sequence[str]]) -> str:
    """Collapse whitespace runs and join list entries with a single separator."""
    if entry is None:
        return ""
    if isinstance(entry, str):
        return _WHITESPACE.sub(" ", entry).strip()
    parts = [normalize_entry(part) for part in entry]
    return ENTRY_SEPARATOR.join(part for part in parts if part)


def measure_bytes(entry: Union[None, str, Sequence[str]]) -> int:
    """Size in bytes of the UTF-8 encoding of a normalized profile entry.

    Args:
        entry: the text of one profile item of one user; a list stands for a
            multi-valued item (e.g. several education records). ``None`` or an
            empty string means the item is not shared.

    Returns:
        Byte count, 0 for absent entries.
    """
    return len(normalize_entry(entry).encode("utf-8"))


def measure_profile(
    profile: Mapping[str, Union[None, str, Sequence[str]]], catalog: ItemCatalog
) -> np.ndarray:
    """Byte count of every catalog item of one user profile (missing items are 0)."""
    return np.array([measure_bytes(profile.get(item)) for item in catalog], dtype=np.int64)


@dataclass(frozen=True)
class Clustering:
    """Optimal partition of one-dimensional data into contiguous clusters.

    Attributes:
        labels: cluster index (0-based, ordered by cluster mean) of every input value
        centers: mean of every cluster, increasing
        sizes: number of values in every cluster
        withinss: within-cluster sum of squared deviations of every cluster
        k: number of clusters produced
        k_requested: number of clusters asked for
    """

    labels: np.ndarray
    centers: np.ndarray
    sizes: np.ndarray
    withinss: np.ndarray
    k: int
    k_requested: int

    @property
    def total_withinss(self) -> float:
        return float(self.withinss.sum())

    @property
    def reduced(self) -> bool:
        return self.k < self.k_requested

    def clusters(self, values: ArrayLike) -> List[np.ndarray]:
        values = np.asarray(values, dtype=float)
        return [np.sort(values[self.labels == c]) for c in range(self.k)]


def ckmeans_1d(values: ArrayLike, k: int) -> Clustering:
    """Partition values into ``k`` contiguous clusters with minimal total within-cluster SSE.

    The dynamic program runs over the distinct values weighted by their
    multiplicity, so equal values always end up in the same cluster.

    Args:
        values: non-empty list of reals
        k: requested number of clusters; reduced (with a warning) to the number
            of distinct values if larger

    Returns:
        Clustering whose clusters are numbered by increasing mean.
    """
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("ckmeans_1d needs at least one value.")
    if k < 1:
        raise ValueError("The number of clusters must be at least 1.")
    distinct, inverse, weights = np.unique(x, return_inverse=True, return_counts=True)
    m = distinct.size
    k_requested = k
    if k > m:
        logger.warning(
            f"Requested {k} clusters for {m} distinct values, reducing to {m}."
        )
        k = m

    shift = distinct.mean()
    y = distinct - shift
    w = weights.astype(float)
    cum_w = np.concatenate([[0.0], np.cumsum(w)])
    cum_wy = np.concatenate([[0.0], np.cumsum(w * y)])
    cum_wy2 = np.concatenate([[0.0], np.cumsum(w * y * y)])

    def cost(starts: np.ndarray, end: int) -> np.ndarray:
        # SSE of distinct[starts..end] inclusive, for every start in ``starts``
        weight = cum_w[end + 1] - cum_w[starts]
        total = cum_wy[end + 1] - cum_wy[starts]
        squares = cum_wy2[end + 1] - cum_wy2[starts]
        return np.maximum(squares - total * total / weight, 0.0)

    sse = np.full((k, m), np.inf)
    backtrack = np.zeros((k, m), dtype=int)
    for end in range(m):
        sse[0, end] = cost(np.array([0]), end)[0]
    for cluster in range(1, k):
        for end in range(cluster, m):
            starts = np.arange(cluster, end + 1)
            candidates = sse[cluster - 1, starts - 1] + cost(starts, end)
            best = int(np.argmin(candidates))
            sse[cluster, end] = candidates[best]
            backtrack[cluster, end] = starts[best]

    distinct_labels = np.zeros(m, dtype=int)
    end = m - 1
    for cluster in range(k - 1, -1, -1):
        start = backtrack[cluster, end] if cluster > 0 else 0
        distinct_labels[start : end + 1] = cluster
        end = start - 1

    labels = distinct_labels[inverse]
    centers = np.array([x[labels == c].mean() for c in range(k)])
    sizes = np.array([(labels == c).sum() for c in range(k)])
    withinss = np.array(
        [((x[labels == c] - centers[c]) ** 2).sum() for c in range(k)]
    )
    return Clustering(
        labels=labels,
        centers=centers,
        sizes=sizes,
        withinss=withinss,
        k=k,
        k_requested=k_requested,
    )


@dataclass(frozen=True)
class LevelAssignment:
    """Map from byte counts to granularity levels for one item.

    A nonzero byte count ``b`` gets level ``1 + #{boundaries <= b}``; zero bytes
    get level 0.

    Attributes:
        item: item index
        boundaries: smallest byte count of every level above 1, strictly increasing
        cluster_means: mean byte count of every nonzero level
    """

    item: int
    boundaries: np.ndarray
    cluster_means: np.ndarray

    @property
    def level_count(self) -> int:
        return len(self.cluster_means)

    def level_of(self, byte_counts: ArrayLike) -> np.ndarray:
        byte_counts = np.asarray(byte_counts)
        levels = np.searchsorted(self.boundaries, byte_counts, side="right") + 1
        return np.where(byte_counts > 0, levels, 0)


def assign_levels(row: ArrayLike, item: int, levels: int = 3) -> LevelAssignment:
    """Cluster the nonzero byte counts of one item into at most ``levels`` levels."""
    row = np.asarray(row)
    nonzero = row[row > 0]
    if nonzero.size == 0:
        return LevelAssignment(item, np.array([], dtype=float), np.array([], dtype=float))
    k = min(levels, np.unique(nonzero).size)
    clustering = ckmeans_1d(nonzero, k)
    boundaries = np.array(
        [nonzero[clustering.labels == c].min() for c in range(1, clustering.k)],
        dtype=float,
    )
    return LevelAssignment(item, boundaries, clustering.centers)


def level_assignments(gm: GranularityMatrix, levels: int = 3) -> List[LevelAssignment]:
    """Per-item level maps of a granularity matrix."""
    if levels < 1:
        raise ValueError("The maximum granularity level must be at least 1.")
    return [assign_levels(gm.cells[i], i, levels) for i in range(gm.n)]


def build_level_matrix(
    gm: GranularityMatrix,
    levels: int = 3,
    assignments: Optional[List[LevelAssignment]] = None,
) -> GranularityLevelMatrix:
    """Discretize byte counts into granularity levels, item by item.

    Args:
        gm: shared bytes per (item, user)
        levels: maximum level ``l``
        assignments: precomputed level maps (computed from ``gm`` if omitted)

    Returns:
        GranularityLevelMatrix with level 0 exactly where ``gm`` is 0.
    """
    if assignments is None:
        assignments = level_assignments(gm, levels)
    cells = np.stack(
        [assignment.level_of(gm.cells[assignment.item]) for assignment in assignments]
    )
    return GranularityLevelMatrix(gm.catalog, gm.registry, cells, levels=levels)


def granularity_stats(gm: GranularityMatrix) -> pd.DataFrame:
    """Per-item statistics of the nonzero byte counts.

    Returns:
        DataFrame indexed by item id with columns ``shared``, ``mean_bytes``,
        ``std_bytes`` and ``distinct``.
    """
    records = []
    for i, item in enumerate(gm.catalog):
        nonzero = gm.cells[i][gm.cells[i] > 0]
        records.append(
            {
                "item_id": item,
                "shared": int(nonzero.size),
                "mean_bytes": float(nonzero.mean()) if nonzero.size else 0.0,
                "std_bytes": float(nonzero.std()) if nonzero.size else 0.0,
                "distinct": int(np.unique(nonzero).size),
            }
        )
    return pd.DataFrame.from_records(records).set_index("item_id")
