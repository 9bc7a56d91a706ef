"""Synthetic online social network datasets with known ground truth.

A dataset is a social graph, a latent attitude per user and a granularity
matrix sampled from a graded response model. All draws come from one
``numpy`` PCG64 generator seeded by the config, consumed in a fixed order;
preferential-attachment graphs are drawn by ``networkx`` from the same seed.
"""

from dataclasses import dataclass
from typing import List, Optional

import networkx as nx
import numpy as np
import pandas as pd

from . import ValidationError
from .configure import GenConfig
from .core import GranularityMatrix, ItemCatalog, UserRegistry
from .graph import SocialGraph
from .irt import category_probabilities


@dataclass(frozen=True)
class GroundTruth:
    """Parameters a synthetic dataset was sampled from.

    Attributes:
        theta: true attitude of every user
        discrimination: true ``alpha_i`` of every item
        thresholds: true ordered thresholds, shape ``n × l``
        levels: sampled granularity level of every (item, user)
    """

    catalog: ItemCatalog
    registry: UserRegistry
    theta: np.ndarray
    discrimination: np.ndarray
    thresholds: np.ndarray
    levels: np.ndarray

    def items_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {"item_id": list(self.catalog), "discrimination": self.discrimination}
        )
        for k in range(self.thresholds.shape[1]):
            frame[f"threshold_{k + 1}"] = self.thresholds[:, k]
        return frame

    def users_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"user_id": list(self.registry), "theta": self.theta})


@dataclass(frozen=True)
class SyntheticDataset:
    graph: SocialGraph
    granularity: GranularityMatrix
    truth: GroundTruth


def new_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def user_registry(n_users: int) -> UserRegistry:
    """Zero-padded identifiers ``u0001, u0002, ...`` whose sorted order is the index order."""
    width = len(str(n_users))
    return UserRegistry([f"u{j + 1:0{width}d}" for j in range(n_users)])


def _ego_sample_edges(config: GenConfig, rng: np.random.Generator) -> List[tuple]:
    N = config.n_users
    graph = config.graph
    first_hop = min(graph.ego_first_hop, N - 1)
    if first_hop < 1:
        raise ValidationError("The ego sample needs at least one first-hop user.")
    edges = [(0, u) for u in range(1, first_hop + 1)]
    links = min(graph.ego_links_per_node, first_hop)
    for u in range(first_hop + 1, N):
        contacts = rng.choice(np.arange(1, first_hop + 1), size=links, replace=False)
        edges.extend((int(v), u) for v in np.sort(contacts))
    hop = np.arange(1, first_hop + 1)
    pairs = np.array([(a, b) for a in hop for b in hop if a < b]).reshape(-1, 2)
    if pairs.size:
        keep = rng.random(len(pairs)) < graph.ego_cross_link_probability
        edges.extend((int(a), int(b)) for a, b in pairs[keep])
    return edges


def generate_graph(
    config: GenConfig, rng: Optional[np.random.Generator] = None
) -> SocialGraph:
    """Draw the social graph.

    ``preferential`` mode grows a Barabási-Albert graph (``m`` edges per new
    node, or a mix of two edge counts); ``ego`` mode emits a seed user, its
    first hop and a second hop attached to first-hop users only.

    Raises:
        ValidationError: unknown mode or ``m >= N``
    """
    rng = rng if rng is not None else new_generator(config.seed)
    N = config.n_users
    graph = config.graph
    registry = user_registry(N)
    if graph.mode == "ego":
        return SocialGraph.from_edges(registry, _ego_sample_edges(config, rng))
    if graph.mode != "preferential":
        raise ValidationError(f"Unknown graph mode '{graph.mode}'.")
    m = graph.edges_per_node
    m_alt = graph.edges_per_node_alt
    if m < 1 or m >= N or (m_alt is not None and not 1 <= m_alt < N):
        raise ValidationError(
            f"Preferential attachment needs 1 <= m < N, got m={m}"
            f"{'' if m_alt is None else f', m_alt={m_alt}'} for N={N}."
        )
    if m_alt is not None and graph.alt_probability > 0:
        generated = nx.dual_barabasi_albert_graph(
            N, m_alt, m, graph.alt_probability, seed=config.seed
        )
    else:
        generated = nx.barabasi_albert_graph(N, m, seed=config.seed)
    return SocialGraph.from_edges(registry, generated.edges())


def generate_attitudes(
    g: SocialGraph, config: GenConfig, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """``theta^j = z_j + c * standardized degree of j`` with ``z_j`` standard normal."""
    rng = rng if rng is not None else new_generator(config.seed)
    degrees = g.degrees.astype(float)
    spread = degrees.std()
    standardized = (degrees - degrees.mean()) / spread if spread > 0 else np.zeros_like(degrees)
    return rng.standard_normal(g.N) + config.coupling * standardized


def _validated_ranges(config: GenConfig, item: str) -> np.ndarray:
    ranges = np.asarray(config.ranges_for(item), dtype=np.int64)
    if ranges.shape != (config.levels, 2):
        raise ValidationError(
            f"Item '{item}' needs {config.levels} byte ranges, got {ranges.tolist()}."
        )
    if ranges[0, 0] < 1 or (ranges[:, 0] > ranges[:, 1]).any():
        raise ValidationError(f"Byte ranges of item '{item}' must be positive [low, high] pairs.")
    if (ranges[1:, 0] <= ranges[:-1, 1]).any():
        raise ValidationError(f"Byte ranges of item '{item}' overlap or are not increasing.")
    return ranges


def generate_item_params(config: GenConfig, rng: np.random.Generator):
    """True discriminations ``(n,)`` and strictly increasing thresholds ``(n, l)``."""
    n = len(config.item_names())
    discrimination = rng.uniform(*config.discrimination_range, size=n)
    start = rng.uniform(*config.threshold_start_range, size=n)
    gaps = rng.uniform(*config.threshold_gap_range, size=(n, config.levels - 1))
    thresholds = start[:, None] + np.concatenate(
        [np.zeros((n, 1)), np.cumsum(gaps, axis=1)], axis=1
    )
    return discrimination, thresholds


def generate_granularity(
    theta: np.ndarray,
    config: GenConfig,
    rng: Optional[np.random.Generator] = None,
    registry: Optional[UserRegistry] = None,
):
    """Sample a level per (item, user) from the GRM, then a byte count from the level's range.

    Returns:
        ``(GranularityMatrix, GroundTruth)``
    """
    rng = rng if rng is not None else new_generator(config.seed)
    theta = np.asarray(theta, dtype=float)
    if config.levels < 1:
        raise ValidationError("The maximum granularity level must be at least 1.")
    catalog = ItemCatalog(config.item_names())
    registry = registry if registry is not None else user_registry(theta.size)
    ranges = [_validated_ranges(config, item) for item in catalog]
    discrimination, thresholds = generate_item_params(config, rng)

    levels = np.zeros((catalog.n, theta.size), dtype=np.int64)
    cells = np.zeros_like(levels)
    for i in range(catalog.n):
        probabilities = category_probabilities(
            np.full(config.levels, discrimination[i]), thresholds[i], theta
        )
        cumulative = np.cumsum(probabilities, axis=0)
        draws = rng.random(theta.size)
        levels[i] = np.minimum((cumulative < draws[None, :]).sum(axis=0), config.levels)
        low = np.where(levels[i] > 0, ranges[i][np.maximum(levels[i] - 1, 0), 0], 0)
        high = np.where(levels[i] > 0, ranges[i][np.maximum(levels[i] - 1, 0), 1], 0)
        cells[i] = rng.integers(low, high, endpoint=True)
    truth = GroundTruth(catalog, registry, theta, discrimination, thresholds, levels)
    return GranularityMatrix(catalog, registry, cells), truth


def generate_dataset(config: GenConfig) -> SyntheticDataset:
    """Graph, attitudes and granularity matrix of one seeded synthetic dataset."""
    rng = new_generator(config.seed)
    graph = generate_graph(config, rng)
    theta = generate_attitudes(graph, config, rng)
    granularity, truth = generate_granularity(theta, config, rng, graph.registry)
    return SyntheticDataset(graph, granularity, truth)
