"""Social graph analytics: centralities, centrality-based scores (PSC) and the network-aware score (PSNA).

The graph is undirected and simple. Adjacency is kept as a ``scipy.sparse``
CSR matrix; traversals use ``scipy.sparse.csgraph`` and sparse products over
batches of sources.

Remarks:

- The random-walk matrix is column-stochastic: column ``j`` is divided by the
  degree ``k_j``; columns of isolated users redistribute uniformly
- Fixed points are found by power iteration from the uniform vector, stopping
  when the max-norm change falls below the tolerance
- Closeness on a disconnected graph is computed within each component

"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import DegenerateRangeError, GranulumBase, ValidationError, apply_callbacks
from .core import ScoreVector, UserRegistry
from .typing import FloatVector

# Reference metrics of the real professional network the toolkit was designed for.
REFERENCE_STATS = {
    "average_clustering": 0.0722,
    "diameter": 4,
    "average_path_length": 2.34,
}

SOURCE_BATCH = 256

CENTRALITY_METHODS = ("PRC", "EVC", "CC", "BC")


@dataclass(frozen=True, eq=False)
class SocialGraph:
    """Undirected simple graph over the users of a registry.

    Attributes:
        registry: users (node ``j`` is user ``registry[j]``)
        adjacency: symmetric 0/1 CSR matrix without diagonal entries
        dropped_duplicates: duplicate edges discarded at construction
        dropped_self_loops: self-loops discarded at construction
    """

    registry: UserRegistry
    adjacency: sp.csr_matrix
    dropped_duplicates: int = 0
    dropped_self_loops: int = 0

    @classmethod
    def from_edges(
        cls, registry: UserRegistry, edges: Iterable[Tuple[int, int]]
    ) -> "SocialGraph":
        """Build a graph from user-index pairs.

        Self-loops and duplicate edges (in either orientation) are dropped
        with a warning.
        """
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        N = registry.N
        if pairs.size and (pairs.min() < 0 or pairs.max() >= N):
            raise ValidationError(f"Edge endpoint out of range [0, {N}).")
        loops = pairs[:, 0] == pairs[:, 1]
        pairs = np.sort(pairs[~loops], axis=1)
        unique = np.unique(pairs, axis=0) if pairs.size else pairs
        duplicates = len(pairs) - len(unique)
        logger = GranulumBase._metadata["logger"]
        if loops.any():
            logger.warning(f"Dropped {int(loops.sum())} self-loop(s).")
        if duplicates:
            logger.warning(f"Dropped {duplicates} duplicate edge(s).")
        rows = np.concatenate([unique[:, 0], unique[:, 1]])
        cols = np.concatenate([unique[:, 1], unique[:, 0]])
        adjacency = sp.csr_matrix(
            (np.ones(rows.size, dtype=float), (rows, cols)), shape=(N, N)
        )
        return cls(registry, adjacency, duplicates, int(loops.sum()))

    @classmethod
    def from_user_pairs(
        cls, registry: UserRegistry, pairs: Iterable[Tuple[str, str]]
    ) -> "SocialGraph":
        return cls.from_edges(
            registry, [(registry.index(a), registry.index(b)) for a, b in pairs]
        )

    @property
    def N(self) -> int:
        return self.registry.N

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.nnz // 2)

    @property
    def edges(self) -> np.ndarray:
        """Edges as ``(u, v)`` rows with ``u < v``, lexicographically sorted."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.stack([upper.row[order], upper.col[order]], axis=1).astype(np.int64)

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=0)).reshape(-1).astype(np.int64)

    def neighbors(self, j: int) -> np.ndarray:
        return self.adjacency.indices[self.adjacency.indptr[j] : self.adjacency.indptr[j + 1]]

    def relabel(self, order: Sequence[int]) -> "SocialGraph":
        """Graph with node ``k`` being node ``order[k]`` of this graph."""
        order = np.asarray(order, dtype=int)
        adjacency = self.adjacency[order][:, order].tocsr()
        return SocialGraph(self.registry.permuted(order), adjacency)

    def walk(self, x: np.ndarray) -> np.ndarray:
        """Apply the column-stochastic random-walk matrix ``T`` to ``x``."""
        degrees = self.degrees
        dangling = degrees == 0
        scaled = np.divide(x, degrees, out=np.zeros_like(x, dtype=float), where=~dangling)
        return self.adjacency @ scaled + x[dangling].sum() / self.N


@dataclass(frozen=True)
class GraphStats:
    """Summary metrics of a social graph (paths measured on the largest component)."""

    nodes: int
    edges: int
    average_clustering: float
    diameter: int
    average_path_length: float

    def to_frame(self) -> pd.DataFrame:
        """Metrics side by side with the reference network's values."""
        rows = [
            ("nodes", self.nodes, None),
            ("edges", self.edges, None),
            ("average_clustering", self.average_clustering, REFERENCE_STATS["average_clustering"]),
            ("diameter", self.diameter, REFERENCE_STATS["diameter"]),
            ("average_path_length", self.average_path_length, REFERENCE_STATS["average_path_length"]),
        ]
        return pd.DataFrame(rows, columns=["metric", "value", "reference"])


@dataclass(frozen=True)
class FixedPointResult:
    values: FloatVector
    converged: bool
    iterations: int
    change: float


class PowerIteration(GranulumBase):
    """Iterates ``x <- step(x)`` from a start vector until the max-norm change drops below ``tol``."""

    def __init__(
        self,
        name: str,
        step: Callable[[np.ndarray], np.ndarray],
        start: np.ndarray,
        tol: float = 1e-12,
        max_iter: int = 10000,
    ):
        self.name = name
        self.step = step
        self.start = np.asarray(start, dtype=float)
        self.tol = tol
        self.max_iter = max_iter

    @apply_callbacks()
    def solve(self) -> FixedPointResult:
        x = self.start
        change = np.inf
        for iteration in range(1, self.max_iter + 1):
            updated = self.step(x)
            change = float(np.max(np.abs(updated - x))) if x.size else 0.0
            x = updated
            if change < self.tol:
                return FixedPointResult(x, True, iteration, change)
        self.logger.warning(
            f"{self.name} did not converge in {self.max_iter} iterations "
            f"(last change {change:.2e})."
        )
        return FixedPointResult(x, False, self.max_iter, change)


def _centrality_vector(
    g: SocialGraph, method: str, values: np.ndarray, **diagnostics: Any
) -> ScoreVector:
    return ScoreVector(g.registry, f"PSC-{method}", values, diagnostics=diagnostics)


def pagerank(
    g: SocialGraph, d: float = 0.85, tol: float = 1e-12, max_iter: int = 10000
) -> ScoreVector:
    """PageRank centrality ``PRC = d T PRC + (1 - d) / N``.

    Args:
        g: non-empty graph
        d: damping factor in ``[0, 1)``
        tol: max-norm change at which iteration stops
        max_iter: iteration cap (reported as ``converged=False``)

    Returns:
        ScoreVector labeled ``PSC-PRC`` summing to 1.
    """
    if not 0 <= d < 1:
        raise ValueError(f"Damping factor must lie in [0, 1), got {d}.")
    N = g.N
    teleport = (1 - d) / N
    result = PowerIteration(
        "PageRank", lambda x: d * g.walk(x) + teleport, np.full(N, 1 / N), tol, max_iter
    ).solve()
    values = result.values / result.values.sum()
    return _centrality_vector(
        g,
        "PRC",
        values,
        damping=d,
        converged=result.converged,
        iterations=result.iterations,
    )


def largest_component(g: SocialGraph) -> Tuple[np.ndarray, SocialGraph]:
    """Nodes of the largest connected component (lowest index wins ties) and its induced subgraph."""
    _, labels = csgraph.connected_components(g.adjacency, directed=False)
    sizes = np.bincount(labels)
    nodes = np.flatnonzero(labels == np.argmax(sizes))
    return nodes, SocialGraph(g.registry.permuted(nodes), g.adjacency[nodes][:, nodes].tocsr())


def to_networkx(g: SocialGraph) -> nx.Graph:
    """The graph as a ``networkx.Graph`` with user identifiers as nodes."""
    graph = nx.Graph()
    graph.add_nodes_from(g.registry.users)
    users = g.registry.users
    graph.add_edges_from((users[u], users[v]) for u, v in g.edges)
    return graph


def eigenvector_centrality(
    g: SocialGraph, tol: float = 1e-10, max_iter: int = 10000
) -> ScoreVector:
    """Principal eigenvector of ``A`` on the largest component, unit Euclidean norm.

    Iterates with ``A + I``, which has the same eigenvectors and keeps
    bipartite components from oscillating. Users outside the largest
    component score 0.
    """
    if g.n_edges == 0:
        raise ValueError("Eigenvector centrality needs a graph with at least one edge.")
    nodes, component = largest_component(g)
    shifted = component.adjacency + sp.identity(component.N, format="csr")

    def step(x):
        y = shifted @ x
        return y / np.linalg.norm(y)

    start = np.full(component.N, 1 / np.sqrt(component.N))
    result = PowerIteration("Eigenvector centrality", step, start, tol, max_iter).solve()
    values = np.zeros(g.N)
    values[nodes] = result.values
    return _centrality_vector(
        g, "EVC", values, converged=result.converged, iterations=result.iterations
    )


def _distance_batches(g: SocialGraph, batch: int = SOURCE_BATCH):
    for start in range(0, g.N, batch):
        sources = np.arange(start, min(start + batch, g.N))
        yield sources, csgraph.shortest_path(
            g.adjacency, directed=False, unweighted=True, indices=sources
        )


def closeness_centrality(g: SocialGraph) -> ScoreVector:
    """Closeness ``(s - 1) / sum of distances`` with ``s`` the size of the node's component.

    Isolated users score 0.
    """
    values = np.zeros(g.N)
    for sources, distances in _distance_batches(g):
        reachable = np.isfinite(distances)
        sizes = reachable.sum(axis=1)
        totals = np.where(reachable, distances, 0).sum(axis=1)
        values[sources] = np.divide(
            sizes - 1, totals, out=np.zeros(sources.size), where=totals > 0
        )
    return _centrality_vector(g, "CC", values)


def betweenness_centrality(g: SocialGraph, normalized: bool = False) -> ScoreVector:
    """Shortest-path betweenness over unordered pairs of other users.

    Brandes' accumulation over the breadth-first DAG of every source,
    vectorized over batches of sources with sparse products.

    Args:
        g: graph
        normalized: divide by ``(N - 1)(N - 2) / 2``
    """
    N = g.N
    adjacency = g.adjacency
    totals = np.zeros(N)
    for start in range(0, N, SOURCE_BATCH):
        sources = np.arange(start, min(start + SOURCE_BATCH, N))
        b = sources.size
        distance = np.full((b, N), -1, dtype=np.int64)
        sigma = np.zeros((b, N))
        distance[np.arange(b), sources] = 0
        sigma[np.arange(b), sources] = 1.0
        frontier = sigma.copy()
        level = 0
        while frontier.any():
            reached = np.asarray((adjacency @ frontier.T).T)
            fresh = (distance == -1) & (reached > 0)
            level += 1
            distance[fresh] = level
            frontier = np.where(fresh, reached, 0.0)
            sigma += frontier
        delta = np.zeros((b, N))
        safe_sigma = np.where(sigma > 0, sigma, 1.0)
        for current in range(level, 0, -1):
            at_level = distance == current
            coefficient = np.where(at_level, (1 + delta) / safe_sigma, 0.0)
            pulled = np.asarray((adjacency @ coefficient.T).T)
            parents = distance == current - 1
            delta += np.where(parents, sigma * pulled, 0.0)
        delta[np.arange(b), sources] = 0.0
        totals += delta.sum(axis=0)
    values = totals / 2
    if normalized and N > 2:
        values = values / ((N - 1) * (N - 2) / 2)
    return _centrality_vector(g, "BC", values, normalized=bool(normalized))


def score_psc(
    g: SocialGraph,
    method: str,
    damping: float = 0.85,
    tol: float = 1e-12,
    max_iter: int = 10000,
    normalized_betweenness: bool = False,
) -> ScoreVector:
    """Centrality-based privacy score.

    Args:
        g: social graph
        method: ``PRC``, ``EVC``, ``CC`` or ``BC`` (case-insensitive)

    Raises:
        ValueError: unknown method
    """
    method = method.upper()
    if method == "PRC":
        return pagerank(g, damping, tol, max_iter)
    if method == "EVC":
        return eigenvector_centrality(g, max(tol, 1e-10), max_iter)
    if method == "CC":
        return closeness_centrality(g)
    if method == "BC":
        return betweenness_centrality(g, normalized=normalized_betweenness)
    raise ValueError(
        f"Unknown centrality method '{method}', expected one of {', '.join(CENTRALITY_METHODS)}."
    )


def propagate(
    g: SocialGraph, rho: np.ndarray, d: float, tol: float = 1e-12, max_iter: int = 10000
) -> FixedPointResult:
    """Fixed point of ``P = d T P + (1 - d) rho / sum(rho)`` before range normalization."""
    injected = (1 - d) * rho / rho.sum()
    return PowerIteration(
        "PSNA propagation",
        lambda x: d * g.walk(x) + injected,
        np.full(g.N, 1 / g.N),
        tol,
        max_iter,
    ).solve()


def score_psna(
    g: SocialGraph,
    rho: ScoreVector,
    d: float = 0.85,
    tol: float = 1e-12,
    max_iter: int = 10000,
) -> ScoreVector:
    """Network-aware privacy score: intrinsic scores propagated over the social graph.

    The propagated vector ``P`` is rescaled to the spread of the intrinsic
    scores: ``PSNA = P * range(rho) / range(P)``.

    Args:
        g: social graph over the same registry as ``rho``
        rho: non-negative intrinsic scores, not all equal
        d: damping factor in ``[0, 1)``

    Raises:
        DegenerateRangeError: ``rho`` or the propagated vector is constant
    """
    if rho.registry != g.registry:
        raise ValidationError("Intrinsic scores and graph have different users.")
    if not 0 <= d < 1:
        raise ValueError(f"Damping factor must lie in [0, 1), got {d}.")
    values = np.asarray(rho.values, dtype=float)
    if (values < 0).any():
        raise ValueError("PSNA needs non-negative intrinsic scores.")
    rho_range = values.max() - values.min()
    if rho_range == 0:
        raise DegenerateRangeError(
            f"Intrinsic {rho.model} scores are constant; PSNA normalization is undefined."
        )
    result = propagate(g, values, d, tol, max_iter)
    p_range = result.values.max() - result.values.min()
    if p_range == 0:
        raise DegenerateRangeError("Propagated scores are constant; PSNA normalization is undefined.")
    return ScoreVector(
        g.registry,
        "PSNA",
        result.values * rho_range / p_range,
        diagnostics={
            "damping": d,
            "intrinsic": rho.model,
            "converged": result.converged,
            "iterations": result.iterations,
        },
    )


def graph_stats(g: SocialGraph) -> GraphStats:
    """Node and edge counts, average clustering, and diameter and mean path length of the largest component."""
    if g.n_edges == 0:
        return GraphStats(g.N, 0, 0.0, 0, 0.0)
    clustering = float(nx.average_clustering(to_networkx(g)))
    _, component = largest_component(g)
    diameter, total, pairs = 0, 0.0, 0
    for _, distances in _distance_batches(component):
        diameter = max(diameter, int(distances.max()))
        total += float(distances.sum())
        pairs += distances.shape[0] * (component.N - 1)
    return GraphStats(g.N, g.n_edges, clustering, diameter, total / pairs)
