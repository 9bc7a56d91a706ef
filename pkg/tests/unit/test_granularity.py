from itertools import combinations

from granulum.core import GranularityMatrix, ItemCatalog, UserRegistry
from granulum.granularity import (
    assign_levels,
    build_level_matrix,
    ckmeans_1d,
    granularity_stats,
    measure_bytes,
    measure_profile,
)
import numpy as np
import pytest


def brute_force_withinss(values, k):
    x = np.sort(np.asarray(values, dtype=float))
    best = np.inf
    for cuts in combinations(range(1, x.size), k - 1):
        parts = np.split(x, cuts)
        best = min(best, sum(((part - part.mean()) ** 2).sum() for part in parts))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20)


def test_measure_bytes():
    assert measure_bytes(None) == 0
    assert measure_bytes("") == 0
    assert measure_bytes("abc") == 3
    assert measure_bytes("é") == 2
    assert measure_bytes("  a \n\t b ") == 3
    assert measure_bytes(["MSc Physics", "", "BSc  Maths"]) == len("MSc Physics;BSc Maths")


def test_measure_profile():
    catalog = ItemCatalog(["about", "birthday", "location"])
    counts = measure_profile({"about": "hello", "location": ["a", "b"]}, catalog)
    assert counts.tolist() == [5, 0, 3]


def test_ckmeans_matches_brute_force(rng):
    for _ in range(1000):
        size = int(rng.integers(1, 11))
        values = rng.integers(0, 21, size=size)
        k = int(rng.integers(1, min(4, np.unique(values).size) + 1))
        clustering = ckmeans_1d(values, k)
        assert clustering.k == k
        assert np.isclose(
            clustering.total_withinss, brute_force_withinss(values, k), rtol=1e-12, atol=1e-9
        )


def test_ckmeans_clusters_are_contiguous(rng):
    values = rng.normal(size=200) * 50
    clustering = ckmeans_1d(values, 4)
    clusters = clustering.clusters(values)
    assert sum(len(c) for c in clusters) == values.size
    for lower, upper in zip(clusters, clusters[1:]):
        assert lower.max() < upper.min()
    assert np.all(np.diff(clustering.centers) > 0)


def test_ckmeans_reduces_k():
    clustering = ckmeans_1d([5, 5, 9, 9], 3)
    assert clustering.k == 2 and clustering.reduced
    assert clustering.total_withinss == 0.0
    with pytest.raises(ValueError):
        ckmeans_1d([], 2)


def test_level_example():
    catalog = ItemCatalog(["about"])
    registry = UserRegistry([f"u{j}" for j in range(6)])
    gm = GranularityMatrix(catalog, registry, np.array([[0, 12, 15, 300, 310, 900]]))
    glm = build_level_matrix(gm, levels=3)
    assert glm.cells[0].tolist() == [0, 1, 1, 2, 2, 3]


def test_levels_are_monotone_and_zero_only_for_zero_bytes(rng):
    catalog = ItemCatalog(["a", "b", "c"])
    registry = UserRegistry([f"u{j:03d}" for j in range(300)])
    cells = rng.integers(1, 2000, size=(3, 300)) * (rng.random((3, 300)) < 0.6)
    gm = GranularityMatrix(catalog, registry, cells)
    glm = build_level_matrix(gm, levels=3)
    assert np.array_equal(glm.cells == 0, gm.cells == 0)
    for i in range(3):
        order = np.argsort(gm.cells[i], kind="stable")
        assert np.all(np.diff(glm.cells[i][order]) >= 0)


def test_assign_levels_few_distinct_values():
    assignment = assign_levels([0, 40, 40, 0], item=0, levels=3)
    assert assignment.level_count == 1
    assert assignment.level_of([0, 40, 100]).tolist() == [0, 1, 1]
    empty = assign_levels([0, 0], item=1)
    assert empty.level_of([0, 0]).tolist() == [0, 0]


def test_granularity_stats():
    catalog = ItemCatalog(["a", "b"])
    registry = UserRegistry(["x", "y", "z"])
    gm = GranularityMatrix(catalog, registry, np.array([[10, 30, 0], [0, 0, 0]]))
    stats = granularity_stats(gm)
    assert stats.loc["a", "shared"] == 2
    assert stats.loc["a", "mean_bytes"] == 20.0
    assert stats.loc["b", "distinct"] == 0
