from granulum import ValidationError
from granulum.core import (
    GranularityLevelMatrix,
    GranularityMatrix,
    ItemCatalog,
    ResponseMatrix,
    ScoreVector,
    UserRegistry,
    build_response_matrix,
    column_share_count,
    response_matrix_from_frame,
    row_share_count,
)
import numpy as np
import pandas as pd
import pytest


@pytest.fixture
def catalog():
    return ItemCatalog(["birthday", "about", "location"])


@pytest.fixture
def registry():
    return UserRegistry(["a", "b", "c", "d"])


@pytest.fixture
def granularity(catalog, registry):
    return GranularityMatrix(
        catalog,
        registry,
        np.array([[431, 0, 12, 7], [0, 0, 0, 0], [5, 0, 2, 9]]),
    )


def test_build_response_matrix(granularity):
    r = build_response_matrix(granularity)
    assert np.array_equal(r.cells, [[1, 0, 1, 1], [0, 0, 0, 0], [1, 0, 1, 1]])
    assert r.catalog == granularity.catalog and r.registry == granularity.registry


def test_build_response_matrix_is_idempotent(granularity):
    assert build_response_matrix(granularity).same_as(build_response_matrix(granularity))


def test_all_zero_granularity(catalog, registry):
    gm = GranularityMatrix(catalog, registry, np.zeros((3, 4), dtype=int))
    assert build_response_matrix(gm).cells.sum() == 0


def test_share_counts(catalog, registry):
    r = ResponseMatrix(
        catalog, registry, np.array([[1, 1, 0, 1], [0, 0, 0, 0], [1, 1, 1, 1]])
    )
    assert row_share_count(r, 0) == 3
    assert row_share_count(r, 1) == 0
    assert row_share_count(r, 2) == 4
    assert column_share_count(r, 2) == 1
    assert column_share_count(r, 0) == 2
    assert r.row_counts().sum() == r.column_counts().sum() == r.cells.sum()


def test_share_count_out_of_range(catalog, registry):
    r = ResponseMatrix(catalog, registry, np.zeros((3, 4), dtype=int))
    with pytest.raises(IndexError):
        row_share_count(r, 3)
    with pytest.raises(IndexError):
        column_share_count(r, -1)


def test_full_column():
    catalog = ItemCatalog([f"item_{i}" for i in range(12)])
    r = ResponseMatrix(catalog, UserRegistry(["u"]), np.ones((12, 1), dtype=int))
    assert column_share_count(r, 0) == 12


def test_identifiers_must_be_unique_and_non_empty():
    with pytest.raises(ValidationError):
        ItemCatalog(["a", "a"])
    with pytest.raises(ValidationError):
        UserRegistry([])
    with pytest.raises(ValidationError):
        UserRegistry(["a", ""])
    with pytest.raises(KeyError):
        UserRegistry(["a"]).index("b")


def test_matrix_invariants(catalog, registry):
    with pytest.raises(ValidationError):
        ResponseMatrix(catalog, registry, np.full((3, 4), 2))
    with pytest.raises(ValidationError, match="item 'about', user 'c'"):
        cells = np.zeros((3, 4), dtype=int)
        cells[1, 2] = -1
        GranularityMatrix(catalog, registry, cells)
    with pytest.raises(ValidationError):
        GranularityLevelMatrix(catalog, registry, np.full((3, 4), 4), levels=3)
    with pytest.raises(ValidationError):
        ResponseMatrix(catalog, registry, np.zeros((4, 3), dtype=int))


def test_cells_are_read_only(granularity):
    with pytest.raises(ValueError):
        granularity.cells[0, 0] = 1


def test_level_matrix_helpers(catalog, registry):
    glm = GranularityLevelMatrix(
        catalog, registry, np.array([[0, 1, 2, 3], [0, 0, 0, 0], [3, 3, 1, 0]]), levels=3
    )
    assert np.array_equal(glm.level_counts()[2], [1, 1, 0, 2])
    assert np.array_equal(glm.to_response_matrix().cells[0], [0, 1, 1, 1])
    assert glm.permute_users([3, 2, 1, 0]).levels == 3


def test_score_vector_checks(registry):
    ScoreVector(registry, "PSN", [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ScoreVector(registry, "PSX", [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        ScoreVector(registry, "PSN", [0.0, np.nan, 2.0, 3.0])
    with pytest.raises(ValidationError):
        ScoreVector(registry, "PSN", [0.0, 1.0])


def test_long_frame_round_trip(granularity):
    frame = granularity.to_long_frame("bytes")
    assert list(frame.columns) == ["user_id", "item_id", "bytes"]
    assert list(frame["user_id"][:3]) == ["a", "a", "a"]
    catalog, registry, cells = response_matrix_from_frame(frame, value="bytes")
    assert catalog == granularity.catalog
    assert registry == granularity.registry
    assert np.array_equal(cells, granularity.cells)


def test_frame_missing_pairs_are_zero():
    frame = pd.DataFrame(
        {"user_id": ["b", "a"], "item_id": ["x", "y"], "shared": [1, 1]}
    )
    catalog, registry, cells = response_matrix_from_frame(frame)
    assert list(registry) == ["a", "b"]
    assert list(catalog) == ["x", "y"]
    assert np.array_equal(cells, [[0, 1], [1, 0]])
