"""Contains the shared data types of granulum and the matrix constructors.

Remarks:

- Matrices are dense and indexed ``[i, j]`` with ``i`` the item index and
  ``j`` the user index
- Items and users are addressed by zero-based indexes; string identifiers map
  to indexes through :class:`ItemCatalog` and :class:`UserRegistry`
- All objects are immutable after construction (arrays are made read-only)

"""

from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import ValidationError
from .typing import MODEL_LABELS, FloatVector, IntMatrix


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


class _Identifiers:
    """Ordered collection of unique, non-empty string identifiers."""

    kind = "identifier"

    def __init__(self, identifiers: Sequence[str]):
        identifiers = tuple(str(identifier) for identifier in identifiers)
        if len(identifiers) == 0:
            raise ValidationError(f"At least one {self.kind} is required.")
        if any(identifier == "" for identifier in identifiers):
            raise ValidationError(f"Empty {self.kind} identifiers are not allowed.")
        if len(set(identifiers)) != len(identifiers):
            seen, duplicates = set(), []
            for identifier in identifiers:
                if identifier in seen:
                    duplicates.append(identifier)
                seen.add(identifier)
            raise ValidationError(
                f"Duplicate {self.kind} identifiers: {sorted(set(duplicates))}"
            )
        self._identifiers = identifiers
        self._index = {identifier: i for i, identifier in enumerate(identifiers)}

    def __len__(self) -> int:
        return len(self._identifiers)

    def __iter__(self) -> Iterator[str]:
        return iter(self._identifiers)

    def __getitem__(self, index: int) -> str:
        return self._identifiers[index]

    def __contains__(self, identifier: str) -> bool:
        return identifier in self._index

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self._identifiers == other._identifiers

    def __hash__(self) -> int:
        return hash((type(self).__name__, self._identifiers))

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({len(self)} {self.kind}s)"

    def index(self, identifier: str) -> int:
        try:
            return self._index[identifier]
        except KeyError:
            raise KeyError(f"Unknown {self.kind} '{identifier}'.") from None

    def indices(self, identifiers: Sequence[str]) -> np.ndarray:
        return np.array([self.index(identifier) for identifier in identifiers], dtype=int)


class ItemCatalog(_Identifiers):
    """Ordered list of profile items (``n`` items, index ``i``)."""

    kind = "item"

    @property
    def items(self) -> Tuple[str, ...]:
        return self._identifiers

    @property
    def n(self) -> int:
        return len(self._identifiers)


class UserRegistry(_Identifiers):
    """Ordered list of users (``N`` users, index ``j``)."""

    kind = "user"

    @property
    def users(self) -> Tuple[str, ...]:
        return self._identifiers

    @property
    def N(self) -> int:
        return len(self._identifiers)

    def permuted(self, order: Sequence[int]) -> "UserRegistry":
        return UserRegistry([self._identifiers[j] for j in order])


@dataclass(frozen=True, eq=False)
class _ItemUserMatrix:
    catalog: ItemCatalog
    registry: UserRegistry
    cells: IntMatrix

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2 or cells.shape != (self.catalog.n, self.registry.N):
            raise ValidationError(
                f"{self.__class__.__name__} cells have shape {cells.shape}, "
                f"expected {(self.catalog.n, self.registry.N)}."
            )
        if cells.size and not np.all(np.equal(np.mod(cells, 1), 0)):
            raise ValidationError(f"{self.__class__.__name__} cells must be integers.")
        object.__setattr__(self, "cells", _frozen(cells.astype(np.int64)))
        self._validate()

    def _validate(self):
        pass

    @property
    def n(self) -> int:
        return self.catalog.n

    @property
    def N(self) -> int:
        return self.registry.N

    def same_as(self, other: "_ItemUserMatrix") -> bool:
        return (
            type(self) is type(other)
            and self.catalog == other.catalog
            and self.registry == other.registry
            and np.array_equal(self.cells, other.cells)
        )

    def permute_users(self, order: Sequence[int]):
        order = np.asarray(order, dtype=int)
        return self._replace(
            registry=self.registry.permuted(order), cells=self.cells[:, order]
        )

    def _replace(self, **changes):
        fields = {
            "catalog": self.catalog,
            "registry": self.registry,
            "cells": self.cells,
        }
        fields.update(changes)
        return type(self)(**fields)

    def to_long_frame(self, value_name: str) -> pd.DataFrame:
        """Return the matrix as a ``user_id, item_id, value`` table, user-major."""
        users = np.repeat(np.array(self.registry.users, dtype=object), self.n)
        items = np.tile(np.array(self.catalog.items, dtype=object), self.N)
        return pd.DataFrame(
            {"user_id": users, "item_id": items, value_name: self.cells.T.reshape(-1)}
        )


@dataclass(frozen=True, eq=False)
class ResponseMatrix(_ItemUserMatrix):
    """Binary share/hide matrix ``R``: ``cells[i, j] = 1`` iff user ``j`` shares item ``i``."""

    def _validate(self):
        if not np.isin(self.cells, (0, 1)).all():
            raise ValidationError("ResponseMatrix cells must be 0 or 1.")

    def row_counts(self) -> np.ndarray:
        """``|R_i|`` for every item."""
        return self.cells.sum(axis=1)

    def column_counts(self) -> np.ndarray:
        """``|R^j|`` for every user."""
        return self.cells.sum(axis=0)


@dataclass(frozen=True, eq=False)
class GranularityMatrix(_ItemUserMatrix):
    """Shared-data granularity in bytes per (item, user)."""

    def _validate(self):
        if (self.cells < 0).any():
            i, j = np.argwhere(self.cells < 0)[0]
            raise ValidationError(
                f"Negative byte count for item '{self.catalog[i]}', user '{self.registry[j]}'."
            )


@dataclass(frozen=True, eq=False)
class GranularityLevelMatrix(_ItemUserMatrix):
    """Discrete granularity levels in ``{0, ..., levels}`` per (item, user).

    Level 0 means that the item is not shared.
    """

    levels: int = 3

    def _validate(self):
        if self.levels < 1:
            raise ValidationError("The maximum granularity level must be at least 1.")
        if ((self.cells < 0) | (self.cells > self.levels)).any():
            raise ValidationError(
                f"GranularityLevelMatrix cells must lie in [0, {self.levels}]."
            )

    def _replace(self, **changes):
        changes.setdefault("levels", self.levels)
        return super()._replace(**changes)

    def same_as(self, other) -> bool:
        return super().same_as(other) and self.levels == other.levels

    def level_counts(self) -> np.ndarray:
        """``counts[i, k]`` = number of users at level ``k`` on item ``i``."""
        return np.stack(
            [(self.cells == k).sum(axis=1) for k in range(self.levels + 1)], axis=1
        )

    def to_response_matrix(self) -> ResponseMatrix:
        return ResponseMatrix(self.catalog, self.registry, (self.cells > 0).astype(int))


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Per-user privacy scores produced by one scoring model.

    Attributes:
        registry: users the scores belong to
        model: one of ``PSN, PSI, PSGN, PSGI, PSC-PRC, PSC-EVC, PSC-CC, PSC-BC, PSNA``
        values: one finite score per user
        diagnostics: free-form record of how the scores were obtained (fit
            convergence, damping factor, ...)
    """

    registry: UserRegistry
    model: str
    values: FloatVector
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODEL_LABELS:
            raise ValueError(f"Unknown scoring model label '{self.model}'.")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.registry.N,):
            raise ValidationError(
                f"ScoreVector has {values.shape} values for {self.registry.N} users."
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"{self.model} scores contain non-finite values.")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))

    def __len__(self) -> int:
        return self.registry.N

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"user_id": list(self.registry.users), "score": self.values})


def build_response_matrix(gm: GranularityMatrix) -> ResponseMatrix:
    """Threshold a granularity matrix at zero bytes.

    Args:
        gm: shared bytes per (item, user)

    Returns:
        ResponseMatrix with ``R[i, j] = 1`` iff ``gm[i, j] > 0``.
    """
    return ResponseMatrix(gm.catalog, gm.registry, (gm.cells > 0).astype(np.int64))


def row_share_count(r: ResponseMatrix, i: int) -> int:
    """Number of users sharing item ``i`` (``|R_i|``)."""
    if not 0 <= i < r.n:
        raise IndexError(f"Item index {i} out of range [0, {r.n}).")
    return int(r.cells[i].sum())


def column_share_count(r: ResponseMatrix, j: int) -> int:
    """Number of items user ``j`` shares (``|R^j|``)."""
    if not 0 <= j < r.N:
        raise IndexError(f"User index {j} out of range [0, {r.N}).")
    return int(r.cells[:, j].sum())


def response_matrix_from_frame(
    frame: pd.DataFrame,
    catalog: Optional[ItemCatalog] = None,
    registry: Optional[UserRegistry] = None,
    value: str = "shared",
) -> Tuple[ItemCatalog, UserRegistry, np.ndarray]:
    """Pivot a long ``user_id, item_id, <value>`` table into dense item × user cells.

    Missing (item, user) pairs are filled with 0. Items keep the order of first
    appearance and users are sorted unless a catalog/registry is supplied.
    """
    if catalog is None:
        catalog = ItemCatalog(pd.unique(frame["item_id"].astype(str)))
    if registry is None:
        registry = UserRegistry(sorted(pd.unique(frame["user_id"].astype(str))))
    cells = np.zeros((catalog.n, registry.N), dtype=np.int64)
    if len(frame):
        rows = catalog.indices(frame["item_id"].astype(str))
        cols = registry.indices(frame["user_id"].astype(str))
        cells[rows, cols] = frame[value].to_numpy(dtype=np.int64)
    return catalog, registry, cells
