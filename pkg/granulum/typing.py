"""Type Specifications for granulum.

This module contains type aliases for the array types that are passed between
the scoring modules. Matrices are indexed ``[item, user]``; vectors over users
are indexed by the zero-based user index of a :class:`~granulum.core.UserRegistry`
and vectors over items by the item index of an :class:`~granulum.core.ItemCatalog`.
"""

from typing import Literal, Sequence, Union

import numpy as np
import numpy.typing as npt


IntMatrix = npt.NDArray[np.int64]
"""Dense ``n × N`` integer matrix (responses, bytes or granularity levels)."""

FloatMatrix = npt.NDArray[np.float64]
"""Dense real matrix, e.g. per-cell visibilities ``V[i, j]``."""

FloatVector = npt.NDArray[np.float64]
"""One real value per user or per item."""

ArrayLike = Union[npt.ArrayLike, Sequence[float]]
"""Anything numpy can turn into an array."""

ModelLabel = Literal[
    "PSN",
    "PSI",
    "PSGN",
    "PSGI",
    "PSC-PRC",
    "PSC-EVC",
    "PSC-CC",
    "PSC-BC",
    "PSNA",
]
"""Labels of the scoring models a :class:`~granulum.core.ScoreVector` may carry."""

MODEL_LABELS = (
    "PSN",
    "PSI",
    "PSGN",
    "PSGI",
    "PSC-PRC",
    "PSC-EVC",
    "PSC-CC",
    "PSC-BC",
    "PSNA",
)
