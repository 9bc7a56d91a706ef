"""A toolkit for scoring the privacy risk of online social network users.

Scores are computed from share/hide flags, from the granularity (in bytes) of
what users share and from the social graph, and the scoring models are
compared with goodness-of-fit and correlation analysis.
"""

__version__ = "0.1.0"

import logging
import warnings

from rich.logging import RichHandler


class GranulumException(Exception):
    """Base class of all errors raised by granulum."""


class ValidationError(GranulumException):
    """Raised when input data or configuration violates the expected format."""


class UndefinedCorrelationError(GranulumException):
    """Raised when a correlation is requested for a vector with zero variance."""


class DegenerateRangeError(GranulumException):
    """Raised when a range-based normalization divides by a zero range."""


logging.basicConfig(
    level="INFO", format="%(message)s", datefmt="[%X]", handlers=[RichHandler()]
)

from .__internal.base import GranulumBase, apply_callbacks
from .__internal.metadata import Metadata

from . import core
from . import granularity
from . import naive
from . import irt
from . import graph
from . import evaluation
from . import synthetic
from . import callback
from . import bundle
from . import scenario

from .core import (
    ItemCatalog,
    UserRegistry,
    ResponseMatrix,
    GranularityMatrix,
    GranularityLevelMatrix,
    ScoreVector,
    build_response_matrix,
    row_share_count,
    column_share_count,
)
from .configure import FitConfig, GenConfig, ScoreConfig, EvaluateConfig

warnings.filterwarnings("ignore", category=RuntimeWarning, module="scipy.optimize")
