"""Structured configuration of granulum.

Every configurable part of the toolkit has a dataclass schema here. Concrete
values come from YAML presets (``presets/``), merged with ``key=value``
dot-list overrides given on the command line::

    cfg = load_config(GenConfig, "presets/generate/smoke.yaml", ["seed=7"])
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Type, TypeVar, Union

from omegaconf import MISSING, DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from . import ValidationError

T = TypeVar("T")

presets_directory = Path(
    os.environ.get("GRANULUM_PRESETS", Path(__file__).parent.parent / "presets")
)

DEFAULT_ITEMS = [
    "birthday",
    "connections_list",
    "company_web_pages",
    "personal_web_pages",
    "phone_number",
    "also_viewed_users_list",
    "education_history",
    "work_experiences",
    "user_interest_pages",
    "e_mail",
    "about",
    "location",
    "recommendations",
    "endorsements",
]


@dataclass
class FitConfig:
    """Settings of the marginal maximum likelihood (EM) fits of the IRT models.

    Attributes:
        quadrature_nodes: Gauss-Hermite nodes over the standard-normal prior
        tolerance: stop when the largest parameter change falls below it
        max_iterations: stop after this many EM iterations (flagged as non-converged)
        discrimination_min: lower bound of item discriminations
        discrimination_max: upper bound of item discriminations
        seed: seed of the initialization jitter
        init_jitter: standard deviation of the jitter added to starting values
        grm_discrimination: ``item`` (one slope per item) or ``level`` (one
            slope per threshold)
        min_users: smallest number of users a fit accepts
    """

    quadrature_nodes: int = 21
    tolerance: float = 1e-4
    max_iterations: int = 500
    discrimination_min: float = 0.05
    discrimination_max: float = 10.0
    seed: int = 0
    init_jitter: float = 0.0
    grm_discrimination: str = "item"
    min_users: int = 30


@dataclass
class ScoreConfig:
    """Settings of ``granulum score``."""

    models: List[str] = field(
        default_factory=lambda: [
            "psn",
            "psi",
            "psgn",
            "psgi",
            "psc:prc",
            "psc:evc",
            "psc:cc",
            "psc:bc",
            "psna",
        ]
    )
    damping: float = 0.85
    levels: int = 3
    centrality: str = "prc"
    intrinsic: str = "psi"
    compat_eq33: bool = False
    normalized_betweenness: bool = False
    tolerance: float = 1e-12
    max_iterations: int = 10000
    fit: FitConfig = field(default_factory=FitConfig)


@dataclass
class EvaluateConfig:
    """Settings of ``granulum evaluate``."""

    k_groups: List[int] = field(default_factory=lambda: [3, 4, 6, 8, 10, 12, 14])
    alpha: float = 0.05
    spearman: bool = False
    theta_min: float = -4.0
    theta_max: float = 4.0
    theta_step: float = 0.1
    dampings: List[float] = field(
        default_factory=lambda: [round(0.05 + 0.1 * i, 2) for i in range(10)]
    )
    sweep_models: List[str] = field(default_factory=lambda: ["psn", "psi"])


@dataclass
class GraphGenConfig:
    """Shape of the synthetic social graph.

    Attributes:
        mode: ``preferential`` (preferential attachment) or ``ego`` (2-hop ego sample)
        edges_per_node: edges brought by every new node in preferential mode
        edges_per_node_alt: alternative edge count, mixed in with
            probability ``alt_probability`` (dual preferential attachment)
        alt_probability: probability that a new node brings ``edges_per_node_alt`` edges
        ego_first_hop: size of the seed's first hop in ego mode
        ego_links_per_node: first-hop contacts of every second-hop user
        ego_cross_link_probability: probability of an edge between two first-hop users
    """

    mode: str = "preferential"
    edges_per_node: int = 7
    edges_per_node_alt: Optional[int] = None
    alt_probability: float = 0.0
    ego_first_hop: int = 109
    ego_links_per_node: int = 2
    ego_cross_link_probability: float = 0.05


@dataclass
class GenConfig:
    """Settings of the synthetic dataset generator.

    Attributes:
        seed: seed of every random draw
        n_users: number of users ``N``
        items: item identifiers (ignored when ``n_items`` > 0)
        n_items: generate ``n_items`` identifiers ``item_00, item_01, ...`` instead
        levels: maximum granularity level ``l``
        graph: graph shape
        discrimination_range: true item discriminations are uniform on this range
        threshold_start_range: the lowest true threshold of an item is uniform on it
        threshold_gap_range: gaps between consecutive true thresholds are uniform on it
        coupling: attitude-degree coupling strength ``c``
        byte_ranges: inclusive ``[low, high]`` byte range of every nonzero level
        item_byte_ranges: per-item overrides of ``byte_ranges``
    """

    seed: int = MISSING
    n_users: int = MISSING
    items: List[str] = field(default_factory=lambda: list(DEFAULT_ITEMS))
    n_items: int = 0
    levels: int = 3
    graph: GraphGenConfig = field(default_factory=GraphGenConfig)
    discrimination_range: List[float] = field(default_factory=lambda: [0.5, 2.0])
    threshold_start_range: List[float] = field(default_factory=lambda: [-2.0, 0.0])
    threshold_gap_range: List[float] = field(default_factory=lambda: [0.5, 1.5])
    coupling: float = 0.0
    byte_ranges: List[List[int]] = field(
        default_factory=lambda: [[10, 80], [120, 400], [500, 1500]]
    )
    item_byte_ranges: Dict[str, List[List[int]]] = field(default_factory=dict)

    def item_names(self) -> List[str]:
        if self.n_items > 0:
            return [f"item_{i:02d}" for i in range(self.n_items)]
        return list(self.items)

    def ranges_for(self, item: str) -> List[List[int]]:
        return [list(r) for r in self.item_byte_ranges.get(item, self.byte_ranges)]


def _check_missing(cfg: DictConfig):
    missing = sorted(OmegaConf.missing_keys(cfg))
    if missing:
        raise ValidationError(f"Missing required config field '{missing[0]}'.")


def load_config(
    schema: Type[T],
    path: Optional[Union[str, Path]] = None,
    overrides: Sequence[str] = (),
    base: Optional[DictConfig] = None,
) -> T:
    """Merge a schema with preset values, a YAML file and dot-list overrides.

    Args:
        schema: dataclass describing the config
        path: YAML file to merge over the schema defaults
        overrides: ``key=value`` strings applied last
        base: preset section merged before ``path``

    Returns:
        An instance of ``schema``.

    Raises:
        ValidationError: if the YAML does not match the schema or a required
            field is left unset.
    """
    if path is not None and not Path(path).exists():
        raise ValidationError(f"Config file {path} not found.")
    try:
        cfg = OmegaConf.structured(schema)
        if base is not None:
            cfg = OmegaConf.merge(cfg, base)
        if path is not None:
            cfg = OmegaConf.merge(cfg, OmegaConf.load(path))
        if overrides:
            cfg = OmegaConf.merge(cfg, OmegaConf.from_dotlist(list(overrides)))
    except OmegaConfBaseException as e:
        raise ValidationError(f"Invalid {schema.__name__}: {e}") from e
    _check_missing(cfg)
    return OmegaConf.to_object(cfg)


def config_to_dict(config) -> dict:
    return OmegaConf.to_container(OmegaConf.structured(config), resolve=True)
