"""Item response theory scoring: the two-parameter logistic model (PSI) and the graded response model (PSGI).

Both models are fitted by marginal maximum likelihood with the
expectation-maximization algorithm over a standard-normal latent attitude,
integrated with Gauss-Hermite quadrature. User attitudes are expected a
posteriori (EAP) estimates.

Remarks:

- Items whose responses are constant cannot be fitted; they are excluded,
  reported, and carry NaN parameters
- Thresholds of the graded response model are parameterized as a first
  threshold plus exponentiated gaps, so they stay strictly increasing
- The latent scale is fixed by the prior (mean 0, variance 1)

"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import expit, log_expit, logsumexp

from . import GranulumBase, apply_callbacks
from .configure import FitConfig
from .core import (
    GranularityLevelMatrix,
    ItemCatalog,
    ResponseMatrix,
    ScoreVector,
    UserRegistry,
)
from .typing import ArrayLike, FloatMatrix, FloatVector

PROBABILITY_FLOOR = 1e-12


def gauss_hermite_grid(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights of the standard normal distribution."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return x, w / w.sum()


@dataclass(frozen=True)
class ItemParams:
    """Fitted two-parameter logistic item parameters.

    Attributes:
        catalog: items the parameters belong to
        discrimination: ``alpha_i`` (NaN for excluded items)
        sensitivity: ``beta_i`` (NaN for excluded items)
        fitted: mask of the items that took part in the fit
    """

    catalog: ItemCatalog
    discrimination: FloatVector
    sensitivity: FloatVector
    fitted: np.ndarray

    @property
    def excluded(self) -> List[str]:
        return [item for item, ok in zip(self.catalog, self.fitted) if not ok]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "item_id": list(self.catalog),
                "discrimination": self.discrimination,
                "sensitivity": self.sensitivity,
                "fitted": self.fitted,
            }
        )


@dataclass(frozen=True)
class GradedItemParams:
    """Fitted graded response model item parameters.

    Only the levels an item was observed at get a threshold; the lowest
    observed level of an item has none.

    Attributes:
        catalog: items the parameters belong to
        levels: maximum granularity level ``l``
        discrimination: ``alpha_i`` per item (mean slope for the per-level variant)
        thresholds: strictly increasing ``beta_ik`` of every item
        threshold_levels: granularity level of every threshold
        level_discrimination: slope of every threshold (all equal to
            ``alpha_i`` unless fitted per level)
        observed_levels: sorted levels observed for every item
        fitted: mask of the items that took part in the fit
    """

    catalog: ItemCatalog
    levels: int
    discrimination: FloatVector
    thresholds: Tuple[np.ndarray, ...]
    threshold_levels: Tuple[np.ndarray, ...]
    level_discrimination: Tuple[np.ndarray, ...]
    observed_levels: Tuple[np.ndarray, ...]
    fitted: np.ndarray

    @property
    def excluded(self) -> List[str]:
        return [item for item, ok in zip(self.catalog, self.fitted) if not ok]

    def threshold(self, item: int, level: int) -> float:
        position = self._position(item, level)
        return float(self.thresholds[item][position])

    def slope(self, item: int, level: int) -> float:
        position = self._position(item, level)
        return float(self.level_discrimination[item][position])

    def _position(self, item: int, level: int) -> int:
        if not 0 <= item < self.catalog.n:
            raise IndexError(f"Item index {item} out of range [0, {self.catalog.n}).")
        matches = np.flatnonzero(self.threshold_levels[item] == level)
        if matches.size == 0:
            raise KeyError(
                f"Item '{self.catalog[item]}' has no threshold for level {level}."
            )
        return int(matches[0])

    def sensitivity_table(self) -> FloatMatrix:
        """``beta[i, k]`` with NaN where an item has no threshold for level ``k``."""
        table = np.full((self.catalog.n, self.levels + 1), np.nan)
        for i in range(self.catalog.n):
            table[i, self.threshold_levels[i]] = self.thresholds[i]
        return table

    def to_frame(self) -> pd.DataFrame:
        records = []
        for i, item in enumerate(self.catalog):
            for level, beta, alpha in zip(
                self.threshold_levels[i], self.thresholds[i], self.level_discrimination[i]
            ):
                records.append(
                    {
                        "item_id": item,
                        "level": int(level),
                        "discrimination": float(alpha),
                        "threshold": float(beta),
                    }
                )
        return pd.DataFrame.from_records(
            records, columns=["item_id", "level", "discrimination", "threshold"]
        )


@dataclass(frozen=True)
class AbilityVector:
    """Estimated latent attitudes ``theta^j``."""

    registry: UserRegistry
    theta: FloatVector
    method: str = "EAP"
    standard_error: Optional[FloatVector] = None

    def __len__(self) -> int:
        return self.registry.N


@dataclass(frozen=True)
class FitResult:
    """Outcome of an EM fit; unpacks as ``(params, abilities, log_likelihood)``."""

    params: Union[ItemParams, GradedItemParams]
    abilities: AbilityVector
    log_likelihood: float
    converged: bool
    iterations: int
    history: Tuple[float, ...] = ()
    excluded: Tuple[str, ...] = ()

    def __iter__(self):
        return iter((self.params, self.abilities, self.log_likelihood))

    def diagnostics(self) -> Dict[str, Any]:
        return {
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "excluded_items": list(self.excluded),
        }


class LatentTraitModel(GranulumBase, ABC):
    """Marginal maximum likelihood estimation of an IRT model by EM.

    Subclasses define the per-item likelihood on the quadrature grid and the
    per-item M-step. The EM loop, convergence control and EAP scoring live here.
    """

    name = "IRT"

    def __init__(self, config: Optional[FitConfig] = None):
        """Initialize an EM estimator.

        Args:
            config: fit settings (defaults of :class:`FitConfig` if omitted)
        """
        super().__init__()
        self.config = config if config is not None else FitConfig()
        self.nodes, self.weights = gauss_hermite_grid(self.config.quadrature_nodes)
        self.log_weights = np.log(self.weights)
        self.iteration = 0
        self.history: List[float] = []
        self.posterior: Optional[np.ndarray] = None

    @abstractmethod
    def item_log_probabilities(self, item: int, params: np.ndarray) -> np.ndarray:
        """Log-probability of every response category on the grid, shape ``(categories, Q)``."""

    @abstractmethod
    def initial_params(self, item: int) -> np.ndarray:
        pass

    @abstractmethod
    def natural_params(self, item: int, params: np.ndarray) -> np.ndarray:
        """Parameters on the reported scale, used for the convergence check."""

    def bounds(self, item: int, params: np.ndarray) -> List[Tuple[Optional[float], Optional[float]]]:
        return [(None, None)] * len(params)

    def item_objective(self, item: int, params: np.ndarray, counts: np.ndarray) -> float:
        log_probabilities = self.item_log_probabilities(item, params)
        return -float(np.sum(counts * log_probabilities))

    def item_gradient(self, item: int, params: np.ndarray, counts: np.ndarray):
        return None

    def prepare(self, responses: Sequence[np.ndarray], n_categories: Sequence[int]):
        self.responses = [np.asarray(y, dtype=int) for y in responses]
        self.n_categories = list(n_categories)
        self.indicators = [
            np.eye(m, dtype=float)[y] for y, m in zip(self.responses, self.n_categories)
        ]
        self.n_users = self.responses[0].size if self.responses else 0
        rng = np.random.default_rng(self.config.seed)
        self.params = []
        for i in range(len(self.responses)):
            start = self.initial_params(i)
            if self.config.init_jitter > 0:
                start = start + self.config.init_jitter * rng.standard_normal(start.size)
            self.params.append(self._clip(i, start))

    def _clip(self, item: int, params: np.ndarray) -> np.ndarray:
        params = np.array(params, dtype=float)
        for p, (low, high) in enumerate(self.bounds(item, params)):
            params[p] = np.clip(
                params[p],
                -np.inf if low is None else low,
                np.inf if high is None else high,
            )
        return params

    def e_step(self) -> Tuple[np.ndarray, float]:
        """Posterior weights of every user over the grid and the marginal log-likelihood."""
        log_likelihood = np.zeros((self.n_users, self.nodes.size))
        for i, y in enumerate(self.responses):
            log_likelihood += self.item_log_probabilities(i, self.params[i])[y]
        log_joint = log_likelihood + self.log_weights[None, :]
        log_marginal = logsumexp(log_joint, axis=1)
        posterior = np.exp(log_joint - log_marginal[:, None])
        return posterior, float(np.sum(log_marginal))

    def m_step(self, posterior: np.ndarray) -> List[np.ndarray]:
        updated = []
        for i in range(len(self.responses)):
            counts = self.indicators[i].T @ posterior
            start = self.params[i]
            objective = lambda params, i=i, counts=counts: self.item_objective(
                i, params, counts
            )
            gradient = self.item_gradient(i, start, counts)
            jac = (
                (lambda params, i=i, counts=counts: self.item_gradient(i, params, counts))
                if gradient is not None
                else None
            )
            result = minimize(
                objective,
                start,
                jac=jac,
                method="L-BFGS-B",
                bounds=self.bounds(i, start),
            )
            candidate = self._clip(i, result.x)
            if np.all(np.isfinite(candidate)) and objective(candidate) <= objective(start):
                updated.append(candidate)
            else:
                updated.append(start)
        return updated

    @apply_callbacks()
    def em_step(self) -> Dict[str, Any]:
        """Run one EM iteration.

        Returns:
            Record with the iteration number, the marginal log-likelihood of
            the parameters the iteration started from and the largest change
            of any reported parameter.
        """
        posterior, log_likelihood = self.e_step()
        updated = self.m_step(posterior)
        max_change = 0.0
        for i, params in enumerate(updated):
            change = np.abs(
                self.natural_params(i, params) - self.natural_params(i, self.params[i])
            )
            if change.size:
                max_change = max(max_change, float(change.max()))
        self.params = updated
        self.iteration += 1
        self.history.append(log_likelihood)
        return {
            "model": self.name,
            "iteration": self.iteration,
            "log_likelihood": log_likelihood,
            "max_change": max_change,
        }

    def run(self) -> Tuple[bool, float]:
        """Iterate EM until the parameter change drops below tolerance.

        Returns:
            ``(converged, final log-likelihood)``
        """
        converged = False
        if not self.responses:
            return True, 0.0
        while self.iteration < self.config.max_iterations:
            record = self.em_step()
            if record["max_change"] < self.config.tolerance:
                converged = True
                break
        if not converged:
            self.logger.warning(
                f"{self.name} fit did not converge in {self.config.max_iterations} iterations."
            )
        self.posterior, log_likelihood = self.e_step()
        self.history.append(log_likelihood)
        return converged, log_likelihood

    def abilities(self, registry: UserRegistry) -> AbilityVector:
        if self.posterior is None:
            return AbilityVector(registry, np.zeros(registry.N), standard_error=np.ones(registry.N))
        theta = self.posterior @ self.nodes
        variance = self.posterior @ (self.nodes**2) - theta**2
        return AbilityVector(
            registry, theta, method="EAP", standard_error=np.sqrt(np.maximum(variance, 0.0))
        )


class TwoParameterLogistic(LatentTraitModel):
    """Two-parameter logistic model for binary share/hide responses.

    Internally each item is parameterized by slope ``a`` and intercept ``c``
    of the logit ``a * theta + c``; the sensitivity is ``beta = -c / a``.
    """

    name = "2PL"

    def fit(self, r: ResponseMatrix) -> FitResult:
        """Fit the model to a response matrix.

        Args:
            r: response matrix with at least ``config.min_users`` users

        Returns:
            FitResult with :class:`ItemParams` and EAP abilities.
        """
        if r.N < self.config.min_users:
            raise ValueError(
                f"The 2PL fit needs at least {self.config.min_users} users, got {r.N}."
            )
        counts = r.row_counts()
        fitted = (counts > 0) & (counts < r.N)
        for item in np.flatnonzero(~fitted):
            self.logger.warning(
                f"Item '{r.catalog[item]}' is {'shared' if counts[item] else 'hidden'} "
                "by every user and is excluded from the 2PL fit."
            )
        self.items = np.flatnonzero(fitted)
        self.share_rates = counts[self.items] / r.N
        self.prepare([r.cells[i] for i in self.items], [2] * self.items.size)
        converged, log_likelihood = self.run()

        discrimination = np.full(r.n, np.nan)
        sensitivity = np.full(r.n, np.nan)
        for position, item in enumerate(self.items):
            a, c = self.params[position]
            discrimination[item] = a
            sensitivity[item] = -c / a
        params = ItemParams(r.catalog, discrimination, sensitivity, fitted)
        return FitResult(
            params=params,
            abilities=self.abilities(r.registry),
            log_likelihood=log_likelihood,
            converged=converged,
            iterations=self.iteration,
            history=tuple(self.history),
            excluded=tuple(params.excluded),
        )

    def initial_params(self, item: int) -> np.ndarray:
        rate = np.clip(self.share_rates[item], 0.01, 0.99)
        # marginalizing over N(0, 1) shrinks a unit-slope logit by about 0.86
        return np.array([1.0, np.log(rate / (1 - rate)) / 0.86])

    def bounds(self, item, params):
        return [(self.config.discrimination_min, self.config.discrimination_max), (None, None)]

    def natural_params(self, item, params):
        a, c = params
        return np.array([a, -c / a])

    def item_log_probabilities(self, item, params):
        a, c = params
        logits = a * self.nodes + c
        return np.stack([log_expit(-logits), log_expit(logits)])

    def item_gradient(self, item, params, counts):
        a, c = params
        p = expit(a * self.nodes + c)
        total = counts.sum(axis=0)
        residual = counts[1] - total * p
        return np.array([-np.sum(residual * self.nodes), -np.sum(residual)])


class GradedResponse(LatentTraitModel):
    """Samejima's graded response model for ordered granularity levels.

    An item observed at levels ``L_0 < L_1 < ... < L_m`` has ``m`` thresholds;
    ``P(level >= L_c | theta) = 1 / (1 + exp(-alpha (theta - beta_c)))``.
    Parameter vector per item: slopes (one, or one per threshold), the first
    threshold, then the logarithms of the gaps between thresholds.
    """

    name = "GRM"

    def fit(self, glm: GranularityLevelMatrix) -> FitResult:
        """Fit the model to a granularity level matrix.

        Args:
            glm: level matrix with at least ``config.min_users`` users

        Returns:
            FitResult with :class:`GradedItemParams` and EAP abilities.
        """
        if glm.N < self.config.min_users:
            raise ValueError(
                f"The GRM fit needs at least {self.config.min_users} users, got {glm.N}."
            )
        if self.config.grm_discrimination not in ("item", "level"):
            raise ValueError(
                f"Unknown GRM discrimination mode '{self.config.grm_discrimination}'."
            )
        self.per_level = self.config.grm_discrimination == "level"
        observed = [np.unique(glm.cells[i]) for i in range(glm.n)]
        fitted = np.array([levels.size >= 2 for levels in observed])
        for item in np.flatnonzero(~fitted):
            self.logger.warning(
                f"Item '{glm.catalog[item]}' is observed at a single level "
                f"({int(observed[item][0])}) and is excluded from the GRM fit."
            )
        self.items = np.flatnonzero(fitted)
        responses, categories = [], []
        for item in self.items:
            responses.append(np.searchsorted(observed[item], glm.cells[item]))
            categories.append(observed[item].size)
        self.cumulative_rates = [
            np.array([(y >= c).mean() for c in range(1, m)])
            for y, m in zip(responses, categories)
        ]
        self.prepare(responses, categories)
        converged, log_likelihood = self.run()

        discrimination = np.full(glm.n, np.nan)
        thresholds, threshold_levels, slopes = [], [], []
        for item in range(glm.n):
            thresholds.append(np.array([], dtype=float))
            threshold_levels.append(np.array([], dtype=int))
            slopes.append(np.array([], dtype=float))
        for position, item in enumerate(self.items):
            alphas, betas = self.unpack(position, self.params[position])
            discrimination[item] = float(np.mean(alphas))
            thresholds[item] = betas
            threshold_levels[item] = observed[item][1:].astype(int)
            slopes[item] = alphas
        params = GradedItemParams(
            catalog=glm.catalog,
            levels=glm.levels,
            discrimination=discrimination,
            thresholds=tuple(thresholds),
            threshold_levels=tuple(threshold_levels),
            level_discrimination=tuple(slopes),
            observed_levels=tuple(levels.astype(int) for levels in observed),
            fitted=fitted,
        )
        return FitResult(
            params=params,
            abilities=self.abilities(glm.registry),
            log_likelihood=log_likelihood,
            converged=converged,
            iterations=self.iteration,
            history=tuple(self.history),
            excluded=tuple(params.excluded),
        )

    def n_slopes(self, item: int) -> int:
        return self.n_categories[item] - 1 if self.per_level else 1

    def unpack(self, item: int, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        m = self.n_categories[item] - 1
        s = self.n_slopes(item)
        alphas = np.broadcast_to(params[:s], (m,)).astype(float)
        betas = params[s] + np.concatenate([[0.0], np.cumsum(np.exp(params[s + 1 :]))])
        return alphas, betas

    def initial_params(self, item):
        rates = np.clip(self.cumulative_rates[item], 0.01, 0.99)
        betas = -np.log(rates / (1 - rates)) / 0.86
        gaps = np.maximum(np.diff(betas), 0.05)
        return np.concatenate(
            [np.ones(self.n_slopes(item)), [betas[0]], np.log(gaps)]
        )

    def bounds(self, item, params):
        s = self.n_slopes(item)
        slope_bounds = [(self.config.discrimination_min, self.config.discrimination_max)] * s
        gap_bounds = [(-12.0, 4.0)] * (len(params) - s - 1)
        return slope_bounds + [(None, None)] + gap_bounds

    def natural_params(self, item, params):
        alphas, betas = self.unpack(item, params)
        return np.concatenate([alphas[: self.n_slopes(item)], betas])

    def item_log_probabilities(self, item, params):
        alphas, betas = self.unpack(item, params)
        probabilities = category_probabilities(alphas, betas, self.nodes)
        return np.log(probabilities)


def category_probabilities(
    alphas: ArrayLike, betas: ArrayLike, theta: ArrayLike
) -> np.ndarray:
    """Graded response category probabilities, shape ``(len(betas) + 1, len(theta))``.

    Probabilities are floored at ``PROBABILITY_FLOOR`` and renormalized, which
    only matters when per-threshold slopes let cumulative curves cross.
    """
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    theta = np.asarray(theta, dtype=float)
    cumulative = expit(alphas[:, None] * (theta[None, :] - betas[:, None]))
    padded = np.vstack([np.ones_like(theta), cumulative, np.zeros_like(theta)])
    probabilities = padded[:-1] - padded[1:]
    if np.any(probabilities < PROBABILITY_FLOOR):
        probabilities = np.maximum(probabilities, PROBABILITY_FLOOR)
        probabilities /= probabilities.sum(axis=0, keepdims=True)
    return probabilities


def fit_2pl(r: ResponseMatrix, config: Optional[FitConfig] = None) -> FitResult:
    """Fit the two-parameter logistic model by MML-EM (see :class:`TwoParameterLogistic`)."""
    return TwoParameterLogistic(config).fit(r)


def fit_grm(glm: GranularityLevelMatrix, config: Optional[FitConfig] = None) -> FitResult:
    """Fit the graded response model by MML-EM (see :class:`GradedResponse`)."""
    return GradedResponse(config).fit(glm)


def irt_visibility(params: ItemParams, theta: AbilityVector) -> FloatMatrix:
    """Visibility ``V[i, j] = 1 / (1 + exp(-alpha_i (theta^j - beta_i)))``; NaN rows for excluded items."""
    return expit(
        params.discrimination[:, None]
        * (np.asarray(theta.theta)[None, :] - params.sensitivity[:, None])
    )


def score_psi(params: ItemParams, theta: AbilityVector) -> ScoreVector:
    """IRT policy-based privacy score ``PSI^j = sum_i beta_i V[i, j]`` over fitted items."""
    visibility = irt_visibility(params, theta)
    scores = np.zeros(theta.registry.N)
    for i in np.flatnonzero(params.fitted):
        scores = scores + params.sensitivity[i] * visibility[i]
    return ScoreVector(
        theta.registry, "PSI", scores, diagnostics={"excluded_items": params.excluded}
    )


def cumulative_probability(
    params: GradedItemParams, item: int, level: int, theta: ArrayLike
) -> np.ndarray:
    """``P(level_i >= level | theta)`` for an arbitrary level in ``0..l+1``."""
    theta = np.asarray(theta, dtype=float)
    observed = params.observed_levels[item]
    if level <= observed[0]:
        return np.ones_like(theta)
    if level > observed[-1]:
        return np.zeros_like(theta)
    # the smallest observed level at or above ``level`` carries the threshold
    position = int(np.searchsorted(params.threshold_levels[item], level, side="left"))
    alpha = params.level_discrimination[item][position]
    beta = params.thresholds[item][position]
    return expit(alpha * (theta - beta))


def grm_level_probability(params: GradedItemParams, theta: AbilityVector) -> np.ndarray:
    """Category probabilities ``P[i, j, k] = P(level = k | theta^j)``, shape ``n × N × (l+1)``.

    Levels never observed for an item get probability 0; an excluded item puts
    all mass on its single observed level.
    """
    values = np.asarray(theta.theta, dtype=float)
    n, N, l = params.catalog.n, values.size, params.levels
    probability = np.zeros((n, N, l + 1))
    for i in range(n):
        observed = params.observed_levels[i]
        if not params.fitted[i]:
            probability[i, :, observed[0]] = 1.0
            continue
        categories = category_probabilities(
            params.level_discrimination[i], params.thresholds[i], values
        )
        probability[i][:, observed] = categories.T
    return probability


def score_psgi(params: GradedItemParams, theta: AbilityVector) -> ScoreVector:
    """IRT granularity-based score ``sum_i sum_k beta_ik P(level = k | theta^j) k``."""
    probability = grm_level_probability(params, theta)
    scores = np.zeros(theta.registry.N)
    for i in np.flatnonzero(params.fitted):
        for level, beta in zip(params.threshold_levels[i], params.thresholds[i]):
            scores = scores + beta * probability[i, :, level] * level
    return ScoreVector(
        theta.registry,
        "PSGI",
        scores,
        diagnostics={"excluded_items": params.excluded, "levels": params.levels},
    )


def item_characteristic_curve(
    params: Union[ItemParams, GradedItemParams],
    item: int,
    level: int,
    theta_grid: ArrayLike,
) -> np.ndarray:
    """``P(level >= k | theta)`` of one item along a grid of attitudes.

    Args:
        params: fitted 2PL (``level`` must be 1) or GRM parameters
        item: item index
        level: a level the item has a threshold for
        theta_grid: finite attitude values

    Raises:
        IndexError: unknown item
        KeyError: the item has no curve for ``level`` (excluded item or
            level not observed)
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    if not np.all(np.isfinite(theta_grid)):
        raise ValueError("The attitude grid must be finite.")
    if not 0 <= item < params.catalog.n:
        raise IndexError(f"Item index {item} out of range [0, {params.catalog.n}).")
    if isinstance(params, ItemParams):
        if level != 1 or not params.fitted[item]:
            raise KeyError(f"Item '{params.catalog[item]}' has no curve for level {level}.")
        return expit(
            params.discrimination[item] * (theta_grid - params.sensitivity[item])
        )
    alpha = params.slope(item, level)
    beta = params.threshold(item, level)
    return expit(alpha * (theta_grid - beta))


def icc_table(
    params: Union[ItemParams, GradedItemParams], theta_grid: ArrayLike
) -> pd.DataFrame:
    """Item characteristic curves of every fitted item and level in long format."""
    theta_grid = np.asarray(theta_grid, dtype=float)
    frames = []
    for i, item in enumerate(params.catalog):
        if not params.fitted[i]:
            continue
        levels = [1] if isinstance(params, ItemParams) else params.threshold_levels[i]
        for level in levels:
            frames.append(
                pd.DataFrame(
                    {
                        "item_id": item,
                        "level": int(level),
                        "theta": theta_grid,
                        "probability": item_characteristic_curve(
                            params, i, int(level), theta_grid
                        ),
                    }
                )
            )
    if not frames:
        return pd.DataFrame(columns=["item_id", "level", "theta", "probability"])
    return pd.concat(frames, ignore_index=True)
