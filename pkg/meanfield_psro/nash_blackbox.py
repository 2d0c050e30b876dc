import logging
from dataclasses import dataclass
from typing import Any, Callable, List, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import constants
from .constants import ConfigurationError
from .game import MeanFieldGame, PolicySet, as_mixture, mixture_flow, policy_payoffs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimplexSearchConfig:
    """Settings of the cross-entropy search over the simplex."""

    population_size: int = constants.SEARCH_POPULATION
    elite_fraction: float = constants.SEARCH_ELITE_FRACTION
    iterations: int = constants.SEARCH_ITERATIONS
    tolerance: float = constants.SEARCH_TOLERANCE
    warm_start: bool = True
    seed: Optional[int] = None

    def __post_init__(self):
        """Validate the search settings."""
        if self.population_size < 4:
            raise ConfigurationError(f"The search population needs at least 4 members. Given: {self.population_size}.")
        if not 0.0 < self.elite_fraction < 1.0:
            raise ConfigurationError(f"The elite fraction must lie in (0, 1). Given: {self.elite_fraction}.")
        if self.iterations < 1:
            raise ConfigurationError(f"The search needs at least one iteration. Given: {self.iterations}.")
        if self.tolerance < 0:
            raise ConfigurationError(f"The search tolerance must be non-negative. Given: {self.tolerance}.")

    @property
    def n_elites(self) -> int:
        """Number of elite candidates kept per generation."""
        return max(2, int(np.ceil(self.population_size * self.elite_fraction)))

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "SimplexSearchConfig":
        """Build the settings from a configuration mapping; unknown keys are rejected."""
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(config) - known)
        if unknown:
            raise ConfigurationError(f"Unknown search settings {unknown}. Known: {sorted(known)}.")
        return cls(**config)


class SearchResult(NamedTuple):
    """Best mixture found, its objective value, whether the tolerance was met and the best value per generation."""

    nu: np.ndarray
    value: float
    converged: bool
    history: List[float]


def restricted_exploitability(
    game: MeanFieldGame, policy_set: PolicySet, nu: Union[Sequence[float], np.ndarray]
) -> float:
    """
    Exploitability of a mixed policy inside the restricted game.

    max_i J(pi_i, mu(nu)) - J(pi(nu), mu(nu)), with deviations limited to the policy set.

    :param game: the game
    :param policy_set: the restricted policy set
    :param nu: the mixed policy
    :return: the restricted exploitability
    """
    weights = as_mixture(nu, len(policy_set))
    payoffs = policy_payoffs(policy_set, mixture_flow(policy_set, weights))
    return float(payoffs.max() - weights @ payoffs)


def warm_start_mixture(previous: np.ndarray, n_policies: int) -> np.ndarray:
    """Pad a mixture over the first policies of a grown set with WARM_START_MASS on each new policy."""
    padded = np.full(n_policies, constants.WARM_START_MASS)
    padded[: previous.size] = previous
    return padded / padded.sum()


def _project(candidates: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    candidates = np.where(np.isfinite(candidates), np.clip(candidates, 0.0, None), 0.0)
    totals = candidates.sum(axis=1)
    degenerate = totals <= 0
    candidates[degenerate] = fallback
    totals[degenerate] = fallback.sum()
    return candidates / totals[:, np.newaxis]


def _fit_concentration(elites: np.ndarray, mean: np.ndarray) -> float:
    """Moment-matched Dirichlet concentration: Var(x_i) = m_i (1 - m_i) / (alpha_0 + 1)."""
    variance = elites.var(axis=0)
    spread = mean * (1.0 - mean)
    informative = (variance > 0) & (spread > 0)
    if not np.any(informative):
        return constants.SEARCH_MAX_CONCENTRATION
    estimate = float(np.median(spread[informative] / variance[informative])) - 1.0
    return float(np.clip(estimate, 1.0, constants.SEARCH_MAX_CONCENTRATION))


def minimize_on_simplex(
    objective: Callable[[np.ndarray], float],
    n: int,
    config: SimplexSearchConfig = SimplexSearchConfig(),
    warm_start: Optional[np.ndarray] = None,
) -> SearchResult:
    """
    Cross-entropy minimisation of a function on the probability simplex with a Dirichlet proposal.

    Generation 0 contains the uniform mixture (and the warm start, if given). Each generation samples
    from Dirichlet(alpha_0 * m), keeps the best candidates, re-fits m and alpha_0 to them by moments and
    smooths the fit with the previous proposal. The best candidate so far is carried over.

    :param objective: function to minimise
    :param n: dimension of the simplex
    :param config: search settings
    :param warm_start: starting mean of the proposal
    :return: the best point and its value
    """
    rng = np.random.default_rng(config.seed)
    uniform = np.full(n, 1.0 / n)
    mean = uniform if warm_start is None else warm_start
    concentration = float(n)

    seeds = [uniform] if warm_start is None else [uniform, warm_start]
    candidates = np.vstack([np.array(seeds), rng.dirichlet(np.full(n, 1.0), size=config.population_size - len(seeds))])
    best_nu, best_value = uniform, np.inf
    history: List[float] = []

    for generation in range(config.iterations):
        candidates = _project(candidates, mean)
        values = np.array([objective(candidate) for candidate in candidates])
        order = np.argsort(values, kind="stable")
        if values[order[0]] < best_value:
            best_nu, best_value = candidates[order[0]], float(values[order[0]])
        history.append(best_value)
        if best_value <= config.tolerance:
            break

        elites = candidates[order[: config.n_elites]]
        fitted = elites.mean(axis=0)
        mean = constants.SEARCH_SMOOTHING * fitted + (1.0 - constants.SEARCH_SMOOTHING) * mean
        mean = mean / mean.sum()
        concentration = (
            constants.SEARCH_SMOOTHING * _fit_concentration(elites, fitted)
            + (1.0 - constants.SEARCH_SMOOTHING) * concentration
        )
        alpha = np.clip(concentration * mean, constants.SEARCH_MIN_ALPHA, None)
        candidates = np.vstack([best_nu, rng.dirichlet(alpha, size=config.population_size - 1)])
        logger.debug(f"Generation {generation}: best {best_value:.3e}, concentration {concentration:.3e}")

    converged = best_value <= config.tolerance
    if not converged:
        logger.debug(f"Simplex search stopped at {best_value:.3e} above tolerance {config.tolerance:.1e}")
    return SearchResult(best_nu / best_nu.sum(), best_value, converged, history)


def solve_restricted_nash(
    game: MeanFieldGame,
    policy_set: PolicySet,
    config: SimplexSearchConfig = SimplexSearchConfig(),
    warm_start: Optional[np.ndarray] = None,
) -> SearchResult:
    """
    Approximate Nash equilibrium of the restricted game by minimising restricted exploitability.

    :param game: the game
    :param policy_set: the restricted policy set
    :param config: search settings
    :param warm_start: optional initial mixture over the set
    :raises ValueError: if the set is empty
    :return: the best mixture found, its restricted exploitability and a convergence flag
    """
    n = len(policy_set)
    if n == 0:
        raise ValueError("Cannot solve a restricted game over an empty policy set.")
    if n == 1:
        return SearchResult(np.ones(1), 0.0, True, [0.0])

    result = minimize_on_simplex(
        lambda nu: restricted_exploitability(game, policy_set, nu), n, config, warm_start=warm_start
    )
    logger.debug(f"Restricted Nash over {n} policies: exploitability {result.value:.3e}")
    return result


def is_restricted_nash(
    game: MeanFieldGame, policy_set: PolicySet, nu: Union[Sequence[float], np.ndarray], tol: float
) -> bool:
    """
    Check whether no policy of the set improves on nu by more than tol.

    :param game: the game
    :param policy_set: the restricted policy set
    :param nu: the mixed policy
    :param tol: non-negative tolerance
    :raises ValueError: if tol is negative
    :return: whether nu is a tol-Nash equilibrium of the restricted game
    """
    if tol < 0:
        raise ValueError(f"The tolerance must be non-negative. Given: {tol}.")
    return restricted_exploitability(game, policy_set, nu) <= tol
