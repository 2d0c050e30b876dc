import logging
from abc import abstractmethod
from functools import partial
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import softmax

from .. import constants

logger = logging.getLogger(__name__)


def regret_matching_step(cumulative: np.ndarray) -> np.ndarray:
    """
    Regret-matching weights from a cumulative regret vector.

    :param cumulative: cumulative regret of every expert
    :raises ValueError: if the vector is empty
    :return: weights proportional to the positive part of the regrets, uniform if none is positive
    """
    cumulative = np.asarray(cumulative, dtype=np.float64)
    if cumulative.ndim != 1 or cumulative.size == 0:
        raise ValueError(f"Regret matching needs a non-empty regret vector. Given shape: {cumulative.shape}.")
    positive = np.maximum(cumulative, 0.0)
    total = positive.sum()
    if total > 0.0:
        return positive / total
    return np.full(cumulative.size, 1.0 / cumulative.size)


def hedge_step(cumulative_payoffs: np.ndarray, eta: float) -> np.ndarray:
    """
    Hedge (exponential weights) distribution.

    :param cumulative_payoffs: cumulative payoff of every expert
    :param eta: learning rate
    :raises ValueError: if eta is not positive
    :raises FloatingPointError: if the payoffs or eta are not finite
    :return: weights proportional to exp(eta * cumulative_payoffs)
    """
    cumulative_payoffs = np.asarray(cumulative_payoffs, dtype=np.float64)
    if not np.isfinite(eta) or not np.all(np.isfinite(cumulative_payoffs)):
        raise FloatingPointError(f"Hedge received non-finite input (eta={eta}, payoffs={cumulative_payoffs}).")
    if not eta > 0:
        raise ValueError(f"The Hedge learning rate must be positive. Given: {eta}.")
    # softmax subtracts the maximum before exponentiating
    return softmax(eta * cumulative_payoffs)


def default_hedge_rate(n_experts: int, t_max: int) -> float:
    """Learning rate sqrt(8 log n / T_max) for payoffs already scaled to the unit range."""
    return float(np.sqrt(8.0 * np.log(max(n_experts, 2)) / max(t_max, 1)))


def stationary_distribution(transition: np.ndarray, start: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Stationary distribution nu = nu Q of a row-stochastic matrix.

    A direct least-squares solve is tried first. If it does not produce a distribution with an L1
    residual below POWER_ITERATION_TOL (reducible chains), the lazy chain (Q + I) / 2 is iterated
    from ``start``.

    :param transition: row-stochastic matrix Q
    :param start: initial distribution for the power iteration, uniform if omitted
    :raises FloatingPointError: if the power iteration does not converge
    :return: the stationary distribution
    """
    n = transition.shape[0]
    if n == 1:
        return np.ones(1)

    system = np.vstack([transition.T - np.eye(n), np.ones((1, n))])
    target = np.zeros(n + 1)
    target[-1] = 1.0
    solution = np.linalg.lstsq(system, target, rcond=None)[0]
    if np.all(solution > -constants.POWER_ITERATION_TOL):
        solution = np.clip(solution, 0.0, None)
        solution /= solution.sum()
        if np.abs(solution @ transition - solution).sum() < constants.POWER_ITERATION_TOL:
            return solution

    lazy = 0.5 * (transition + np.eye(n))
    nu = np.full(n, 1.0 / n) if start is None or len(start) != n else np.asarray(start, dtype=np.float64)
    residual = np.inf
    for _ in range(constants.POWER_ITERATION_MAX_STEPS):
        updated = nu @ lazy
        updated /= updated.sum()
        nu = updated
        residual = np.abs(nu @ transition - nu).sum()
        if residual < constants.POWER_ITERATION_TOL:
            return nu
    raise FloatingPointError(
        f"Power iteration did not converge in {constants.POWER_ITERATION_MAX_STEPS} steps, L1 residual {residual:.3e}."
    )


class Learner:
    """Full-information online learner over n experts; payoffs are expected in the unit range."""

    def __init__(self, n_experts: int):
        """
        Initialize a Learner.

        :param n_experts: number of experts
        :raises ValueError: if there are no experts
        """
        if n_experts < 1:
            raise ValueError(f"A learner needs at least one expert. Given: {n_experts}.")
        self.n_experts = n_experts

    @abstractmethod
    def mixture(self) -> np.ndarray:
        """Distribution over experts to play next."""
        pass

    @abstractmethod
    def observe(self, payoffs: np.ndarray) -> None:
        """Feed the payoff of every expert for the round just played."""
        pass


class RegretMatching(Learner):
    """Regret matching: play proportionally to positive cumulative external regret."""

    def __init__(self, n_experts: int):
        """Initialize a RegretMatching learner with zero regrets."""
        super().__init__(n_experts)
        self.regrets = np.zeros(n_experts)

    def mixture(self) -> np.ndarray:
        """Return the regret-matching weights."""
        return regret_matching_step(self.regrets)

    def observe(self, payoffs: np.ndarray) -> None:
        """Accumulate instantaneous regrets against the current mixture."""
        self.regrets += payoffs - self.mixture() @ payoffs


class Hedge(Learner):
    """Exponential weights with a fixed learning rate."""

    def __init__(self, n_experts: int, eta: float):
        """
        Initialize a Hedge learner.

        :param n_experts: number of experts
        :param eta: learning rate
        """
        super().__init__(n_experts)
        if not eta > 0:
            raise ValueError(f"The Hedge learning rate must be positive. Given: {eta}.")
        self.eta = eta
        self.cumulative = np.zeros(n_experts)

    def mixture(self) -> np.ndarray:
        """Return the exponential weights."""
        return hedge_step(self.cumulative, self.eta)

    def observe(self, payoffs: np.ndarray) -> None:
        """Accumulate payoffs."""
        self.cumulative += payoffs


def internal_regret_step(learners: Sequence[Learner], last_nu: np.ndarray, last_payoffs: np.ndarray) -> np.ndarray:
    """
    One Blum-Mansour update.

    Learner i receives the payoff vector scaled by last_nu(i). The next mixture is the stationary
    distribution of the matrix whose row i holds learner i's weights.

    :param learners: one external-regret learner per expert
    :param last_nu: mixture played in the last round
    :param last_payoffs: payoff vector of the last round
    :return: the next mixture
    """
    for weight, learner in zip(last_nu, learners):
        learner.observe(weight * last_payoffs)
    transition = np.stack([learner.mixture() for learner in learners])
    return stationary_distribution(transition, start=last_nu)


class InternalRegretLearner(Learner):
    """Swap-regret learner combining one external learner per expert."""

    def __init__(self, n_experts: int, base: Callable[[int], Learner]):
        """
        Initialize an InternalRegretLearner.

        :param n_experts: number of experts
        :param base: factory building an external learner over ``n_experts`` experts
        """
        super().__init__(n_experts)
        self.learners: List[Learner] = [base(n_experts) for _ in range(n_experts)]
        self._played: Optional[np.ndarray] = None

    def transition_matrix(self) -> np.ndarray:
        """Row i holds the current weights of learner i."""
        return np.stack([learner.mixture() for learner in self.learners])

    def mixture(self) -> np.ndarray:
        """Stationary distribution of the current transition matrix."""
        if self._played is None:
            self._played = stationary_distribution(self.transition_matrix())
        return self._played

    def observe(self, payoffs: np.ndarray) -> None:
        """Update every learner with its share of the payoffs."""
        self._played = internal_regret_step(self.learners, self.mixture(), payoffs)


def make_learner(kind: str, n_experts: int, t_max: int, algorithm: str = "regret_matching") -> Learner:
    """
    Build the learner used by the regret loop.

    :param kind: ``external`` or ``internal``
    :param n_experts: number of experts
    :param t_max: horizon of the loop, used for the default Hedge rate
    :param algorithm: ``regret_matching`` or ``hedge`` for the external learners
    :raises ValueError: for unknown kinds or algorithms
    :return: the learner
    """
    if algorithm == "regret_matching":
        base: Callable[[int], Learner] = RegretMatching
    elif algorithm == "hedge":
        base = partial(Hedge, eta=default_hedge_rate(n_experts, t_max))
    else:
        raise ValueError(f"Unknown regret learner {algorithm}. Use 'regret_matching' or 'hedge'.")

    if kind == "external":
        return base(n_experts)
    if kind == "internal":
        return InternalRegretLearner(n_experts, base)
    raise ValueError(f"Unknown regret kind {kind}. Use 'external' or 'internal'.")
