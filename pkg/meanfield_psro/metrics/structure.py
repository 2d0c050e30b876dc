import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .. import constants
from ..game import (
    DeterministicPolicy,
    FlowSlice,
    MeanFieldGame,
    PolicySet,
    evaluate_occupancy,
    mixture_flow,
    occupancy_flow,
    policy_payoffs,
)
from ..nash_blackbox import SimplexSearchConfig, minimize_on_simplex
from ..regret.minimax import solve_minimax

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StructureCheck:
    """Outcome of a sampled structural check; truthy iff no violation was found."""

    holds: bool
    violation: float = 0.0
    witness: Optional[Any] = None

    def __bool__(self) -> bool:
        return self.holds


def _random_slice(game: MeanFieldGame, rng: np.random.Generator) -> FlowSlice:
    states = rng.dirichlet(np.ones(game.n_states))
    conditional = rng.dirichlet(np.ones(game.n_actions), size=game.n_states)
    return FlowSlice(states, states[:, np.newaxis] * conditional)


def check_diff_affine(
    game: MeanFieldGame,
    trials: int = constants.DIFF_AFFINE_TRIALS,
    tol: float = constants.DIFF_AFFINE_TOL,
    seed: Optional[int] = 0,
) -> StructureCheck:
    """
    Randomised midpoint test for rewards of the form r(x, a, mu) = C(mu) + r_1(x, a)^T mu + r_2(x, a).

    Such rewards make every difference r(x, a, .) - r(x', a', .) affine, so the midpoint defect
    r(mid) - (r(mu_1) + r(mu_2)) / 2 must be the same for every (x, a).

    :param game: the game
    :param trials: number of random population pairs
    :param tol: tolerance on the spread of the midpoint defect, relative to the reward scale
    :param seed: seed of the sampler
    :raises ValueError: if trials is not positive
    :return: the check, with the (mu_1, mu_2, (x, a), (x', a')) triple of the worst violation as witness
    """
    if trials < 1:
        raise ValueError(f"The diff-affine check needs at least one trial. Given: {trials}.")
    rng = np.random.default_rng(seed)
    worst = StructureCheck(True)
    for _ in range(trials):
        first, second = _random_slice(game, rng), _random_slice(game, rng)
        middle = FlowSlice(0.5 * (first.states + second.states), 0.5 * (first.state_actions + second.state_actions))
        tables = [game.reward_table(flow_slice) for flow_slice in (first, second, middle)]
        defect = tables[2] - 0.5 * (tables[0] + tables[1])
        spread = float(defect.max() - defect.min())
        scale = max(1.0, max(float(np.abs(table).max()) for table in tables))
        if spread > tol * scale and spread > worst.violation:
            high = np.unravel_index(np.argmax(defect), defect.shape)
            low = np.unravel_index(np.argmin(defect), defect.shape)
            witness = (first, second, tuple(int(i) for i in high), tuple(int(i) for i in low))
            worst = StructureCheck(False, spread, witness)
    if not worst:
        logger.info(f"Game {game.name} is not diff-affine, midpoint defect spread {worst.violation:.3e}")
    return worst


def meta_game_matrix(game: MeanFieldGame, policy_set: PolicySet) -> np.ndarray:
    """
    Symmetric meta-game payoff matrix M[i, j] = J(pi_i, mu^{pi_j}).

    :param game: the game
    :param policy_set: the policies
    :raises ValueError: if the set is empty
    :return: the n x n matrix
    """
    if len(policy_set) == 0:
        raise ValueError("The meta-game of an empty policy set is undefined.")
    columns = [
        evaluate_occupancy(game, policy_set.occupancy, game.reward_tables(policy_set.flow(j)))
        for j in range(len(policy_set))
    ]
    return np.stack(columns, axis=1)


def _meta_exploitability(matrix: np.ndarray, nu: np.ndarray) -> float:
    payoffs = matrix @ nu
    return float(payoffs.max() - nu @ payoffs)


def symmetric_nash_of_meta_game(
    matrix: np.ndarray, tol: float = constants.CERTIFICATE_TOL, config: Optional[SimplexSearchConfig] = None
) -> np.ndarray:
    """
    Symmetric Nash equilibrium of the two-player game with payoffs (M, M^T).

    The linear program min_nu max_i (M nu)_i is solved first; it is a symmetric equilibrium whenever its
    value matches nu^T M nu, which holds for zero-sum-like meta-games. Otherwise the meta-game
    exploitability max_i (M nu)_i - nu^T M nu is minimised by the simplex search seeded with the LP solution.

    :param matrix: square meta-game matrix
    :param tol: exploitability accepted from the linear program
    :param config: search settings for the fallback
    :raises ValueError: if the matrix is not square
    :return: the equilibrium mixture
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"The meta-game matrix must be square. Given shape: {matrix.shape}.")
    n = matrix.shape[0]
    if n == 1:
        return np.ones(1)

    candidate = solve_minimax(matrix.T).rho
    gap = _meta_exploitability(matrix, candidate)
    scale = max(1.0, float(np.abs(matrix).max()))
    if gap <= tol * scale:
        return candidate

    logger.debug(f"Meta-game LP solution has exploitability {gap:.3e}; refining with the simplex search")
    result = minimize_on_simplex(
        lambda nu: _meta_exploitability(matrix, nu), n, config or SimplexSearchConfig(), warm_start=candidate
    )
    return result.nu if result.value < gap else candidate


def _four_term(table: np.ndarray) -> float:
    """table[own, population] holds the payoff of the first or second strategy against either population."""
    return float(table[0, 0] + table[1, 1] - table[1, 0] - table[0, 1])


def check_monotonicity(
    game: MeanFieldGame,
    pairs: int = constants.MONOTONICITY_PAIRS,
    tol: float = constants.MONOTONICITY_TOL,
    seed: Optional[int] = 0,
) -> StructureCheck:
    """
    Sampled monotonicity check over pairs of random deterministic policies.

    A pair violates monotonicity if J(pi_1, mu^1) + J(pi_2, mu^2) - J(pi_2, mu^1) - J(pi_1, mu^2) > tol.
    A true result is evidence, not a proof.

    :param game: the game
    :param pairs: number of sampled policy pairs
    :param tol: tolerance on the four-term condition
    :param seed: seed of the sampler
    :raises ValueError: if pairs is not positive
    :return: the check, with the worst violating policy pair as witness
    """
    if pairs < 1:
        raise ValueError(f"The monotonicity check needs at least one pair. Given: {pairs}.")
    rng = np.random.default_rng(seed)
    worst = StructureCheck(True)
    for _ in range(pairs):
        policies = [DeterministicPolicy(rng.integers(0, game.n_actions, size=game.policy_shape)) for _ in range(2)]
        flows = [occupancy_flow(game, policy) for policy in policies]
        rewards = [game.reward_tables(flow) for flow in flows]
        table = np.array([[evaluate_occupancy(game, own.state_actions, other) for other in rewards] for own in flows])
        value = _four_term(table)
        if value > tol and value > worst.violation:
            worst = StructureCheck(False, value, tuple(policies))
    return worst


def check_restricted_monotonicity(
    game: MeanFieldGame,
    policy_set: PolicySet,
    pairs: int = constants.MONOTONICITY_PAIRS,
    tol: float = constants.MONOTONICITY_TOL,
    seed: Optional[int] = 0,
) -> StructureCheck:
    """
    Sampled monotonicity check of the restricted game over pairs of random mixed policies.

    :param game: the game
    :param policy_set: the restricted policy set
    :param pairs: number of sampled mixture pairs
    :param tol: tolerance on the four-term condition
    :param seed: seed of the sampler
    :raises ValueError: if pairs is not positive or the set is empty
    :return: the check, with the worst violating mixture pair as witness
    """
    if pairs < 1:
        raise ValueError(f"The monotonicity check needs at least one pair. Given: {pairs}.")
    if len(policy_set) == 0:
        raise ValueError("The restricted monotonicity check needs a non-empty policy set.")
    rng = np.random.default_rng(seed)
    worst = StructureCheck(True)
    for _ in range(pairs):
        mixtures = rng.dirichlet(np.ones(len(policy_set)), size=2)
        payoffs = np.stack([policy_payoffs(policy_set, mixture_flow(policy_set, mixture)) for mixture in mixtures])
        value = _four_term(mixtures @ payoffs.T)
        if value > tol and value > worst.violation:
            worst = StructureCheck(False, value, (mixtures[0].copy(), mixtures[1].copy()))
    return worst
