import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import constants
from .game import (
    DeterministicPolicy,
    MeanFieldGame,
    PolicySet,
    PopulationFlow,
    evaluate_occupancy,
    mixture_flow,
    occupancy_flow,
)
from .regret.device import CorrelationDevice

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BestResponseResult:
    """Best-response policy, its payoff against the target and, optionally, the value table it was derived from."""

    policy: DeterministicPolicy
    value: float
    values: Optional[np.ndarray] = None


def greedy_actions(q_values: np.ndarray) -> np.ndarray:
    """Lowest action index whose value is within TIE_TOL of the maximum, along the last axis."""
    best = q_values.max(axis=-1, keepdims=True)
    return np.argmax(q_values >= best - constants.TIE_TOL, axis=-1)


def _backward_induction(game: MeanFieldGame, rewards: np.ndarray) -> BestResponseResult:
    states = np.arange(game.n_states)
    values = np.zeros((game.length + 1, game.n_states))
    actions = np.zeros((game.length, game.n_states), dtype=np.int64)
    for step in reversed(range(game.length)):
        q_values = rewards[step] + values[step + 1][game.transitions]
        actions[step] = greedy_actions(q_values)
        values[step] = q_values[states, actions[step]]
    return BestResponseResult(DeterministicPolicy(actions), float(game.mu0 @ values[0]), values)


def _value_iteration(game: MeanFieldGame, rewards: np.ndarray) -> BestResponseResult:
    gamma = game.horizon.gamma
    reward = rewards[0]
    values = np.zeros(game.n_states)
    for sweep in range(constants.VALUE_ITERATION_MAX_SWEEPS):
        q_values = reward + gamma * values[game.transitions]
        updated = q_values.max(axis=1)
        difference = updated - values
        values = updated
        if difference.max() - difference.min() < constants.VALUE_ITERATION_SPAN:
            break
    else:
        logger.warning(f"Value iteration hit {constants.VALUE_ITERATION_MAX_SWEEPS} sweeps above the span tolerance")
    logger.debug(f"Value iteration converged after {sweep + 1} sweeps")
    q_values = reward + gamma * values[game.transitions]
    policy = DeterministicPolicy(greedy_actions(q_values))
    own = occupancy_flow(game, policy)
    return BestResponseResult(policy, float(evaluate_occupancy(game, own.state_actions, rewards)), values)


def best_response_to_rewards(game: MeanFieldGame, rewards: np.ndarray) -> BestResponseResult:
    """
    Optimal deterministic policy for fixed per-step reward tables.

    Finite horizons use backward induction, discounted games value iteration on the stationary table.
    Ties are broken towards the lowest action index.

    :param game: the game providing dynamics, mu0 and horizon
    :param rewards: reward tables of shape (S, n_states, n_actions)
    :return: the best response and its payoff
    """
    if game.discounted:
        return _value_iteration(game, rewards)
    return _backward_induction(game, rewards)


def best_response(game: MeanFieldGame, mu: PopulationFlow) -> BestResponseResult:
    """
    Best response BR(mu) over all deterministic policies.

    :param game: the game
    :param mu: the population flow to respond to
    :return: the best response and J(BR, mu)
    """
    return best_response_to_rewards(game, game.reward_tables(mu))


def device_rewards(
    game: MeanFieldGame, policy_set: PolicySet, device: CorrelationDevice, atom_weights: np.ndarray
) -> np.ndarray:
    """Reward tables averaged over the device atoms with ``atom_weights``."""
    if device.n_policies != len(policy_set):
        raise KeyError(f"Device is defined over {device.n_policies} policies, the set holds {len(policy_set)}.")
    averaged = np.zeros((game.length, game.n_states, game.n_actions))
    for weight, mixture in zip(atom_weights, device.mixtures):
        if weight > 0:
            averaged += weight * game.reward_tables(mixture_flow(policy_set, mixture))
    return averaged


def br_cce(game: MeanFieldGame, policy_set: PolicySet, device: CorrelationDevice) -> BestResponseResult:
    """
    Coarse-correlated best response: argmax_pi sum_nu rho(nu) J(pi, mu(nu)).

    J is linear in the deviator's own occupancy, so a single dynamic program over the rho-averaged
    reward tables suffices.

    :param game: the game
    :param policy_set: the set the device is defined over
    :param device: the correlation device
    :return: the best unilateral deviation and its rho-averaged payoff
    """
    return best_response_to_rewards(game, device_rewards(game, policy_set, device, device.weights))


def br_ce(
    game: MeanFieldGame,
    policy_set: PolicySet,
    device: CorrelationDevice,
    recommended: Union[int, DeterministicPolicy],
) -> BestResponseResult:
    """
    Correlated best response to a recommendation: argmax_pi sum_nu rho(nu | pi_k) J(pi, mu(nu)).

    :param game: the game
    :param policy_set: the set the device is defined over
    :param device: the correlation device
    :param recommended: the recommended policy pi_k or its index in the set
    :raises ZeroDivisionError: if the device never recommends pi_k
    :return: the best deviation after receiving pi_k and its conditional payoff
    """
    index = recommended if isinstance(recommended, (int, np.integer)) else policy_set.index(recommended)
    conditional = device.conditional(int(index))
    return best_response_to_rewards(game, device_rewards(game, policy_set, device, conditional))
