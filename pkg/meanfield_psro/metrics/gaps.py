import logging
from typing import Sequence, Union

import numpy as np

from ..best_response import best_response, br_ce, br_cce
from ..constants import GapKind
from ..game import (
    MeanFieldGame,
    PolicySet,
    as_mixture,
    behaviour_flow,
    behaviour_payoff,
    mixture_flow,
    policy_payoffs,
)
from ..regret.device import CorrelationDevice
from .metric import GapReport

logger = logging.getLogger(__name__)


def _atom_payoffs(policy_set: PolicySet, device: CorrelationDevice) -> np.ndarray:
    """J(pi_i, mu(nu_t)) for every atom t and policy i, shape (K, n)."""
    if device.n_policies != len(policy_set):
        raise KeyError(f"Device is defined over {device.n_policies} policies, the set holds {len(policy_set)}.")
    return np.stack([policy_payoffs(policy_set, mixture_flow(policy_set, mixture)) for mixture in device.mixtures])


def exploitability(game: MeanFieldGame, policy_set: PolicySet, nu: Union[Sequence[float], np.ndarray]) -> GapReport:
    """
    True-game exploitability max_pi J(pi, mu(nu)) - J(pi(nu), mu(nu)).

    :param game: the game
    :param policy_set: the set nu is defined over
    :param nu: the mixed policy
    :return: the gap, witnessed by the best response to mu(nu)
    """
    weights = as_mixture(nu, len(policy_set))
    mu = mixture_flow(policy_set, weights)
    response = best_response(game, mu)
    played = float(weights @ policy_payoffs(policy_set, mu))
    return GapReport(GapKind.NASH, response.value - played, response.policy)


def behaviour_exploitability(game: MeanFieldGame, probabilities: np.ndarray) -> GapReport:
    """
    Exploitability of a population playing a behavioural (stochastic) policy.

    :param game: the game
    :param probabilities: action probabilities of shape (S, n_states, n_actions) or (n_states, n_actions)
    :return: the gap, witnessed by the best response to the induced flow
    """
    mu = behaviour_flow(game, probabilities)
    response = best_response(game, mu)
    return GapReport(GapKind.NASH, response.value - behaviour_payoff(game, probabilities, mu), response.policy)


def cce_gap(game: MeanFieldGame, policy_set: PolicySet, device: CorrelationDevice) -> GapReport:
    """
    CCEGap(rho) = max_pi sum_nu rho(nu) (J(pi, mu(nu)) - J(pi(nu), mu(nu))).

    :param game: the game
    :param policy_set: the set the device is defined over
    :param device: the correlation device
    :return: the gap, witnessed by the coarse-correlated best response
    """
    payoffs = _atom_payoffs(policy_set, device)
    on_device = float(device.weights @ np.einsum("ti,ti->t", device.mixtures, payoffs))
    response = br_cce(game, policy_set, device)
    return GapReport(GapKind.CCE, response.value - on_device, response.policy)


def ce_gap(game: MeanFieldGame, policy_set: PolicySet, device: CorrelationDevice) -> GapReport:
    """
    CEGap(rho) = max over recommendations pi_k and deviations pi of
    sum_nu rho(nu | pi_k) (J(pi, mu(nu)) - J(pi_k, mu(nu))).

    Only recommendations whose marginal exceeds RECOMMENDATION_TOL are considered.

    :param game: the game
    :param policy_set: the set the device is defined over
    :param device: the correlation device
    :raises ValueError: if no policy is recommended
    :return: the gap, witnessed by the best deviation and the recommendation it deviates from
    """
    payoffs = _atom_payoffs(policy_set, device)
    recommended = device.recommended()
    if recommended.size == 0:
        raise ValueError("The device recommends no policy with positive probability.")

    reports = []
    for k in recommended:
        following = float(device.conditional(int(k)) @ payoffs[:, k])
        response = br_ce(game, policy_set, device, int(k))
        reports.append(GapReport(GapKind.CE, response.value - following, response.policy, int(k)))
    best = max(reports, key=lambda report: report.value)
    logger.debug(f"CE gap {best.value:.3e} from recommendation {best.recommendation}")
    return best


def restricted_cce_gap(policy_set: PolicySet, device: CorrelationDevice) -> float:
    """CCE gap with deviations limited to the policies of the set."""
    payoffs = _atom_payoffs(policy_set, device)
    on_device = float(device.weights @ np.einsum("ti,ti->t", device.mixtures, payoffs))
    return float((device.weights @ payoffs).max()) - on_device


def restricted_ce_gap(policy_set: PolicySet, device: CorrelationDevice) -> float:
    """CE gap with deviations limited to the policies of the set."""
    payoffs = _atom_payoffs(policy_set, device)
    gaps = [
        float((device.conditional(int(k)) @ (payoffs - payoffs[:, [k]])).max())
        for k in device.recommended()
    ]
    return max(gaps)
