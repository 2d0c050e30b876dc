import unittest

import numpy as np
import pytest

from meanfield_psro.game import PolicySet, constant_policies
from meanfield_psro.games import biased_rps
from meanfield_psro.regret.learners import (
    Hedge,
    InternalRegretLearner,
    RegretMatching,
    default_hedge_rate,
    hedge_step,
    make_learner,
    regret_matching_step,
    stationary_distribution,
)
from meanfield_psro.regret.protocol import run_regret_loop


class TestLearnerSteps(unittest.TestCase):
    """Class to test the single-step learner rules."""

    def test_regret_matching_proportional(self):
        """Test weights proportional to positive regrets."""
        np.testing.assert_allclose(regret_matching_step(np.array([1.0, -2.0, 3.0])), [0.25, 0.0, 0.75])

    def test_regret_matching_uniform(self):
        """Test the uniform fallback without positive regret."""
        np.testing.assert_allclose(regret_matching_step(np.array([0.0, -1.0])), [0.5, 0.5])

    def test_regret_matching_empty(self):
        """Test an empty regret vector."""
        self.assertRaises(ValueError, regret_matching_step, np.array([]))

    def test_hedge_weights(self):
        """Test exponential weights."""
        weights = hedge_step(np.array([0.0, np.log(3.0)]), 1.0)
        np.testing.assert_allclose(weights, [0.25, 0.75])

    def test_hedge_large_payoffs(self):
        """Large cumulative payoffs do not overflow."""
        weights = hedge_step(np.array([1e6, 1e6 + 1.0]), 1.0)
        assert np.all(np.isfinite(weights))
        assert weights.sum() == pytest.approx(1.0)

    def test_hedge_invalid(self):
        """Test invalid rates and payoffs."""
        self.assertRaises(ValueError, hedge_step, np.zeros(2), 0.0)
        self.assertRaises(FloatingPointError, hedge_step, np.array([np.inf, 0.0]), 1.0)

    def test_default_hedge_rate(self):
        """Test sqrt(8 log n / T)."""
        assert default_hedge_rate(4, 100) == pytest.approx(np.sqrt(8 * np.log(4) / 100))


class TestStationaryDistribution:
    """Class to test the stationary distribution solver."""

    def test_two_state_chain(self):
        """Test an irreducible chain."""
        nu = stationary_distribution(np.array([[0.9, 0.1], [0.5, 0.5]]))
        np.testing.assert_allclose(nu, [5 / 6, 1 / 6])

    def test_periodic_chain(self):
        """Test a periodic chain."""
        np.testing.assert_allclose(stationary_distribution(np.array([[0.0, 1.0], [1.0, 0.0]])), [0.5, 0.5])

    @pytest.mark.parametrize(
        "transition",
        [
            np.eye(3),
            np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]),
            np.array([[0.2, 0.8, 0.0], [0.6, 0.4, 0.0], [0.0, 0.3, 0.7]]),
        ],
    )
    def test_result_is_stationary(self, transition):
        """Reducible chains still return a stationary distribution."""
        nu = stationary_distribution(transition)
        assert nu.sum() == pytest.approx(1.0)
        assert np.all(nu >= 0)
        np.testing.assert_allclose(nu @ transition, nu, atol=1e-9)


class TestLearners:
    """Class to test the learners in self-play on biased RPS."""

    @pytest.fixture
    def policy_set(self):
        """The three constant policies of biased RPS."""
        game = biased_rps()
        return PolicySet(game, constant_policies(game))

    def test_make_learner(self):
        """Test the learner factory."""
        assert isinstance(make_learner("external", 3, 100), RegretMatching)
        hedge = make_learner("external", 3, 100, "hedge")
        assert isinstance(hedge, Hedge)
        assert hedge.eta == pytest.approx(default_hedge_rate(3, 100))
        assert isinstance(make_learner("internal", 3, 100), InternalRegretLearner)
        with pytest.raises(ValueError):
            make_learner("swap", 3, 100)
        with pytest.raises(ValueError):
            make_learner("external", 3, 100, "fictitious")

    @pytest.mark.parametrize("t_max", [250, 1000])
    def test_external_regret_bound(self, policy_set, t_max):
        """Average external regret of regret matching stays below range * sqrt(n / T)."""
        result = run_regret_loop(policy_set.game, policy_set, "external", t_max=t_max, target_regret=-np.inf)
        average = result.trace.external.mean(axis=0).max()
        assert average <= 1.4 * np.sqrt(3 / t_max)

    def test_external_regret_decay(self, policy_set):
        """Average regret at T = 100, 400, 1600 decreases and falls like sqrt(n log n / T)."""
        n = len(policy_set)
        regrets = []
        for t_max in (100, 400, 1600):
            result = run_regret_loop(
                policy_set.game, policy_set, "external", t_max=t_max, target_regret=-np.inf, compress_every=t_max
            )
            regrets.append(float(result.trace.external.mean(axis=0).max()))
        rates = np.sqrt(n * np.log(n) / np.array([100, 400, 1600]))
        assert regrets[0] > regrets[1] > regrets[2] > 0
        assert np.all(np.array(regrets) <= 2 * policy_set.game.reward_range * rates)
        # sixteen times the horizon divides the regret by four, with 20% slack
        assert regrets[0] / regrets[2] >= 4 / 1.2

    def test_hedge_regret_bound(self, policy_set):
        """Average external regret of Hedge with the default rate stays below its worst-case bound."""
        t_max = 1000
        result = run_regret_loop(
            policy_set.game, policy_set, "external", t_max=t_max, target_regret=-np.inf, algorithm="hedge"
        )
        average = result.trace.external.mean(axis=0).max()
        assert average <= 1.3 * np.sqrt(np.log(3) / t_max)

    def test_internal_regret_bound(self, policy_set):
        """Average swap regret of the Blum-Mansour learner stays below n times the external bound."""
        t_max = 500
        result = run_regret_loop(policy_set.game, policy_set, "internal", t_max=t_max, target_regret=-np.inf)
        average = result.trace.internal.mean(axis=0).max()
        assert average <= 3 * 1.4 * np.sqrt(3 / t_max)

    def test_internal_learner_mixture_is_stationary(self):
        """The played mixture is stationary for the learners' transition matrix."""
        learner = InternalRegretLearner(3, RegretMatching)
        for payoffs in ([1.0, 0.0, 0.5], [0.0, 1.0, 0.2], [0.3, 0.3, 1.0]):
            learner.observe(np.array(payoffs))
        nu = learner.mixture()
        np.testing.assert_allclose(nu @ learner.transition_matrix(), nu, atol=1e-9)
