import numpy as np
import pytest

from meanfield_psro.constants import ConfigurationError
from meanfield_psro.game import FlowSlice, PolicySet, constant_policies, mixture_flow, policy_payoffs
from meanfield_psro.games import GameSpec, biased_rps, coop_betray_punish, crowd_chain, load_game, matrix_game

BIASED_RPS_NASH = np.array([15.0, 21.0, 35.0]) / 71.0


def _one_shot_slice(actions):
    actions = np.asarray(actions, dtype=float)
    return FlowSlice(np.ones(1), actions[np.newaxis, :])


class TestBiasedRps:
    """Class to test biased rock-paper-scissors."""

    def test_rewards_against_pure_populations(self):
        """Test the reward of every action against each pure population."""
        game = biased_rps()
        np.testing.assert_allclose(game.reward_table(_one_shot_slice([1, 0, 0]))[0], [0.0, -0.7, 0.7])
        np.testing.assert_allclose(game.reward_table(_one_shot_slice([0, 1, 0]))[0], [0.5, 0.0, -0.5])
        np.testing.assert_allclose(game.reward_table(_one_shot_slice([0, 0, 1]))[0], [-0.3, 0.3, 0.0])

    def test_nash_equalises_rewards(self):
        """Every action earns zero against the Nash population."""
        game = biased_rps()
        policy_set = PolicySet(game, constant_policies(game))
        payoffs = policy_payoffs(policy_set, mixture_flow(policy_set, BIASED_RPS_NASH))
        np.testing.assert_allclose(payoffs, 0.0, atol=1e-12)

    def test_reward_range(self):
        """Test the declared reward range."""
        assert biased_rps().reward_range == pytest.approx(0.7)


class TestOtherGames:
    """Class to test the remaining registered games."""

    def test_coop_betray_punish_rewards(self):
        """Test the quadratic rewards at a mixed population."""
        game = coop_betray_punish()
        a, b, c = 0.5, 0.2, 0.3
        expected = [a - 20 / 9 * (a - c) * c - 2 * b, 2 * (a - b) - 238 * c, 200 / 9 * (a - c) * c]
        np.testing.assert_allclose(game.reward_table(_one_shot_slice([a, b, c]))[0], expected)

    def test_matrix_game(self):
        """Test r(a, mu) = (M mu)_a."""
        game = matrix_game([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(game.reward_table(_one_shot_slice([0.5, 0.5]))[0], [1.5, 3.5])
        assert game.reward_range == pytest.approx(4.0)

    def test_matrix_game_not_square(self):
        """Test that non-square matrices are rejected."""
        with pytest.raises(ValueError):
            matrix_game([[1.0, 2.0, 3.0], [3.0, 4.0, 5.0]])

    def test_crowd_chain_transitions_clamped(self):
        """Moves at the ends of the line are clamped."""
        game = crowd_chain(n_positions=3, horizon=2)
        np.testing.assert_equal(game.transitions, [[0, 0, 1], [0, 1, 2], [1, 2, 2]])

    def test_crowd_chain_reward(self):
        """Agents pay the crowd at their position plus the movement cost."""
        game = crowd_chain(n_positions=2, horizon=1, aversion=2.0, move_cost=0.5)
        table = game.reward_table(FlowSlice(np.array([0.75, 0.25]), np.array([[0.0, 0.75, 0.0], [0.0, 0.25, 0.0]])))
        np.testing.assert_allclose(table, [[-2.0, -1.5, -2.0], [-1.0, -0.5, -1.0]])

    def test_crowd_chain_invalid(self):
        """Test invalid crowd chain sizes."""
        with pytest.raises(ValueError):
            crowd_chain(n_positions=1)


class TestGameSpec:
    """Class to test loading games from configuration."""

    def test_load_with_aliases(self):
        """Short parameter names are accepted."""
        game = load_game(GameSpec.from_dict({"name": "crowd_chain", "L": 4, "S": 6}))
        assert game.n_states == 4
        assert game.length == 6

    def test_load_nested_parameters(self):
        """Parameters can be nested under 'parameters'."""
        game = load_game(GameSpec.from_dict({"name": "matrix", "parameters": {"payoffs": [[0, 1], [1, 0]]}}))
        assert game.n_actions == 2

    def test_unknown_game(self):
        """Test an unknown game name."""
        with pytest.raises(ConfigurationError):
            load_game(GameSpec("prisoners_dilemma"))

    def test_unknown_parameter(self):
        """Test a parameter the game does not accept."""
        with pytest.raises(ConfigurationError):
            load_game(GameSpec("biased_rps", {"bias": 2}))

    def test_invalid_parameter_value(self):
        """Constructor errors are reported as configuration errors."""
        with pytest.raises(ConfigurationError):
            load_game(GameSpec("crowd_chain", {"n_positions": 0}))

    def test_missing_name(self):
        """Test a game section without a name."""
        with pytest.raises(ConfigurationError):
            GameSpec.from_dict({"L": 3})

    def test_noise_section(self):
        """Test reading the noise model and sample count."""
        spec = GameSpec.from_dict({"name": "biased_rps", "noise": {"kind": "gaussian", "scale": 0.1, "samples": 8}})
        assert spec.noise.scale == pytest.approx(0.1)
        assert spec.samples == 8
        assert GameSpec.from_dict(spec.to_dict()) == spec

    def test_invalid_noise_section(self):
        """Test an unknown noise kind."""
        with pytest.raises(ConfigurationError):
            GameSpec.from_dict({"name": "biased_rps", "noise": {"kind": "cauchy", "scale": 0.1}})
