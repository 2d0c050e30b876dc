import numpy as np
import pytest

from meanfield_psro.game import DeterministicPolicy, PolicySet, constant_policies
from meanfield_psro.games import biased_rps, coop_betray_punish, crowd_chain
from meanfield_psro.metrics.structure import (
    StructureCheck,
    check_diff_affine,
    check_monotonicity,
    check_restricted_monotonicity,
    meta_game_matrix,
    symmetric_nash_of_meta_game,
)

BIASED_RPS_NASH = np.array([15.0, 21.0, 35.0]) / 71.0


class TestDiffAffine:
    """Class to test the diff-affine check."""

    def test_biased_rps(self):
        """Rewards linear in the population are diff-affine."""
        assert check_diff_affine(biased_rps(), trials=100)

    def test_crowd_chain(self):
        """Crowd aversion is affine in the state distribution."""
        assert check_diff_affine(crowd_chain(n_positions=4, horizon=2), trials=100)

    def test_coop_betray_punish(self):
        """Quadratic rewards are not diff-affine."""
        check = check_diff_affine(coop_betray_punish(), trials=100)
        assert not check
        assert check.violation > 0
        assert len(check.witness) == 4

    def test_invalid_trials(self):
        """Test a non-positive number of trials."""
        with pytest.raises(ValueError):
            check_diff_affine(biased_rps(), trials=0)


class TestMetaGame:
    """Class to test the meta-game of a policy set."""

    def test_biased_rps_matrix(self):
        """Entry (i, j) is the payoff of policy i against the population of policy j."""
        game = biased_rps()
        matrix = meta_game_matrix(game, PolicySet(game, constant_policies(game)))
        np.testing.assert_allclose(matrix, [[0.0, 0.5, -0.3], [-0.7, 0.0, 0.3], [0.7, -0.5, 0.0]])

    def test_symmetric_nash(self):
        """The symmetric equilibrium of the biased RPS meta-game is its Nash mixture."""
        matrix = np.array([[0.0, 0.5, -0.3], [-0.7, 0.0, 0.3], [0.7, -0.5, 0.0]])
        np.testing.assert_allclose(symmetric_nash_of_meta_game(matrix), BIASED_RPS_NASH, atol=1e-9)

    def test_symmetric_nash_single_policy(self):
        """Test a one-policy meta-game."""
        np.testing.assert_equal(symmetric_nash_of_meta_game(np.array([[2.0]])), [1.0])

    def test_not_square(self):
        """Test a rectangular meta-game."""
        with pytest.raises(ValueError):
            symmetric_nash_of_meta_game(np.zeros((2, 3)))

    def test_empty_set(self):
        """Test an empty policy set."""
        game = biased_rps()
        with pytest.raises(ValueError):
            meta_game_matrix(game, PolicySet(game, []))


class TestMonotonicity:
    """Class to test the monotonicity checks."""

    def test_crowd_chain_monotone(self):
        """Crowd aversion is monotone."""
        assert check_monotonicity(crowd_chain(n_positions=4, horizon=3), pairs=100)

    def test_biased_rps_not_monotone(self):
        """A and B violate monotonicity by 0.2."""
        check = check_monotonicity(biased_rps(), pairs=100)
        assert not check
        assert check.violation == pytest.approx(0.2)

    def test_restricted_monotonicity(self):
        """The restricted game of a monotone game is monotone."""
        game = crowd_chain(n_positions=4, horizon=3)
        policy_set = PolicySet(game, constant_policies(game))
        assert check_restricted_monotonicity(game, policy_set, pairs=100)

    def test_restricted_monotonicity_violation(self):
        """The pure-strategy restriction of biased RPS is not monotone."""
        game = biased_rps()
        check = check_restricted_monotonicity(game, PolicySet(game, constant_policies(game)), pairs=200)
        assert not check
        first, second = check.witness
        assert first.sum() == pytest.approx(1.0)
        assert second.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("name", ["crowd_chain", "biased_rps"])
    def test_full_game_agrees_with_random_subsets(self, name):
        """The full-game check agrees with the conjunction of checks on 10 random restricted games."""
        rng = np.random.default_rng(5)
        if name == "crowd_chain":
            game = crowd_chain(n_positions=4, horizon=3)
            tables = rng.integers(0, game.n_actions, size=(40,) + game.policy_shape)
            pool = list(dict.fromkeys(DeterministicPolicy(table) for table in tables))
        else:
            game = biased_rps()
            pool = constant_policies(game)
        subsets = []
        for _ in range(10):
            chosen = rng.choice(len(pool), size=int(rng.integers(2, min(len(pool), 5) + 1)), replace=False)
            subsets.append(PolicySet(game, [pool[i] for i in sorted(chosen)]))
        full = bool(check_monotonicity(game))
        restricted = all(bool(check_restricted_monotonicity(game, subset, pairs=200)) for subset in subsets)
        assert full == restricted
        assert full == (name == "crowd_chain")

    def test_structure_check_truthiness(self):
        """Checks are truthy exactly when they hold."""
        assert StructureCheck(True)
        assert not StructureCheck(False, 1.0)
