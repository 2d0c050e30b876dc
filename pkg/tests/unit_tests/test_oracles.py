import numpy as np
import pytest

from meanfield_psro.best_response import best_response
from meanfield_psro.game import PolicySet, constant_policies, mixture_flow, occupancy_flow
from meanfield_psro.games import crowd_chain
from meanfield_psro.metrics.gaps import exploitability
from meanfield_psro.regret.minimax import solve_minimax

from .oracles import (
    brute_best_value,
    brute_exploitability,
    brute_minimax,
    enumerate_policies,
    grid_minimax,
    simplex_grid,
    vertex_minimax,
)


class TestEnumeration:
    """Class to test the policy enumeration oracle."""

    def test_enumerate_finite_horizon(self):
        """Every time-indexed table is produced once."""
        game = crowd_chain(n_positions=2, horizon=2)
        policies = list(enumerate_policies(game))
        assert len(policies) == 3**4
        assert len(set(policies)) == 3**4

    def test_enumerate_guard(self):
        """Large policy spaces are refused."""
        with pytest.raises(ValueError):
            list(enumerate_policies(crowd_chain(n_positions=5, horizon=10)))

    def test_simplex_grid(self):
        """Grid points are distributions."""
        grid = simplex_grid(3, 4)
        assert grid.shape == (15, 3)
        np.testing.assert_allclose(grid.sum(axis=1), 1.0)


class TestBruteForceAgreement:
    """Class to test the solvers against enumeration."""

    def test_best_response_finite_horizon(self):
        """Backward induction matches the best enumerated policy."""
        game = crowd_chain(n_positions=3, horizon=2)
        policy_set = PolicySet(game, constant_policies(game))
        nu = np.array([0.2, 0.5, 0.3])
        response = best_response(game, mixture_flow(policy_set, nu))
        assert response.value == pytest.approx(brute_best_value(game, policy_set, nu), abs=1e-12)

    def test_best_response_discounted(self):
        """Value iteration matches the best enumerated stationary policy."""
        game = crowd_chain(n_positions=3, gamma=0.8)
        policy_set = PolicySet(game, constant_policies(game))
        nu = np.array([0.1, 0.6, 0.3])
        response = best_response(game, mixture_flow(policy_set, nu))
        assert response.value == pytest.approx(brute_best_value(game, policy_set, nu), abs=1e-6)

    def test_exploitability(self):
        """Exploitability matches the enumerated one."""
        game = crowd_chain(n_positions=3, horizon=2)
        policy_set = PolicySet(game, constant_policies(game))
        nu = np.array([0.0, 0.25, 0.75])
        assert exploitability(game, policy_set, nu).value == pytest.approx(
            brute_exploitability(game, policy_set, nu), abs=1e-12
        )

    def test_best_response_is_optimal_against_own_flow(self):
        """The witness earns the best value against the flow it was computed for."""
        game = crowd_chain(n_positions=3, horizon=2)
        policy_set = PolicySet(game, constant_policies(game)[:1])
        response = best_response(game, occupancy_flow(game, policy_set[0]))
        assert response.value == pytest.approx(brute_best_value(game, policy_set, [1.0]), abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_minimax_against_grid(self, seed):
        """The LP value is never above the grid optimum and close to it."""
        matrix = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(3, 4))
        exact = solve_minimax(matrix).value
        grid = grid_minimax(matrix, resolution=40)
        assert exact <= grid + 1e-12
        assert grid - exact <= 0.1

    def test_minimax_against_enumeration(self):
        """The LP value matches the refined brute-force value on 200 random 4x4 matrices."""
        rng = np.random.default_rng(8)
        for _ in range(200):
            matrix = rng.uniform(-1.0, 1.0, size=(4, 4))
            assert solve_minimax(matrix).value == pytest.approx(brute_minimax(matrix), abs=1e-9)

    def test_vertex_refinement_beats_grid(self):
        """Vertex enumeration finds the irrational optimum the grid misses."""
        matrix = np.array([[1.0, -np.sqrt(2.0)], [-1.0, np.sqrt(3.0)]])
        assert vertex_minimax(matrix) == pytest.approx(solve_minimax(matrix).value, abs=1e-12)
        assert grid_minimax(matrix, resolution=20) > vertex_minimax(matrix) + 1e-6

    def test_exploitability_on_random_instances(self):
        """Exploitability matches enumeration on 100 random policy sets and mixtures."""
        game = crowd_chain(n_positions=2, horizon=2)
        policies = list(enumerate_policies(game))
        rng = np.random.default_rng(9)
        for _ in range(100):
            chosen = rng.choice(len(policies), size=int(rng.integers(1, 5)), replace=False)
            policy_set = PolicySet(game, [policies[i] for i in chosen])
            nu = rng.dirichlet(np.ones(len(policy_set)))
            assert exploitability(game, policy_set, nu).value == pytest.approx(
                brute_exploitability(game, policy_set, nu), abs=1e-9
            )
