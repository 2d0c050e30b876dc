import numpy as np
import pytest
from scipy.optimize import linprog

from meanfield_psro.game import DeterministicPolicy, PolicySet
from meanfield_psro.games import crowd_chain
from meanfield_psro.regret.minimax import solve_minimax
from meanfield_psro.regret.protocol import run_regret_loop


def _linprog_value(matrix: np.ndarray) -> float:
    """min v s.t. M^T rho <= v, rho on the simplex."""
    n_rows, n_columns = matrix.shape
    cost = np.zeros(n_rows + 1)
    cost[-1] = 1.0
    inequality = np.hstack([matrix.T, -np.ones((n_columns, 1))])
    equality = np.hstack([np.ones((1, n_rows)), np.zeros((1, 1))])
    bounds = [(0, None)] * n_rows + [(None, None)]
    result = linprog(cost, A_ub=inequality, b_ub=np.zeros(n_columns), A_eq=equality, b_eq=[1.0], bounds=bounds)
    return float(result.fun)


class TestSolveMinimax:
    """Class to test the exact minimax solver."""

    def test_matching_pennies(self):
        """Test the uniform solution of matching pennies."""
        solution = solve_minimax(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        np.testing.assert_allclose(solution.rho, [0.5, 0.5])
        assert solution.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(solution.dual, [0.5, 0.5])

    def test_dominated_row(self):
        """The dominating row gets all the weight."""
        solution = solve_minimax(np.array([[0.0, 0.0], [1.0, 1.0]]))
        np.testing.assert_allclose(solution.rho, [1.0, 0.0])
        assert solution.value == pytest.approx(0.0)

    def test_single_row(self):
        """A single row is its own solution."""
        solution = solve_minimax(np.array([[0.3, -0.2, 0.7]]))
        np.testing.assert_allclose(solution.rho, [1.0])
        assert solution.value == pytest.approx(0.7)
        np.testing.assert_equal(solution.active_columns, [2])

    def test_degenerate_matrix(self):
        """An all-zero matrix has value zero."""
        solution = solve_minimax(np.zeros((4, 3)))
        assert solution.value == pytest.approx(0.0)
        assert solution.rho.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_against_linprog(self, seed):
        """Test the value against scipy's LP solver on random matrices."""
        rng = np.random.default_rng(seed)
        matrix = rng.normal(size=(rng.integers(2, 30), rng.integers(2, 8)))
        solution = solve_minimax(matrix)
        assert solution.value == pytest.approx(_linprog_value(matrix), abs=1e-8)
        assert abs(solution.duality_gap) <= 1e-8
        assert solution.rho.min() >= 0.0
        assert solution.rho.sum() == pytest.approx(1.0)

    def test_support_is_sparse(self):
        """A basic solution puts weight on at most as many rows as there are columns."""
        matrix = np.random.default_rng(7).normal(size=(40, 3))
        assert np.count_nonzero(solve_minimax(matrix).rho) <= 3

    def test_empty_matrix(self):
        """Test an empty matrix."""
        with pytest.raises(ValueError):
            solve_minimax(np.zeros((0, 3)))

    def test_non_finite_matrix(self):
        """Test NaN entries."""
        with pytest.raises(FloatingPointError):
            solve_minimax(np.array([[np.nan, 1.0], [0.0, 1.0]]))


def _check_certificate(matrix: np.ndarray) -> None:
    solution = solve_minimax(matrix)
    scale = max(1.0, float(np.abs(matrix).max()))
    assert solution.rho.min() >= 0.0
    assert solution.rho.sum() == pytest.approx(1.0, abs=1e-12)
    assert solution.dual.min() >= 0.0
    assert solution.value == pytest.approx(float((solution.rho @ matrix).max()), abs=1e-12)
    assert solution.value - float((matrix @ solution.dual).min()) <= 1e-9 * scale
    assert solution.value == pytest.approx(_linprog_value(matrix), abs=1e-7 * scale)


class TestDegenerateMinimax:
    """Class to test the minimax solver on degenerate and badly scaled matrices."""

    @pytest.fixture(scope="class")
    def crowd_regrets(self):
        """External regrets of 61 regret-matching steps over 28 crowd-chain policies, many with equal flows."""
        game = crowd_chain(5, 10, 1.0)
        tables = np.random.default_rng(11).integers(0, 3, size=(28,) + game.policy_shape)
        policy_set = PolicySet(game, [DeterministicPolicy(table) for table in tables])
        result = run_regret_loop(game, policy_set, "external", t_max=61, target_regret=-np.inf, compress_every=61)
        return result.trace.external

    def test_crowd_chain_trace(self, crowd_regrets):
        """A 61x28 crowd-chain regret matrix is solved with a certified duality gap."""
        assert crowd_regrets.shape == (61, 28)
        _check_certificate(crowd_regrets)

    def test_crowd_chain_prefixes(self, crowd_regrets):
        """Every prefix the regret loop compresses is solved with a certified duality gap."""
        for steps in (5, 17, 33, 48):
            _check_certificate(crowd_regrets[:steps])

    @pytest.mark.parametrize("seed", range(5))
    def test_duplicated_rows_and_columns(self, seed):
        """Integer matrices with repeated rows and columns have many tied bases."""
        base = np.random.default_rng(seed).integers(-2, 3, size=(15, 7)).astype(float)
        _check_certificate(np.hstack([np.vstack([base, base, base[::-1]])] * 2))

    @pytest.mark.parametrize("magnitude", [1e-6, 1e3])
    def test_scale_invariance(self, magnitude):
        """Scaling the matrix scales the value and keeps the certificate."""
        matrix = np.random.default_rng(3).normal(size=(40, 12))
        value = solve_minimax(matrix).value
        assert solve_minimax(magnitude * matrix).value == pytest.approx(magnitude * value, rel=1e-9)
        _check_certificate(magnitude * matrix)
