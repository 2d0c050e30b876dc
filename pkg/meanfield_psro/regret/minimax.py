import logging
from dataclasses import dataclass

import numpy as np

from .. import constants

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinimaxSolution:
    """
    Optimal row mixture of min_rho max_k (rho^T M)_k.

    ``dual`` is the column player's optimal mixture and ``duality_gap`` the difference between the
    primal value and min_t (M dual)_t.
    """

    rho: np.ndarray
    value: float
    active_columns: np.ndarray
    dual: np.ndarray
    duality_gap: float


def _pivot(tableau: np.ndarray, row: int, column: int) -> None:
    tableau[row] /= tableau[row, column]
    factors = tableau[:, column].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def _improving_columns(reduced: np.ndarray) -> np.ndarray:
    return np.flatnonzero(reduced > constants.PIVOT_TOL * max(1.0, float(np.abs(reduced).max())))


def _bland_simplex(tableau: np.ndarray, basis: np.ndarray) -> int:
    """
    Run primal simplex pivots with Bland's rule on a maximisation tableau.

    Pivot elements and reduced costs are compared against PIVOT_TOL relative to the magnitude of their
    column and row.

    :param tableau: constraint rows followed by the reduced-cost row, right-hand side in the last column
    :param basis: basic variable of every constraint row, updated in place
    :raises FloatingPointError: on an apparent unbounded direction or when the pivot limit is hit
    :return: the number of pivots
    """
    n_rows = basis.size
    max_pivots = 50 * tableau.shape[1] + 1000
    for pivots in range(max_pivots):
        candidates = _improving_columns(tableau[n_rows, :-1])
        if candidates.size == 0:
            return pivots
        entering = candidates[0]
        column = tableau[:n_rows, entering]
        positive = np.flatnonzero(column > constants.PIVOT_TOL * max(1.0, float(np.abs(column).max())))
        if positive.size == 0:
            raise FloatingPointError(f"Simplex found an unbounded direction in column {entering}.")
        ratios = tableau[positive, -1] / column[positive]
        best = ratios.min()
        ties = positive[ratios <= best + constants.PIVOT_TOL * max(1.0, abs(best))]
        leaving = ties[np.argmin(basis[ties])]
        _pivot(tableau, leaving, entering)
        basis[leaving] = entering
    raise FloatingPointError(f"Simplex did not terminate after {max_pivots} pivots.")


def _refactor(constraints: np.ndarray, objective: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """
    Rebuild the tableau of ``basis`` from the original constraints, discarding accumulated pivot error.

    :param constraints: original constraint rows [A | I | b]
    :param objective: original objective row, zero in the right-hand side column
    :param basis: basic variable of every constraint row
    :raises FloatingPointError: if the basis matrix is singular
    :return: the tableau with B^-1 [A | I | b] and the reduced costs c - c_B B^-1 [A | I | b]
    """
    basic = constraints[:, basis]
    try:
        body = np.linalg.solve(basic, constraints)
        prices = np.linalg.solve(basic.T, objective[basis])
    except np.linalg.LinAlgError as err:
        raise FloatingPointError("Simplex basis became singular.") from err
    body[:, -1] = np.clip(body[:, -1], 0.0, None)
    reduced = objective - prices @ constraints
    reduced[basis] = 0.0
    return np.vstack([body, reduced])


def solve_minimax(matrix: np.ndarray) -> MinimaxSolution:
    """
    Solve min_rho max_k (rho^T M)_k over the probability simplex exactly.

    The matrix is rescaled to entries in [1, 2], M' = (M - min(M)) / range(M) + 1, which leaves the
    optimal rho unchanged. The equivalent program max sum(u) s.t. M'^T u <= 1, u >= 0 is solved with a
    dense tableau simplex using Bland's rule, starting from the feasible slack basis. When the pivots
    stop, the tableau is rebuilt from the original constraints and the final basis, so that rho = u / sum(u)
    and the dual mixture come from exact basis solves rather than from the pivoted tableau. Pivoting
    resumes if the rebuilt reduced costs still show an improving column.

    :param matrix: T x K payoff matrix, rows are mixed over
    :raises ValueError: if the matrix is empty
    :raises FloatingPointError: if the matrix is not finite, or no basis with a duality gap within
        CERTIFICATE_TOL is found after SIMPLEX_REFACTORIZATIONS rebuilds
    :return: the optimal rho, the game value and the dual certificate
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.ndim != 2 or matrix.size == 0:
        raise ValueError(f"Minimax needs a non-empty matrix. Given shape: {matrix.shape}.")
    if not np.all(np.isfinite(matrix)):
        raise FloatingPointError("Minimax matrix contains non-finite entries.")

    n_rows, n_columns = matrix.shape
    spread = float(matrix.max() - matrix.min())
    shifted = (matrix - matrix.min()) / (spread if spread > 0 else 1.0) + 1.0
    scale = max(1.0, float(np.abs(matrix).max()))

    # constraint rows are the K columns of M; variables are u (T) followed by the K slacks
    constraints = np.hstack([shifted.T, np.eye(n_columns), np.ones((n_columns, 1))])
    objective = np.concatenate([np.ones(n_rows), np.zeros(n_columns + 1)])
    tableau = np.vstack([constraints, objective])
    basis = np.arange(n_rows, n_rows + n_columns)

    pivots = 0
    for rebuild in range(constants.SIMPLEX_REFACTORIZATIONS + 1):
        try:
            pivots += _bland_simplex(tableau, basis)
        except FloatingPointError as err:
            logger.debug(f"Rebuilding the simplex tableau after pivot {pivots}: {err}")
            if rebuild == constants.SIMPLEX_REFACTORIZATIONS:
                raise
            tableau = _refactor(constraints, objective, basis)
            continue
        tableau = _refactor(constraints, objective, basis)
        if _improving_columns(tableau[n_columns, :-1]).size:
            continue

        u = np.zeros(n_rows + n_columns)
        u[basis] = tableau[:n_columns, -1]
        u = u[:n_rows]
        if not u.sum() > 0:
            continue
        rho = u / u.sum()
        dual = np.clip(-tableau[n_columns, n_rows:-1], 0.0, None)
        if not dual.sum() > 0:
            continue
        dual = dual / dual.sum()

        column_values = rho @ matrix
        value = float(column_values.max())
        duality_gap = value - float((matrix @ dual).min())
        if abs(duality_gap) > constants.CERTIFICATE_TOL * scale:
            logger.debug(f"Duality gap {duality_gap:.3e} after rebuild {rebuild}, resuming pivots")
            continue

        active = np.flatnonzero(column_values >= value - constants.CERTIFICATE_TOL * scale)
        logger.debug(f"Solved {n_rows}x{n_columns} minimax in {pivots} pivots, value {value:.6g}")
        return MinimaxSolution(rho=rho, value=value, active_columns=active, dual=dual, duality_gap=duality_gap)

    raise FloatingPointError(
        f"Minimax on a {n_rows}x{n_columns} matrix found no basis with a certified duality gap "
        f"after {constants.SIMPLEX_REFACTORIZATIONS} rebuilds."
    )
