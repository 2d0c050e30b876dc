import logging
from typing import Any, Dict, Iterable, List, Tuple

import numpy as np

from .minimax import MinimaxSolution, solve_minimax

logger = logging.getLogger(__name__)


class RegretTrace:
    """
    Iterates of a regret loop together with the payoff vectors they produced.

    ``external[t, i]`` is the regret of policy i against iterate t and ``internal[t, i, j]`` the gain of
    swapping i for j, weighted by nu_t(i).
    """

    def __init__(self, n_policies: int):
        """
        Initialize an empty RegretTrace.

        :param n_policies: size of the policy set the iterates are defined over
        """
        self.n_policies = n_policies
        self._mixtures: List[np.ndarray] = []
        self._payoffs: List[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._mixtures)

    def append(self, nu: np.ndarray, payoffs: np.ndarray) -> None:
        """
        Record one iterate.

        :param nu: the mixture played
        :param payoffs: J(pi_i, mu(nu)) for every policy i
        :raises ValueError: if the vectors do not match the policy set
        """
        if nu.shape != (self.n_policies,) or payoffs.shape != (self.n_policies,):
            raise ValueError(f"Trace rows must have {self.n_policies} entries. Given: {nu.shape}, {payoffs.shape}.")
        self._mixtures.append(np.array(nu, dtype=np.float64))
        self._payoffs.append(np.array(payoffs, dtype=np.float64))

    @property
    def iterates(self) -> np.ndarray:
        """Played mixtures, shape (T, n)."""
        return np.array(self._mixtures).reshape(len(self), self.n_policies)

    @property
    def payoffs(self) -> np.ndarray:
        """Observed payoff vectors, shape (T, n)."""
        return np.array(self._payoffs).reshape(len(self), self.n_policies)

    @property
    def external(self) -> np.ndarray:
        """External regrets J(pi_i, mu(nu_t)) - J(pi(nu_t), mu(nu_t)), shape (T, n)."""
        payoffs = self.payoffs
        played = np.einsum("ti,ti->t", self.iterates, payoffs)
        return payoffs - played[:, np.newaxis]

    @property
    def internal(self) -> np.ndarray:
        """Swap regrets nu_t(i) (J(pi_j, mu(nu_t)) - J(pi_i, mu(nu_t))), shape (T, n, n)."""
        payoffs = self.payoffs
        return self.iterates[:, :, np.newaxis] * (payoffs[:, np.newaxis, :] - payoffs[:, :, np.newaxis])

    def to_dict(self) -> Dict[str, Any]:
        """Serialise the iterates and payoffs."""
        return {"iterates": self.iterates.tolist(), "payoffs": self.payoffs.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RegretTrace":
        """Rebuild a trace written by :meth:`to_dict`."""
        iterates = np.atleast_2d(np.array(data["iterates"], dtype=np.float64))
        trace = cls(iterates.shape[1])
        for nu, payoffs in zip(iterates, np.array(data["payoffs"], dtype=np.float64)):
            trace.append(nu, payoffs)
        return trace


def _check_trace(trace: RegretTrace) -> None:
    if len(trace) == 0:
        raise ValueError("Cannot compress an empty regret trace.")


def compress_cce(trace: RegretTrace) -> MinimaxSolution:
    """
    Temporal weights minimising the maximal external regret of the weighted iterates.

    :param trace: the regret trace
    :raises ValueError: if the trace is empty
    :return: the minimax solution over the (T, n) external regret matrix
    """
    _check_trace(trace)
    return solve_minimax(trace.external)


def compress_ce(trace: RegretTrace) -> MinimaxSolution:
    """
    Temporal weights minimising the maximal swap regret of the weighted iterates.

    :param trace: the regret trace
    :raises ValueError: if the trace is empty
    :return: the minimax solution over the (T, n * n) flattened swap regret tensor
    """
    _check_trace(trace)
    return solve_minimax(trace.internal.reshape(len(trace), -1))


def noisy_compression_gap(
    matrix: np.ndarray, sigma: float, seeds: Iterable[int]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Optimality loss of compressing a noisy regret matrix.

    For every seed the matrix is perturbed with i.i.d. N(0, sigma^2) entries. The gap is the true
    max-regret of the noisy optimum minus the true optimum; it lies in [0, 4 ||eps||_inf].

    :param matrix: clean T x K regret matrix
    :param sigma: noise standard deviation
    :param seeds: one seed per draw
    :raises ValueError: if sigma is negative
    :return: gap samples and the realised bounds 4 ||eps||_inf, one per seed
    """
    if sigma < 0:
        raise ValueError(f"The noise level must be non-negative. Given: {sigma}.")
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    clean = solve_minimax(matrix)
    gaps, bounds = [], []
    for seed in seeds:
        noise = np.random.default_rng(seed).normal(0.0, sigma, size=matrix.shape)
        noisy = solve_minimax(matrix + noise)
        gaps.append(float((noisy.rho @ matrix).max()) - clean.value)
        bounds.append(4.0 * float(np.abs(noise).max()))
    return np.array(gaps), np.array(bounds)
