from dataclasses import dataclass
from typing import Any, Dict, Sequence, Union

import numpy as np

from .. import constants
from ..game import check_distribution


@dataclass(frozen=True, eq=False)
class CorrelationDevice:
    """
    Finite correlation device rho: atoms ``(weights[t], mixtures[t])``.

    Every mixture is a distribution over one shared policy set, indexed like the set.
    """

    weights: np.ndarray  # (K,)
    mixtures: np.ndarray  # (K, n)

    def __post_init__(self):
        """Validate atom weights and mixtures."""
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        mixtures = np.atleast_2d(np.asarray(self.mixtures, dtype=np.float64))
        if weights.size == 0:
            raise ValueError("A correlation device needs at least one atom.")
        if mixtures.shape[0] != weights.size:
            raise ValueError(f"Device has {weights.size} weights but {mixtures.shape[0]} mixtures.")
        check_distribution(weights, constants.ARITHMETIC_TOL)
        for mixture in mixtures:
            check_distribution(mixture, constants.ARITHMETIC_TOL)
        weights.setflags(write=False)
        mixtures.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "mixtures", mixtures)

    @property
    def n_atoms(self) -> int:
        """Number of atoms."""
        return self.weights.size

    @property
    def n_policies(self) -> int:
        """Size of the policy set the mixtures are defined over."""
        return self.mixtures.shape[1]

    def marginal(self) -> np.ndarray:
        """Recommendation marginal rho(pi_i) = sum_t rho_t nu_t(i)."""
        return self.weights @ self.mixtures

    def recommended(self, tol: float = constants.RECOMMENDATION_TOL) -> np.ndarray:
        """Indices of the policies whose marginal exceeds ``tol``."""
        return np.flatnonzero(self.marginal() > tol)

    def conditional(self, recommended: int) -> np.ndarray:
        """
        Atom weights conditioned on recommending policy ``recommended``.

        :param recommended: index of the recommended policy
        :raises ZeroDivisionError: if the policy is never recommended
        :return: rho(nu_t | pi) for every atom
        """
        joint = self.weights * self.mixtures[:, recommended]
        total = joint.sum()
        if not total > 0:
            raise ZeroDivisionError(f"Policy {recommended} has zero marginal under the device; conditional undefined.")
        return joint / total

    def pad(self, n_policies: int) -> "CorrelationDevice":
        """Extend the mixtures with zero weight on policies appended to the set."""
        if n_policies < self.n_policies:
            raise ValueError(f"Cannot shrink a device over {self.n_policies} policies to {n_policies}.")
        extra = np.zeros((self.n_atoms, n_policies - self.n_policies))
        return CorrelationDevice(self.weights, np.hstack([self.mixtures, extra]))

    @classmethod
    def singleton(cls, mixture: Union[Sequence[float], np.ndarray]) -> "CorrelationDevice":
        """Device that always recommends one mixture."""
        return cls(np.ones(1), np.asarray(mixture, dtype=np.float64)[np.newaxis, :])

    @classmethod
    def uniform(cls, mixtures: np.ndarray) -> "CorrelationDevice":
        """Empirical average (1/T) sum_t delta_{nu_t}."""
        mixtures = np.atleast_2d(mixtures)
        return cls(np.full(mixtures.shape[0], 1.0 / mixtures.shape[0]), mixtures)

    @classmethod
    def from_weights(
        cls, weights: np.ndarray, mixtures: np.ndarray, cutoff: float = constants.DEVICE_ATOM_CUTOFF
    ) -> "CorrelationDevice":
        """
        Keep the atoms whose weight exceeds ``cutoff`` and drop the policies that are not recommended.

        Mixture entries of policies whose marginal is at or below RECOMMENDATION_TOL are zeroed, so the
        device never recommends a policy it only plays through rounding noise. Mixtures and weights are
        renormalised afterwards; atoms left without mass are removed.

        :param weights: atom weights, clipped at zero
        :param mixtures: one mixture per atom
        :param cutoff: atoms at or below this weight are removed
        :return: the pruned device
        """
        weights = np.clip(np.asarray(weights, dtype=np.float64), 0.0, None)
        mixtures = np.atleast_2d(np.asarray(mixtures, dtype=np.float64))
        keep = weights > cutoff
        if not np.any(keep):
            keep = weights == weights.max()
        weights, mixtures = weights[keep], mixtures[keep]

        marginal = (weights / weights.sum()) @ mixtures
        if np.any(marginal > constants.RECOMMENDATION_TOL):
            mixtures = np.where(marginal > constants.RECOMMENDATION_TOL, mixtures, 0.0)
        mass = mixtures.sum(axis=1)
        keep = weights * mass > 0
        weights, mixtures = weights[keep] * mass[keep], mixtures[keep] / mass[keep, np.newaxis]
        return cls(weights / weights.sum(), mixtures)

    def to_dict(self) -> Dict[str, Any]:
        """Serialise atoms as weight / mixture pairs."""
        return {
            "atoms": [
                {"weight": float(weight), "mixture": mixture.tolist()}
                for weight, mixture in zip(self.weights, self.mixtures)
            ]
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CorrelationDevice":
        """Rebuild a device written by :meth:`to_dict`."""
        atoms = data["atoms"]
        return cls(np.array([atom["weight"] for atom in atoms]), np.array([atom["mixture"] for atom in atoms]))
