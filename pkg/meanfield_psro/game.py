import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import constants
from .constants import ConfigurationError, HorizonMode

logger = logging.getLogger(__name__)


class FlowSlice(NamedTuple):
    """Population distribution at one step, as seen by a reward function."""

    states: np.ndarray  # (X,)
    state_actions: np.ndarray  # (X, A)

    @property
    def actions(self) -> np.ndarray:
        """Population action marginal."""
        return self.state_actions.sum(axis=0)


RewardFunction = Callable[[FlowSlice], np.ndarray]


def check_distribution(
    vector: Union[Sequence[float], np.ndarray], tol: float = constants.CONSTRUCTION_TOL
) -> np.ndarray:
    """
    Validate a probability vector.

    :param vector: candidate probability vector
    :param tol: absolute tolerance on negativity and on the total mass
    :raises ValueError: if the vector is empty, not finite, negative or does not sum to one
    :return: the vector as a float array
    """
    array = np.asarray(vector, dtype=np.float64)
    if array.ndim != 1 or array.size == 0:
        raise ValueError(f"A probability vector must be one-dimensional and non-empty. Given shape: {array.shape}.")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"Probability vector contains non-finite entries: {array}.")
    if np.any(array < -tol):
        raise ValueError(f"Probability vector has negative entries: {array}.")
    if abs(array.sum() - 1.0) > tol:
        raise ValueError(f"Probability vector must sum to 1 within {tol}, sums to {array.sum()!r}.")
    return array


@dataclass(frozen=True)
class FiniteHorizon:
    """Finite horizon of ``length`` decision steps."""

    length: int

    def __post_init__(self):
        """Validate the horizon length."""
        if int(self.length) < 1:
            raise ValueError(f"A finite horizon needs at least one step. Given: {self.length}.")

    @property
    def mode(self) -> HorizonMode:
        """Return the horizon mode."""
        return HorizonMode.FINITE

    def step_weights(self) -> np.ndarray:
        """Every step counts once."""
        return np.ones(self.length)


@dataclass(frozen=True)
class Discounted:
    """
    Discounted horizon truncated after ``length`` steps.

    If ``length`` is omitted, it is chosen as the smallest S_eff with gamma ** S_eff < DISCOUNT_TRUNCATION.
    """

    gamma: float
    length: Optional[int] = None

    def __post_init__(self):
        """Validate gamma and fill in the truncation length."""
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"The discount factor must lie in (0, 1). Given: {self.gamma}.")
        if self.length is None:
            length = int(np.ceil(np.log(constants.DISCOUNT_TRUNCATION) / np.log(self.gamma))) + 1
            object.__setattr__(self, "length", length)
        elif int(self.length) < 1:
            raise ValueError(f"The truncation length must be positive. Given: {self.length}.")

    @property
    def mode(self) -> HorizonMode:
        """Return the horizon mode."""
        return HorizonMode.DISCOUNTED

    def step_weights(self) -> np.ndarray:
        """Geometric weights normalised by (1 - gamma) / (1 - gamma ** S_eff) so that they sum to one."""
        steps = np.arange(self.length)
        return self.gamma**steps * (1.0 - self.gamma) / (1.0 - self.gamma**self.length)


Horizon = Union[FiniteHorizon, Discounted]


@dataclass(frozen=True, eq=False)
class MeanFieldGame:
    """
    Finite mean-field game with deterministic, population-independent transitions.

    The reward callable receives a :class:`FlowSlice` and returns the full reward table of shape
    (n_states, n_actions) for that population distribution. It must be a pure function.
    """

    name: str
    n_states: int
    n_actions: int
    reward: RewardFunction
    transitions: np.ndarray
    mu0: np.ndarray
    horizon: Horizon
    reward_range: float = 1.0
    action_names: Tuple[str, ...] = ()
    parameters: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        """Validate the transition table, the initial distribution and the reward range."""
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError(f"Games need at least one state and one action, got {self.n_states}, {self.n_actions}.")
        transitions = np.asarray(self.transitions, dtype=np.int64)
        if transitions.shape != (self.n_states, self.n_actions):
            raise ValueError(
                f"Transition table must have shape {(self.n_states, self.n_actions)}. Given: {transitions.shape}."
            )
        if transitions.min() < 0 or transitions.max() >= self.n_states:
            raise ValueError("Every transition must lead to a valid state.")
        transitions.setflags(write=False)
        object.__setattr__(self, "transitions", transitions)

        mu0 = check_distribution(self.mu0)
        if mu0.size != self.n_states:
            raise ValueError(f"mu0 must have {self.n_states} entries. Given: {mu0.size}.")
        mu0.setflags(write=False)
        object.__setattr__(self, "mu0", mu0)

        if not self.reward_range > 0:
            raise ValueError(f"The reward range must be positive. Given: {self.reward_range}.")

    @property
    def length(self) -> int:
        """Number of rollout steps (S, or S_eff in discounted mode)."""
        return int(self.horizon.length)

    @property
    def discounted(self) -> bool:
        """Whether the game is played in discounted mode."""
        return self.horizon.mode is HorizonMode.DISCOUNTED

    @property
    def policy_shape(self) -> Tuple[int, ...]:
        """Shape of a deterministic action table: time-indexed for finite horizons, stationary otherwise."""
        if self.discounted:
            return (self.n_states,)
        return (self.length, self.n_states)

    def step_weights(self) -> np.ndarray:
        """Payoff weight of every rollout step."""
        return self.horizon.step_weights()

    def reward_table(self, flow_slice: FlowSlice) -> np.ndarray:
        """
        Evaluate the reward of every (state, action) against one population slice.

        :param flow_slice: the population distribution
        :raises ValueError: if the reward function returns a table of the wrong shape
        :return: reward table of shape (n_states, n_actions)
        """
        table = np.asarray(self.reward(flow_slice), dtype=np.float64)
        if table.shape != (self.n_states, self.n_actions):
            raise ValueError(
                f"Reward of game {self.name} returned shape {table.shape}, expected {(self.n_states, self.n_actions)}."
            )
        return table

    def reward_tables(self, flow: "PopulationFlow") -> np.ndarray:
        """
        Reward tables for every step of a population flow.

        In discounted mode every step sees the normalised discounted aggregate of the flow.

        :param flow: population flow the rewards are evaluated against
        :return: array of shape (S, n_states, n_actions)
        """
        check_flow(self, flow)
        if self.discounted:
            table = self.reward_table(flow.aggregate())
            return np.broadcast_to(table, (self.length,) + table.shape)
        return np.stack([self.reward_table(flow_slice) for flow_slice in flow.slices()])

    def reward_at(self, state: int, action: int, flow: "PopulationFlow", step: int = 0) -> float:
        """Reward r(x, a, mu_s) of a single state and action."""
        return float(self.reward_tables(flow)[step, state, action])


class DeterministicPolicy:
    """
    Deterministic policy given by an integer action table.

    The table has shape (S, n_states) in finite-horizon mode and (n_states,) in discounted mode.
    Two policies are equal iff their action tables are identical.
    """

    __slots__ = ("actions", "_hash")

    def __init__(self, actions: Union[Sequence, np.ndarray]):
        """
        Initialize a DeterministicPolicy.

        :param actions: integer action table
        """
        table = np.array(actions, dtype=np.int64)
        table.setflags(write=False)
        self.actions = table
        self._hash = hash((table.shape, table.tobytes()))

    def action_of(self, step: int, state: int) -> int:
        """Action taken in ``state`` at ``step``."""
        if self.actions.ndim == 1:
            return int(self.actions[state])
        return int(self.actions[step, state])

    def table(self, length: int) -> np.ndarray:
        """Time-indexed action table of shape (length, n_states)."""
        if self.actions.ndim == 1:
            return np.broadcast_to(self.actions, (length, self.actions.size))
        return self.actions

    def probabilities(self, game: MeanFieldGame) -> np.ndarray:
        """One-hot action probabilities of shape (S, n_states, n_actions)."""
        check_policy(game, self)
        table = self.table(game.length)
        one_hot = np.zeros((game.length, game.n_states, game.n_actions))
        steps, states = np.indices(table.shape)
        one_hot[steps, states, table] = 1.0
        return one_hot

    def to_list(self) -> list:
        """Return the action table as nested lists."""
        return self.actions.tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeterministicPolicy):
            return NotImplemented
        return self.actions.shape == other.actions.shape and bool(np.array_equal(self.actions, other.actions))

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"DeterministicPolicy({self.actions.tolist()})"


def check_policy(game: MeanFieldGame, policy: DeterministicPolicy) -> None:
    """
    Check that a policy fits the game.

    :param game: the game
    :param policy: the policy
    :raises ConfigurationError: if the policy's horizon mode or shape does not match the game
    :raises ValueError: if the policy uses unknown actions
    """
    if policy.actions.shape != game.policy_shape:
        raise ConfigurationError(
            f"Policy table of shape {policy.actions.shape} does not match game {game.name} "
            f"({game.horizon.mode.value} horizon, expected {game.policy_shape})."
        )
    if policy.actions.min() < 0 or policy.actions.max() >= game.n_actions:
        raise ValueError(f"Policy uses actions outside [0, {game.n_actions}).")


@dataclass(frozen=True, eq=False)
class PopulationFlow:
    """
    State-occupancy measure of a population.

    ``states[s]`` is the state distribution at step s and ``state_actions[s]`` the joint distribution of
    states and actions at that step. ``weights`` holds the payoff weight of every step.
    """

    states: np.ndarray
    state_actions: np.ndarray
    weights: np.ndarray
    discounted: bool = False

    def __post_init__(self):
        """Check that every slice is a distribution."""
        totals = self.states.sum(axis=1)
        if np.any(np.abs(totals - 1.0) > constants.ARITHMETIC_TOL) or np.any(self.states < -constants.ARITHMETIC_TOL):
            raise ValueError(f"Every flow slice must be a probability distribution. Slice masses: {totals}.")
        for array in (self.states, self.state_actions, self.weights):
            array.setflags(write=False)

    @property
    def length(self) -> int:
        """Number of steps."""
        return self.states.shape[0]

    def slices(self) -> List[FlowSlice]:
        """Per-step population slices."""
        return [FlowSlice(states, state_actions) for states, state_actions in zip(self.states, self.state_actions)]

    def aggregate(self) -> FlowSlice:
        """Weight-averaged slice, i.e. the normalised discounted occupancy in discounted mode."""
        return FlowSlice(
            np.tensordot(self.weights, self.states, axes=1) / self.weights.sum(),
            np.tensordot(self.weights, self.state_actions, axes=1) / self.weights.sum(),
        )

    @staticmethod
    def mix(flows: Sequence["PopulationFlow"], weights: np.ndarray) -> "PopulationFlow":
        """
        Convex combination of flows sharing one game.

        :param flows: flows to combine
        :param weights: mixture weights, one per flow
        :return: the combined flow
        """
        states = np.tensordot(weights, np.stack([flow.states for flow in flows]), axes=1)
        state_actions = np.tensordot(weights, np.stack([flow.state_actions for flow in flows]), axes=1)
        return PopulationFlow(states, state_actions, flows[0].weights.copy(), flows[0].discounted)


def check_flow(game: MeanFieldGame, flow: PopulationFlow) -> None:
    """
    Check that a flow is compatible with the game's horizon.

    :param game: the game
    :param flow: the flow
    :raises ConfigurationError: on a horizon mismatch
    """
    if flow.discounted != game.discounted or flow.states.shape != (game.length, game.n_states):
        raise ConfigurationError(
            f"Flow of shape {flow.states.shape} (discounted={flow.discounted}) does not match game {game.name}."
        )


def behaviour_flow(game: MeanFieldGame, probabilities: np.ndarray) -> PopulationFlow:
    """
    Forward-propagate mu0 under a behavioural policy.

    :param game: the game
    :param probabilities: action probabilities of shape (S, n_states, n_actions), or (n_states, n_actions)
        for a stationary policy
    :raises ConfigurationError: if the table does not fit the game
    :return: the induced population flow
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim == 2:
        probabilities = np.broadcast_to(probabilities, (game.length,) + probabilities.shape)
    if probabilities.shape != (game.length, game.n_states, game.n_actions):
        raise ConfigurationError(
            f"Behavioural policy of shape {probabilities.shape} does not fit game {game.name} "
            f"({(game.length, game.n_states, game.n_actions)})."
        )

    states = np.zeros((game.length, game.n_states))
    state_actions = np.zeros((game.length, game.n_states, game.n_actions))
    states[0] = game.mu0
    targets = game.transitions.ravel()
    for step in range(game.length):
        state_actions[step] = states[step][:, np.newaxis] * probabilities[step]
        if step + 1 < game.length:
            np.add.at(states[step + 1], targets, state_actions[step].ravel())
    return PopulationFlow(states, state_actions, game.step_weights(), game.discounted)


def occupancy_flow(game: MeanFieldGame, policy: DeterministicPolicy) -> PopulationFlow:
    """
    Population flow induced when every agent plays ``policy``.

    :param game: the game
    :param policy: a deterministic policy
    :return: the flow mu^pi
    """
    return behaviour_flow(game, policy.probabilities(game))


def evaluate_occupancy(game: MeanFieldGame, state_actions: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    """Weighted sum of rewards over the representative player's own occupancy; leading axes are kept."""
    return np.einsum("s,...sxa,sxa->...", game.step_weights(), state_actions, rewards)


def payoff(game: MeanFieldGame, policy: DeterministicPolicy, mu: PopulationFlow) -> float:
    """
    Expected payoff J(pi, mu) of a deterministic policy against an environment flow.

    :param game: the game
    :param policy: the representative player's policy
    :param mu: the population flow the player faces
    :return: the payoff
    """
    own = occupancy_flow(game, policy)
    return float(evaluate_occupancy(game, own.state_actions, game.reward_tables(mu)))


def behaviour_payoff(game: MeanFieldGame, probabilities: np.ndarray, mu: PopulationFlow) -> float:
    """Expected payoff of a behavioural policy against an environment flow."""
    own = behaviour_flow(game, probabilities)
    return float(evaluate_occupancy(game, own.state_actions, game.reward_tables(mu)))


class PolicySet:
    """
    Ordered, duplicate-free, immutable collection of deterministic policies.

    Each entry caches its population flow. Growing a set returns a new set sharing the cached flows.
    """

    def __init__(self, game: MeanFieldGame, policies: Sequence[DeterministicPolicy] = (), _flows=None):
        """
        Initialize a PolicySet.

        :param game: the game the policies belong to
        :param policies: the policies
        :raises ValueError: if two policies are equal
        """
        self.game = game
        self._policies: Tuple[DeterministicPolicy, ...] = tuple(policies)
        self._index: Dict[DeterministicPolicy, int] = {}
        for i, policy in enumerate(self._policies):
            if policy in self._index:
                raise ValueError(f"Policy {policy} appears twice in the policy set.")
            check_policy(game, policy)
            self._index[policy] = i
        flows = tuple(_flows) if _flows is not None else ()
        flows += tuple(occupancy_flow(game, policy) for policy in self._policies[len(flows) :])
        self._flows: Tuple[PopulationFlow, ...] = flows
        if flows:
            self._occupancy = np.stack([flow.state_actions for flow in flows])
        else:
            self._occupancy = np.zeros((0, game.length, game.n_states, game.n_actions))

    def __len__(self) -> int:
        return len(self._policies)

    def __iter__(self) -> Iterator[DeterministicPolicy]:
        return iter(self._policies)

    def __getitem__(self, i: int) -> DeterministicPolicy:
        return self._policies[i]

    def __contains__(self, policy: object) -> bool:
        return policy in self._index

    def index(self, policy: DeterministicPolicy) -> int:
        """
        Position of a policy in the set.

        :param policy: the policy to look up
        :raises KeyError: if the policy is not part of the set
        :return: its index
        """
        try:
            return self._index[policy]
        except KeyError:
            raise KeyError(f"{policy} is not part of the policy set.") from None

    def flow(self, i: int) -> PopulationFlow:
        """Cached flow of policy i."""
        return self._flows[i]

    @property
    def occupancy(self) -> np.ndarray:
        """Own state-action occupancies of all policies, shape (n, S, n_states, n_actions)."""
        return self._occupancy

    def extend(self, policies: Sequence[DeterministicPolicy]) -> "PolicySet":
        """Return the union of this set with ``policies``; policies already present are skipped."""
        fresh: List[DeterministicPolicy] = []
        for policy in policies:
            if policy not in self._index and policy not in fresh:
                fresh.append(policy)
        return PolicySet(self.game, self._policies + tuple(fresh), _flows=self._flows)

    def to_list(self) -> list:
        """Action tables of all policies."""
        return [policy.to_list() for policy in self._policies]

    @classmethod
    def from_list(cls, game: MeanFieldGame, tables: Sequence) -> "PolicySet":
        """Rebuild a set from action tables."""
        return cls(game, [DeterministicPolicy(table) for table in tables])


def as_mixture(nu: Union[Sequence[float], np.ndarray], size: int, tol: float = constants.ARITHMETIC_TOL) -> np.ndarray:
    """
    Validate a mixed policy over a policy set of ``size`` policies.

    :param nu: the weights
    :param size: number of policies in the set
    :param tol: tolerance for the distribution check
    :raises KeyError: if the weights reference policies outside the set
    :return: the weights as an array
    """
    weights = check_distribution(nu, tol)
    if weights.size != size:
        raise KeyError(f"Mixed policy has {weights.size} weights but the policy set holds {size} policies.")
    return np.clip(weights, 0.0, None)


def mixture_flow(policy_set: PolicySet, nu: Union[Sequence[float], np.ndarray]) -> PopulationFlow:
    """
    Flow mu(nu) of a population whose agents sample their policy from nu.

    :param policy_set: the policy set nu is defined over
    :param nu: the mixed policy
    :return: the nu-weighted combination of the cached flows
    """
    weights = as_mixture(nu, len(policy_set))
    return PopulationFlow.mix([policy_set.flow(i) for i in range(len(policy_set))], weights)


def policy_payoffs(policy_set: PolicySet, mu: PopulationFlow) -> np.ndarray:
    """Vector (J(pi_i, mu))_i for every policy of the set."""
    game = policy_set.game
    return evaluate_occupancy(game, policy_set.occupancy, game.reward_tables(mu))


def mixed_payoff(
    game: MeanFieldGame, policy_set: PolicySet, nu: Union[Sequence[float], np.ndarray], mu: PopulationFlow
) -> float:
    """
    Payoff J(pi(nu), mu) = sum_i nu_i J(pi_i, mu).

    :param game: the game
    :param policy_set: the set nu is defined over
    :param nu: the mixed policy
    :param mu: the environment flow
    :return: the payoff
    """
    weights = as_mixture(nu, len(policy_set))
    return float(weights @ policy_payoffs(policy_set, mu))


@dataclass(frozen=True)
class NoiseModel:
    """Additive i.i.d. payoff noise: ``gaussian`` with deviation ``scale``, or ``uniform`` on [-scale, scale]."""

    kind: str = "gaussian"
    scale: float = 0.0

    def __post_init__(self):
        """Validate the noise model."""
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"Unknown noise kind {self.kind}. Use 'gaussian' or 'uniform'.")
        if self.scale < 0:
            raise ValueError(f"Noise scale must be non-negative. Given: {self.scale}.")

    def mean_noise(self, samples: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """
        Mean of ``samples`` independent noise draws, per entry.

        The Gaussian mean is drawn directly from N(0, scale**2 / samples), which has the same law.

        :param samples: number of averaged draws M
        :param rng: random generator
        :param size: number of independent entries (None for a scalar)
        :raises ValueError: if samples is not positive
        :return: the averaged noise
        """
        if samples <= 0:
            raise ValueError(f"The number of payoff samples must be positive. Given: {samples}.")
        shape = () if size is None else (size,)
        if self.scale == 0.0:
            return np.zeros(shape)
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale / np.sqrt(samples), size=shape)
        return rng.uniform(-self.scale, self.scale, size=(samples,) + shape).mean(axis=0)


def noisy_payoff(
    game: MeanFieldGame,
    policy: DeterministicPolicy,
    mu: PopulationFlow,
    noise: NoiseModel,
    samples: int,
    rng: np.random.Generator,
) -> float:
    """
    Payoff observed through ``samples`` noisy evaluations.

    :param game: the game
    :param policy: the evaluated policy
    :param mu: the environment flow
    :param noise: the additive noise model
    :param samples: number of averaged evaluations M
    :param rng: random generator
    :return: payoff plus the mean of M noise draws
    """
    perturbation = noise.mean_noise(samples, rng)
    return payoff(game, policy, mu) + float(perturbation)


def noisy_policy_payoffs(
    policy_set: PolicySet, mu: PopulationFlow, noise: NoiseModel, samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Noisy version of :func:`policy_payoffs`, with independent noise per policy."""
    return policy_payoffs(policy_set, mu) + noise.mean_noise(samples, rng, size=len(policy_set))


def constant_policies(game: MeanFieldGame) -> List[DeterministicPolicy]:
    """One "always play action a" policy per action, in action order."""
    return [DeterministicPolicy(np.full(game.policy_shape, action)) for action in range(game.n_actions)]


def uniform_behaviour(game: MeanFieldGame) -> np.ndarray:
    """Uniformly random behavioural policy of shape (S, n_states, n_actions)."""
    return np.full((game.length, game.n_states, game.n_actions), 1.0 / game.n_actions)
