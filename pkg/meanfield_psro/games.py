import inspect
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from . import constants
from .constants import ConfigurationError
from .game import Discounted, FiniteHorizon, FlowSlice, MeanFieldGame, NoiseModel

logger = logging.getLogger(__name__)


def _one_shot(
    name: str, reward: Callable[[np.ndarray], np.ndarray], reward_range: float, **parameters
) -> MeanFieldGame:
    """Wrap a reward on the population action marginal into a single-state, single-step game."""
    return MeanFieldGame(
        name=name,
        n_states=1,
        n_actions=len(constants.RPS_ACTIONS),
        reward=lambda flow_slice: reward(flow_slice.actions)[np.newaxis, :],
        transitions=np.zeros((1, len(constants.RPS_ACTIONS)), dtype=np.int64),
        mu0=np.ones(1),
        horizon=FiniteHorizon(1),
        reward_range=reward_range,
        action_names=constants.RPS_ACTIONS,
        parameters=parameters,
    )


def _biased_rps_reward(actions: np.ndarray) -> np.ndarray:
    a, b, c = actions
    return np.array([0.5 * b - 0.3 * c, 0.3 * c - 0.7 * a, 0.7 * a - 0.5 * b])


def biased_rps() -> MeanFieldGame:
    """
    Mean-field biased rock-paper-scissors.

    r(A, mu) = 0.5 mu(B) - 0.3 mu(C), r(B, mu) = 0.3 mu(C) - 0.7 mu(A), r(C, mu) = 0.7 mu(A) - 0.5 mu(B).
    The unique Nash mixture is (15, 21, 35) / 71.

    :return: the one-shot game
    """
    return _one_shot("biased_rps", _biased_rps_reward, reward_range=0.7)


def _coop_betray_punish_reward(actions: np.ndarray) -> np.ndarray:
    a, b, c = actions
    return np.array(
        [
            a - 20.0 / 9.0 * (a - c) * c - 2.0 * b,
            2.0 * (a - b) - 238.0 * c,
            200.0 / 9.0 * (a - c) * c,
        ]
    )


def coop_betray_punish() -> MeanFieldGame:
    """
    Cooperate / betray / punish game with rewards quadratic in the population distribution.

    :return: the one-shot game
    """
    return _one_shot("coop_betray_punish", _coop_betray_punish_reward, reward_range=240.0)


def matrix_game(payoffs: Sequence[Sequence[float]], name: str = "matrix") -> MeanFieldGame:
    """
    One-shot game whose reward is linear in the action marginal, r(a, mu) = (M mu)_a.

    :param payoffs: square matrix M, row a holds the reward of action a against each population action
    :param name: name of the game
    :raises ValueError: if the matrix is not square or not finite
    :return: the one-shot game
    """
    matrix = np.array(payoffs, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.size == 0:
        raise ValueError(f"Matrix games need a non-empty square payoff matrix. Given shape: {matrix.shape}.")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix game payoffs must be finite.")
    matrix.setflags(write=False)
    n_actions = matrix.shape[0]
    return MeanFieldGame(
        name=name,
        n_states=1,
        n_actions=n_actions,
        reward=lambda flow_slice: (matrix @ flow_slice.actions)[np.newaxis, :],
        transitions=np.zeros((1, n_actions), dtype=np.int64),
        mu0=np.ones(1),
        horizon=FiniteHorizon(1),
        reward_range=max(float(np.abs(matrix).max()), 1e-12),
        action_names=tuple(str(a) for a in range(n_actions)),
        parameters={"payoffs": matrix.tolist()},
    )


def crowd_chain(
    n_positions: int = 5,
    horizon: int = 10,
    aversion: float = 1.0,
    move_cost: float = constants.CROWD_MOVE_COST,
    gamma: Optional[float] = None,
) -> MeanFieldGame:
    """
    Congestion game on a line: agents start at position 0 and dislike crowded positions.

    Actions are left, stay and right with clamped moves. The reward is
    r(x, a, mu) = -aversion * mu(x) - move_cost * 1[a != stay].

    :param n_positions: number of positions L on the line
    :param horizon: number of steps S; ignored when ``gamma`` is given
    :param aversion: crowd aversion coefficient
    :param move_cost: cost of moving
    :param gamma: discount factor; switches the game to discounted mode with default truncation
    :raises ValueError: for invalid sizes or coefficients
    :return: the crowd game
    """
    if n_positions < 2:
        raise ValueError(f"The crowd chain needs at least 2 positions. Given: {n_positions}.")
    if horizon < 1:
        raise ValueError(f"The crowd chain needs a horizon of at least 1. Given: {horizon}.")
    if not aversion > 0:
        raise ValueError(f"Crowd aversion must be positive. Given: {aversion}.")
    if move_cost < 0:
        raise ValueError(f"The movement cost must be non-negative. Given: {move_cost}.")

    positions = np.arange(n_positions)
    moves = np.array([-1, 0, 1])
    transitions = np.clip(positions[:, np.newaxis] + moves[np.newaxis, :], 0, n_positions - 1)
    costs = np.where(moves == 0, 0.0, move_cost)

    def reward(flow_slice: FlowSlice) -> np.ndarray:
        return -aversion * flow_slice.states[:, np.newaxis] - costs[np.newaxis, :]

    mu0 = np.zeros(n_positions)
    mu0[0] = 1.0
    return MeanFieldGame(
        name="crowd_chain",
        n_states=n_positions,
        n_actions=len(constants.CROWD_ACTIONS),
        reward=reward,
        transitions=transitions,
        mu0=mu0,
        horizon=FiniteHorizon(horizon) if gamma is None else Discounted(gamma),
        reward_range=aversion + move_cost,
        action_names=constants.CROWD_ACTIONS,
        parameters={
            "n_positions": n_positions,
            "horizon": horizon,
            "aversion": aversion,
            "move_cost": move_cost,
            "gamma": gamma,
        },
    )


GAME_REGISTRY: Dict[str, Callable[..., MeanFieldGame]] = {
    "biased_rps": biased_rps,
    "coop_betray_punish": coop_betray_punish,
    "crowd_chain": crowd_chain,
    "matrix": matrix_game,
}

# short names accepted in configuration files
PARAMETER_ALIASES = {"L": "n_positions", "S": "horizon"}


@dataclass(frozen=True)
class GameSpec:
    """Declarative description of a registered game, as found in experiment configuration files."""

    name: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    noise: Optional[NoiseModel] = None
    samples: int = 1

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "GameSpec":
        """
        Build a GameSpec from a configuration mapping.

        Parameters may be nested under ``parameters`` or given next to ``name``.

        :param config: the mapping
        :raises ConfigurationError: if the mapping has no name or a malformed noise section
        :return: the GameSpec
        """
        if not isinstance(config, Mapping) or "name" not in config:
            raise ConfigurationError(f"A game section needs a 'name'. Given: {config!r}.")
        parameters = dict(config.get("parameters") or {})
        parameters.update({k: v for k, v in config.items() if k not in ("name", "parameters", "noise", "samples")})
        parameters = {PARAMETER_ALIASES.get(k, k): v for k, v in parameters.items()}
        noise = None
        samples = int(config.get("samples", 1))
        if config.get("noise"):
            noise_config = dict(config["noise"])
            samples = int(noise_config.pop("samples", samples))
            try:
                noise = NoiseModel(**noise_config)
            except (TypeError, ValueError) as error:
                raise ConfigurationError(f"Invalid noise section {config['noise']!r}: {error}") from error
        if samples < 1:
            raise ConfigurationError(f"The number of payoff samples must be positive. Given: {samples}.")
        return cls(name=str(config["name"]), parameters=parameters, noise=noise, samples=samples)

    def to_dict(self) -> Dict[str, Any]:
        """Serialise the spec."""
        result: Dict[str, Any] = {"name": self.name, "parameters": dict(self.parameters)}
        if self.noise is not None:
            result["noise"] = {"kind": self.noise.kind, "scale": self.noise.scale, "samples": self.samples}
        return result


def load_game(spec: GameSpec) -> MeanFieldGame:
    """
    Construct a registered game.

    :param spec: the game description
    :raises ConfigurationError: for unknown games, unknown parameters or invalid parameter values
    :return: the constructed game
    """
    try:
        constructor = GAME_REGISTRY[spec.name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown game {spec.name!r}. Registered games: {', '.join(sorted(GAME_REGISTRY))}."
        ) from None

    accepted = inspect.signature(constructor).parameters
    unknown = sorted(set(spec.parameters) - set(accepted))
    if unknown:
        raise ConfigurationError(f"Game {spec.name!r} does not accept parameters {unknown}.")
    try:
        game = constructor(**spec.parameters)
    except (TypeError, ValueError) as error:
        raise ConfigurationError(f"Invalid parameters for game {spec.name!r}: {error}") from error
    logger.debug(f"Loaded game {game.name} with {game.n_states} states, {game.n_actions} actions, S={game.length}")
    return game
