import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, NamedTuple, Optional

import numpy as np
from scipy.special import softmax

from .best_response import best_response
from .game import MeanFieldGame, PolicySet, behaviour_flow, mixture_flow
from .metrics.gaps import behaviour_exploitability, exploitability
from .metrics.metric import GapCurve
from .psro import initial_policy

logger = logging.getLogger(__name__)


class CurvePoint(NamedTuple):
    """Exploitability after one baseline iteration."""

    iteration: int
    wall_time_s: float
    exploitability: float


@dataclass
class BaselineRun:
    """Exploitability curve of a fictitious-play or mirror-descent run."""

    algorithm: str
    iterations: int
    learning_rate: Optional[float] = None
    curve: List[CurvePoint] = field(default_factory=list)

    @property
    def label(self) -> str:
        """Algorithm label used in curve files, e.g. ``omd(0.1)``."""
        if self.learning_rate is None:
            return self.algorithm
        return f"{self.algorithm}({self.learning_rate:g})"

    @property
    def final_exploitability(self) -> float:
        """Exploitability after the last iteration."""
        return self.curve[-1].exploitability

    def to_curve(self, seed: Optional[int] = None) -> GapCurve:
        """Convert to the shared gap-curve table."""
        curve = GapCurve(self.label, seed)
        for point in self.curve:
            curve.add(point.iteration, point.wall_time_s, point.exploitability)
        return curve

    def to_dict(self, include_wall_time: bool = False) -> Dict[str, Any]:
        """Serialise the run; wall times are only written on request."""
        points = [point._asdict() for point in self.curve]
        if not include_wall_time:
            for point in points:
                point.pop("wall_time_s")
        return {
            "algorithm": self.algorithm,
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "curve": points,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BaselineRun":
        """Rebuild a run written by :meth:`to_dict`."""
        curve = [
            CurvePoint(int(point["iteration"]), float(point.get("wall_time_s", 0.0)), float(point["exploitability"]))
            for point in data["curve"]
        ]
        return cls(data["algorithm"], int(data["iterations"]), data.get("learning_rate"), curve)


def fictitious_play(game: MeanFieldGame, iterations: int) -> BaselineRun:
    """
    Flow-averaging fictitious play.

    The average flow starts at the flow of the all-lowest-action policy. Step k adds the flow of
    BR(average) with weight 1 / (k + 1), which equals mixing uniformly over the best-response history.

    :param game: the game
    :param iterations: number of best-response steps
    :raises ValueError: if iterations is not positive
    :return: the exploitability of the averaged policy after every step
    """
    if iterations < 1:
        raise ValueError(f"Fictitious play needs at least one iteration. Given: {iterations}.")
    policy_set = PolicySet(game, [initial_policy(game)])
    counts = np.ones(1)
    run = BaselineRun("fp", iterations)
    start = time.perf_counter()

    for iteration in range(1, iterations + 1):
        average = mixture_flow(policy_set, counts / counts.sum())
        response = best_response(game, average).policy
        if response not in policy_set:
            policy_set = policy_set.extend([response])
            counts = np.append(counts, 0.0)
        counts[policy_set.index(response)] += 1.0
        gap = exploitability(game, policy_set, counts / counts.sum()).value
        run.curve.append(CurvePoint(iteration, round(time.perf_counter() - start, 3), gap))
        logger.debug(f"FP iteration {iteration}: exploitability {gap:.3e} over {len(policy_set)} policies")

    logger.info(f"Fictitious play finished with exploitability {run.final_exploitability:.3e}")
    return run


def policy_q_values(game: MeanFieldGame, probabilities: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    """
    State-action values of a behavioural policy for fixed reward tables.

    :param game: the game
    :param probabilities: (S, n_states, n_actions) for finite horizons, (n_states, n_actions) when discounted
    :param rewards: reward tables of shape (S, n_states, n_actions)
    :return: Q-values with the shape of ``probabilities``
    """
    if game.discounted:
        gamma = game.horizon.gamma
        reward = rewards[0]
        transition = np.zeros((game.n_states, game.n_states))
        origins = np.repeat(np.arange(game.n_states), game.n_actions)
        np.add.at(transition, (origins, game.transitions.ravel()), probabilities.ravel())
        values = np.linalg.solve(np.eye(game.n_states) - gamma * transition, (probabilities * reward).sum(axis=1))
        return reward + gamma * values[game.transitions]

    q_values = np.zeros_like(rewards)
    values = np.zeros(game.n_states)
    for step in reversed(range(game.length)):
        q_values[step] = rewards[step] + values[game.transitions]
        values = (probabilities[step] * q_values[step]).sum(axis=1)
    return q_values


def online_mirror_descent(game: MeanFieldGame, iterations: int, learning_rate: float) -> BaselineRun:
    """
    Online mirror descent with the entropy regulariser.

    The policy is the per-state softmax of learning_rate times the cumulative Q-values of past policies,
    each evaluated against its own induced flow.

    :param game: the game
    :param iterations: number of updates
    :param learning_rate: step size
    :raises ValueError: if iterations or learning_rate are not positive
    :return: the exploitability of the current policy after every update
    """
    if iterations < 1:
        raise ValueError(f"Mirror descent needs at least one iteration. Given: {iterations}.")
    if not learning_rate > 0:
        raise ValueError(f"The mirror descent learning rate must be positive. Given: {learning_rate}.")
    shape = (game.n_states, game.n_actions) if game.discounted else (game.length, game.n_states, game.n_actions)
    cumulative = np.zeros(shape)
    run = BaselineRun("omd", iterations, learning_rate)
    start = time.perf_counter()

    for iteration in range(1, iterations + 1):
        probabilities = softmax(learning_rate * cumulative, axis=-1)
        mu = behaviour_flow(game, probabilities)
        cumulative += policy_q_values(game, probabilities, game.reward_tables(mu))
        updated = softmax(learning_rate * cumulative, axis=-1)
        gap = behaviour_exploitability(game, updated).value
        run.curve.append(CurvePoint(iteration, round(time.perf_counter() - start, 3), gap))
        logger.debug(f"OMD({learning_rate:g}) iteration {iteration}: exploitability {gap:.3e}")

    logger.info(f"Mirror descent with rate {learning_rate:g} ended at exploitability {run.final_exploitability:.3e}")
    return run
