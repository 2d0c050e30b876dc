import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .. import constants
from ..game import MeanFieldGame, NoiseModel, PolicySet, mixture_flow, noisy_policy_payoffs, policy_payoffs
from .compression import RegretTrace, compress_ce, compress_cce
from .device import CorrelationDevice
from .learners import make_learner
from .minimax import MinimaxSolution

logger = logging.getLogger(__name__)


class CompressionRecord(NamedTuple):
    """Regret of the uniform average and of the compressed device at one compression step."""

    step: int
    uniform_gap: float
    compressed_gap: float
    sparsity: int


@dataclass
class RegretLoopResult:
    """Outcome of a regret loop; ``solution`` is the best compression found, if any ran."""

    device: CorrelationDevice
    trace: RegretTrace
    solution: Optional[MinimaxSolution]
    steps: int
    reached_target: bool
    history: List[CompressionRecord] = field(default_factory=list)


def run_regret_loop(
    game: MeanFieldGame,
    policy_set: PolicySet,
    learner: str = "external",
    t_max: int = constants.REGRET_T_MAX,
    target_regret: float = 0.0,
    noise: Optional[NoiseModel] = None,
    samples: int = 1,
    compress_every: Optional[int] = None,
    algorithm: str = "regret_matching",
    rng: Optional[np.random.Generator] = None,
) -> RegretLoopResult:
    """
    Approximate a restricted (coarse) correlated equilibrium by no-regret self-play.

    At step t the learner plays nu_t and observes J(pi_i, mu(nu_t)) for every policy of the set. The
    payoffs are divided by the game's reward range before the learner sees them; traces and reported
    regrets stay unscaled. Every ``compress_every`` steps the trace is compressed, and the loop stops
    once the compressed regret is at most ``target_regret``.

    :param game: the game
    :param policy_set: the restricted policy set
    :param learner: ``external`` for CCE or ``internal`` for CE
    :param t_max: maximal number of steps
    :param target_regret: stopping threshold on the compressed regret
    :param noise: payoff noise model, exact payoffs if omitted
    :param samples: number of noisy evaluations averaged per payoff
    :param compress_every: compression period, 1 for CCE and 10 for CE by default
    :param algorithm: external learner, ``regret_matching`` or ``hedge``
    :param rng: seeded random generator for the payoff noise, required together with ``noise``
    :raises ValueError: for an empty set, a non-positive t_max, or noise without a generator
    :return: the best device found and the trace
    """
    n = len(policy_set)
    if n == 0:
        raise ValueError("The regret loop needs a non-empty policy set.")
    if t_max < 1:
        raise ValueError(f"The regret loop needs t_max >= 1. Given: {t_max}.")
    if compress_every is None:
        compress_every = constants.CCE_COMPRESS_EVERY if learner == "external" else constants.CE_COMPRESS_EVERY
    if compress_every < 1:
        raise ValueError(f"The compression period must be positive. Given: {compress_every}.")
    compress = compress_cce if learner == "external" else compress_ce
    if noise is not None and rng is None:
        raise ValueError("A noisy regret loop needs an explicitly seeded random generator.")

    player = make_learner(learner, n, t_max, algorithm)
    trace = RegretTrace(n)
    history: List[CompressionRecord] = []
    best_solution: Optional[MinimaxSolution] = None
    best_device: Optional[CorrelationDevice] = None
    reached = False

    step = 0
    for step in range(1, t_max + 1):
        nu = player.mixture()
        mu = mixture_flow(policy_set, nu)
        if noise is None:
            payoffs = policy_payoffs(policy_set, mu)
        else:
            payoffs = noisy_policy_payoffs(policy_set, mu, noise, samples, rng)
        trace.append(nu, payoffs)
        player.observe(payoffs / game.reward_range)

        if step % compress_every and n > 1:
            continue
        solution = compress(trace)
        regrets = trace.external if learner == "external" else trace.internal.reshape(step, -1)
        record = CompressionRecord(
            step=step,
            uniform_gap=float(regrets.mean(axis=0).max()),
            compressed_gap=solution.value,
            sparsity=int(np.count_nonzero(solution.rho > constants.DEVICE_ATOM_CUTOFF)),
        )
        history.append(record)
        logger.debug(
            f"Step {step}: uniform regret {record.uniform_gap:.3e}, compressed {record.compressed_gap:.3e} "
            f"on {record.sparsity} atoms"
        )
        if best_solution is None or solution.value < best_solution.value:
            best_solution = solution
            best_device = CorrelationDevice.from_weights(solution.rho, trace.iterates)
        if solution.value <= target_regret:
            reached = True
            break

    if best_device is None:
        best_device = CorrelationDevice.uniform(trace.iterates)
    if not reached:
        logger.info(f"Regret loop used all {t_max} steps without reaching target regret {target_regret:.3e}")
    return RegretLoopResult(
        device=best_device,
        trace=trace,
        solution=best_solution,
        steps=step,
        reached_target=reached,
        history=history,
    )
