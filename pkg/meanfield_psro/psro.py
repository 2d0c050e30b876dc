import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from . import constants
from .best_response import br_ce
from .constants import ConfigurationError, GapKind
from .game import DeterministicPolicy, MeanFieldGame, NoiseModel, PolicySet
from .metrics.gaps import ce_gap, cce_gap, exploitability, restricted_ce_gap
from .metrics.metric import GapReport
from .metrics.structure import meta_game_matrix, symmetric_nash_of_meta_game
from .nash_blackbox import SimplexSearchConfig, solve_restricted_nash, warm_start_mixture
from .regret.device import CorrelationDevice
from .regret.protocol import run_regret_loop

logger = logging.getLogger(__name__)

NASH_SOLVERS = ("blackbox", "meta_game")


@dataclass(frozen=True)
class PsroConfig:
    """
    Settings of a mean-field PSRO run.

    ``rho_tol`` is the regret target of the inner loop; it is halved whenever an iteration adds no policy,
    down to ``rho_lim``. Every halving can cost a full regret loop of ``t_max`` steps, so a run needs up to
    log2(rho_tol / rho_lim) extra iterations; the default ``rho_lim`` of 1e-6 keeps that at 14 loops.
    A correlated run only reports ``terminated`` once the true gap is at most ``rho_lim``.
    ``tau_compress`` defaults to 1 for CCE and 10 for CE.
    """

    mode: GapKind = GapKind.NASH
    rho_tol: float = constants.RHO_TOL
    rho_lim: float = constants.RHO_LIM
    tau_compress: Optional[int] = None
    max_iterations: int = constants.PSRO_MAX_ITERATIONS
    t_max: int = constants.REGRET_T_MAX
    learner: str = "regret_matching"
    noise: Optional[NoiseModel] = None
    samples: int = 1
    seed: int = 0
    search: SimplexSearchConfig = field(default_factory=SimplexSearchConfig)
    nash_solver: str = "blackbox"

    def __post_init__(self):
        """Validate the settings."""
        try:
            object.__setattr__(self, "mode", GapKind(self.mode))
        except ValueError:
            raise ConfigurationError(f"Unknown PSRO mode {self.mode!r}. Use nash, cce or ce.") from None
        if not 0 < self.rho_lim <= self.rho_tol:
            raise ConfigurationError(f"Need 0 < rho_lim <= rho_tol. Given: {self.rho_lim}, {self.rho_tol}.")
        if self.tau_compress is not None and self.tau_compress < 1:
            raise ConfigurationError(f"tau_compress must be at least 1. Given: {self.tau_compress}.")
        if self.max_iterations < 0:
            raise ConfigurationError(f"max_iterations must be non-negative. Given: {self.max_iterations}.")
        if self.t_max < 1:
            raise ConfigurationError(f"t_max must be at least 1. Given: {self.t_max}.")
        if self.samples < 1:
            raise ConfigurationError(f"The number of payoff samples must be positive. Given: {self.samples}.")
        if self.nash_solver not in NASH_SOLVERS:
            raise ConfigurationError(f"Unknown restricted Nash solver {self.nash_solver!r}. Use one of {NASH_SOLVERS}.")

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "PsroConfig":
        """
        Build the settings from a configuration mapping.

        :param config: the mapping; ``search`` and ``noise`` may be nested mappings
        :raises ConfigurationError: for unknown keys or invalid values
        :return: the PsroConfig
        """
        settings = dict(config)
        unknown = sorted(set(settings) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigurationError(f"Unknown PSRO settings {unknown}.")
        if isinstance(settings.get("search"), Mapping):
            settings["search"] = SimplexSearchConfig.from_dict(settings["search"])
        if isinstance(settings.get("noise"), Mapping):
            noise = dict(settings["noise"])
            settings.setdefault("samples", noise.pop("samples", 1))
            try:
                settings["noise"] = NoiseModel(**noise)
            except (TypeError, ValueError) as error:
                raise ConfigurationError(f"Invalid noise settings {config['noise']!r}: {error}") from error
        try:
            return cls(**settings)
        except TypeError as error:
            raise ConfigurationError(f"Invalid PSRO settings: {error}") from error

    def to_dict(self) -> Dict[str, Any]:
        """Serialise the settings."""
        return {
            "mode": self.mode.value,
            "rho_tol": self.rho_tol,
            "rho_lim": self.rho_lim,
            "tau_compress": self.tau_compress,
            "max_iterations": self.max_iterations,
            "t_max": self.t_max,
            "learner": self.learner,
            "noise": None if self.noise is None else {"kind": self.noise.kind, "scale": self.noise.scale},
            "samples": self.samples,
            "seed": self.seed,
            "search": {
                "population_size": self.search.population_size,
                "elite_fraction": self.search.elite_fraction,
                "iterations": self.search.iterations,
                "tolerance": self.search.tolerance,
                "warm_start": self.search.warm_start,
                "seed": self.search.seed,
            },
            "nash_solver": self.nash_solver,
        }


class PsroLogEntry(NamedTuple):
    """One outer iteration: true-game gap of the current equilibrium, inner solver steps, elapsed time."""

    iteration: int
    gap: float
    inner_steps: int
    wall_time_s: float
    added: bool


@dataclass
class PsroResult:
    """Final policy set, equilibrium device over it and the per-iteration log."""

    mode: GapKind
    policy_set: PolicySet
    equilibrium: CorrelationDevice
    log: List[PsroLogEntry]
    terminated: bool
    final_rho_tol: float
    final_gap: Optional[GapReport] = None

    @property
    def iterations(self) -> int:
        """Number of outer iterations executed."""
        return len(self.log)

    def to_dict(self, include_wall_time: bool = False) -> Dict[str, Any]:
        """
        Serialise the result.

        :param include_wall_time: whether to write wall times, which make the output machine dependent
        :return: JSON-compatible mapping
        """
        entries = []
        for entry in self.log:
            row = entry._asdict()
            if not include_wall_time:
                row.pop("wall_time_s")
            entries.append(row)
        return {
            "mode": self.mode.value,
            "terminated": self.terminated,
            "final_rho_tol": self.final_rho_tol,
            "policy_set": self.policy_set.to_list(),
            "equilibrium": self.equilibrium.to_dict(),
            "final_gap": None if self.final_gap is None else self.final_gap.to_dict(),
            "log": entries,
        }

    @classmethod
    def from_dict(cls, game: MeanFieldGame, data: Mapping[str, Any]) -> "PsroResult":
        """Rebuild a result written by :meth:`to_dict`; missing wall times read as 0."""
        log = [
            PsroLogEntry(
                iteration=int(row["iteration"]),
                gap=float(row["gap"]),
                inner_steps=int(row["inner_steps"]),
                wall_time_s=float(row.get("wall_time_s", 0.0)),
                added=bool(row["added"]),
            )
            for row in data["log"]
        ]
        final_gap = data.get("final_gap")
        return cls(
            mode=GapKind(data["mode"]),
            policy_set=PolicySet.from_list(game, data["policy_set"]),
            equilibrium=CorrelationDevice.from_dict(data["equilibrium"]),
            log=log,
            terminated=bool(data["terminated"]),
            final_rho_tol=float(data["final_rho_tol"]),
            final_gap=None if final_gap is None else GapReport.from_dict(final_gap),
        )


def initial_policy(game: MeanFieldGame) -> DeterministicPolicy:
    """Policy playing the lowest action index everywhere."""
    return DeterministicPolicy(np.zeros(game.policy_shape, dtype=np.int64))


def _elapsed(start: float) -> float:
    return round(time.perf_counter() - start, 3)


def _restricted_nash(
    game: MeanFieldGame, policy_set: PolicySet, config: PsroConfig, previous: np.ndarray, seed: int
) -> Tuple[np.ndarray, int]:
    if config.nash_solver == "meta_game":
        search = replace(config.search, seed=seed)
        return symmetric_nash_of_meta_game(meta_game_matrix(game, policy_set), config=search), 1
    warm_start = warm_start_mixture(previous, len(policy_set)) if config.search.warm_start else None
    search = replace(config.search, seed=seed if config.search.seed is None else config.search.seed)
    result = solve_restricted_nash(game, policy_set, search, warm_start=warm_start)
    return result.nu, len(result.history)


def run_psro_nash(game: MeanFieldGame, config: PsroConfig) -> PsroResult:
    """
    Mean-field PSRO for Nash equilibria.

    Each iteration solves the restricted game, then adds the best response to the restricted equilibrium's
    flow. The loop stops once that best response is already in the set, or its gain is at most rho_lim.

    :param game: the game
    :param config: the PSRO settings
    :return: the final set, the equilibrium as a single-atom device and the iteration log
    """
    rng = np.random.default_rng(config.seed)
    policy_set = PolicySet(game, [initial_policy(game)])
    nu = np.ones(1)
    log: List[PsroLogEntry] = []
    report: Optional[GapReport] = None
    terminated = False
    start = time.perf_counter()

    for iteration in range(1, config.max_iterations + 1):
        nu, inner_steps = _restricted_nash(game, policy_set, config, nu, int(rng.integers(2**31)))
        report = exploitability(game, policy_set, nu)
        added = report.witness not in policy_set
        log.append(PsroLogEntry(iteration, report.value, inner_steps, _elapsed(start), added))
        logger.info(f"PSRO(nash) iteration {iteration}: |set|={len(policy_set)}, exploitability {report.value:.3e}")
        if not added or report.value <= config.rho_lim:
            terminated = True
            break
        policy_set = policy_set.extend([report.witness])

    if not terminated:
        logger.info(f"PSRO(nash) stopped after {config.max_iterations} iterations without terminating")
    device = CorrelationDevice.singleton(nu).pad(len(policy_set))
    return PsroResult(config.mode, policy_set, device, log, terminated, config.rho_tol, report)


def _correlated_responses(
    game: MeanFieldGame, policy_set: PolicySet, device: CorrelationDevice, report: GapReport
) -> List[DeterministicPolicy]:
    if report.kind is GapKind.CCE:
        return [report.witness]
    return [br_ce(game, policy_set, device, int(k)).policy for k in device.recommended()]


def _run_psro_correlated(game: MeanFieldGame, config: PsroConfig, kind: GapKind) -> PsroResult:
    learner = "external" if kind is GapKind.CCE else "internal"
    gap_of = cce_gap if kind is GapKind.CCE else ce_gap
    rng = np.random.default_rng(config.seed)
    policy_set = PolicySet(game, [initial_policy(game)])
    device = CorrelationDevice.singleton(np.ones(1))
    rho_tol = config.rho_tol
    target = rho_tol
    log: List[PsroLogEntry] = []
    report: Optional[GapReport] = None
    terminated = False
    start = time.perf_counter()

    for iteration in range(1, config.max_iterations + 1):
        loop = run_regret_loop(
            game,
            policy_set,
            learner=learner,
            t_max=config.t_max,
            target_regret=target,
            noise=config.noise,
            samples=config.samples,
            compress_every=config.tau_compress,
            algorithm=config.learner,
            rng=rng,
        )
        device = loop.device
        if not loop.reached_target:
            logger.info(f"Iteration {iteration}: regret loop ended above target {target:.3e}, keeping best device")
        report = gap_of(game, policy_set, device)
        responses = _correlated_responses(game, policy_set, device, report)
        grown = policy_set.extend(responses)
        added = len(grown) > len(policy_set)
        log.append(PsroLogEntry(iteration, report.value, loop.steps, _elapsed(start), added))
        logger.info(
            f"PSRO({kind.value}) iteration {iteration}: |set|={len(policy_set)}, gap {report.value:.3e}, "
            f"rho_tol {rho_tol:.3e}, {loop.steps} regret steps"
        )
        if added:
            policy_set = grown
            continue
        # no response leaves the set, so the true gap equals the restricted one
        if report.value <= config.rho_lim + constants.CERTIFICATE_TOL:
            terminated = True
            break
        if rho_tol > config.rho_lim:
            rho_tol = max(0.5 * rho_tol, config.rho_lim)
            target = rho_tol
            continue
        if not loop.reached_target:
            logger.warning(
                f"PSRO({kind.value}) stopped uncertified: gap {report.value:.3e} above rho_lim={config.rho_lim:.3e} "
                f"and the regret loop cannot go below {target:.3e} in {config.t_max} steps"
            )
            break
        # the CE gap conditions on each recommendation and can exceed the unnormalised compressed regret
        target *= 0.5

    if not terminated:
        logger.info(f"PSRO({kind.value}) stopped after {len(log)} iterations without terminating")
    return PsroResult(kind, policy_set, device.pad(len(policy_set)), log, terminated, rho_tol, report)


def run_psro_cce(game: MeanFieldGame, config: PsroConfig) -> PsroResult:
    """
    Sped-up mean-field PSRO for coarse correlated equilibria.

    The restricted CCE comes from an external-regret loop with compression. Iterations that add no
    coarse-correlated best response halve rho_tol until it reaches rho_lim.

    :param game: the game
    :param config: the PSRO settings
    :return: the final set, the compressed device and the iteration log
    """
    return _run_psro_correlated(game, config, GapKind.CCE)


def run_psro_ce(game: MeanFieldGame, config: PsroConfig) -> PsroResult:
    """
    Sped-up mean-field PSRO for correlated equilibria.

    Uses the swap-regret learner and adds one correlated best response per recommended policy.

    :param game: the game
    :param config: the PSRO settings
    :return: the final set, the compressed device and the iteration log
    """
    return _run_psro_correlated(game, config, GapKind.CE)


def run_psro(game: MeanFieldGame, config: PsroConfig) -> PsroResult:
    """Dispatch on ``config.mode``."""
    if config.mode is GapKind.NASH:
        return run_psro_nash(game, config)
    return _run_psro_correlated(game, config, config.mode)


def check_ce_termination(
    game: MeanFieldGame, policy_set: PolicySet, device: CorrelationDevice, tol: float = constants.CERTIFICATE_TOL
) -> bool:
    """
    Certify a CE termination point.

    When no correlated best response leaves the set, the true-game CE gap equals the restricted one.

    :param game: the game
    :param policy_set: the restricted set
    :param device: the device over the set
    :param tol: slack on the equality
    :return: False if some correlated best response is missing from the set, else whether the gaps agree
    """
    if any(br_ce(game, policy_set, device, int(k)).policy not in policy_set for k in device.recommended()):
        return False
    return ce_gap(game, policy_set, device).value <= restricted_ce_gap(policy_set, device) + tol
