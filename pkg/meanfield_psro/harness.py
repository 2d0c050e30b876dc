import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy
import yaml
from joblib import Parallel, delayed

from . import __version__, constants
from .baselines import BaselineRun, fictitious_play, online_mirror_descent
from .constants import ConfigurationError
from .game import PolicySet, constant_policies
from .games import GameSpec, load_game
from .metrics.metric import GapCurve
from .psro import PsroConfig, PsroResult, run_psro
from .regret.protocol import run_regret_loop

logger = logging.getLogger(__name__)

SOLVER_KINDS = ("psro", "fp", "omd")
RunResult = Union[PsroResult, BaselineRun]


class ConfigParseError(ConfigurationError):
    """Raised when a configuration file is not valid YAML or JSON; carries the 1-based position."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        """
        Initialize a ConfigParseError.

        :param message: description of the problem
        :param line: line of the problem, if known
        :param column: column of the problem, if known
        """
        location = "" if line is None else f" (line {line}, column {column})"
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a YAML (or JSON) experiment configuration.

    :param path: path to the file
    :raises ConfigParseError: if the file cannot be parsed or is not a mapping
    :return: the parsed mapping
    """
    try:
        with open(path, encoding="utf-8") as handle:
            config = yaml.safe_load(handle)
    except yaml.YAMLError as error:
        mark = getattr(error, "problem_mark", None)
        if mark is None:
            raise ConfigParseError(f"Cannot parse {path}: {error}") from error
        problem = getattr(error, "problem", None) or str(error)
        raise ConfigParseError(f"Cannot parse {path}: {problem}", mark.line + 1, mark.column + 1) from error
    if not isinstance(config, dict):
        raise ConfigParseError(f"Configuration {path} must contain a mapping at the top level.")
    return config


@dataclass(frozen=True)
class SolverSpec:
    """One solver of an experiment: ``psro`` with PsroConfig settings, ``fp`` or ``omd``."""

    kind: str
    settings: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Validate the solver kind and its settings."""
        if self.kind not in SOLVER_KINDS:
            raise ConfigurationError(f"Unknown solver {self.kind!r}. Use one of {SOLVER_KINDS}.")
        if self.kind == "psro":
            PsroConfig.from_dict(self.settings)
            return
        allowed = {"iterations"} if self.kind == "fp" else {"iterations", "learning_rate"}
        unknown = sorted(set(self.settings) - allowed)
        if unknown:
            raise ConfigurationError(f"Solver {self.kind!r} does not accept settings {unknown}.")

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "SolverSpec":
        """Build a solver from a mapping with a ``kind`` key; the other keys are its settings."""
        if not isinstance(config, Mapping) or "kind" not in config:
            raise ConfigurationError(f"A solver entry needs a 'kind'. Given: {config!r}.")
        return cls(str(config["kind"]), {k: v for k, v in config.items() if k != "kind"})

    def expand(self) -> List["SolverSpec"]:
        """Mirror descent without a learning rate expands into the default sweep."""
        if self.kind == "omd" and "learning_rate" not in self.settings:
            rates = constants.OMD_LEARNING_RATES
            return [SolverSpec("omd", {**self.settings, "learning_rate": rate}) for rate in rates]
        return [self]

    @property
    def label(self) -> str:
        """Algorithm label, e.g. ``psro(nash)`` or ``omd(0.1)``."""
        if self.kind == "psro":
            return f"psro({PsroConfig.from_dict(self.settings).mode.value})"
        if self.kind == "omd":
            return f"omd({float(self.settings['learning_rate']):g})"
        return self.kind

    def to_dict(self) -> Dict[str, Any]:
        """Serialise the solver entry."""
        return {"kind": self.kind, **self.settings}


@dataclass(frozen=True)
class RegretDemoConfig:
    """Regret loop settings of the compression demo."""

    learner: str = "external"
    t_max: int = 1000
    target_regret: Optional[float] = None
    algorithm: str = "regret_matching"

    def __post_init__(self):
        """Validate the settings."""
        if self.learner not in ("external", "internal"):
            raise ConfigurationError(f"Unknown regret learner {self.learner!r}. Use 'external' or 'internal'.")
        if self.t_max < 1:
            raise ConfigurationError(f"t_max must be at least 1. Given: {self.t_max}.")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Experiment description read from a configuration file.

    ``solvers`` holds the entries of ``solver`` (single run) or ``solvers`` (comparison).
    """

    game: GameSpec
    solvers: Tuple[SolverSpec, ...] = ()
    output_dir: str = "results"
    seed: int = 0
    repeats: int = 1
    regret: RegretDemoConfig = field(default_factory=RegretDemoConfig)
    raw: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        """Validate the experiment settings."""
        if self.repeats < 1:
            raise ConfigurationError(f"repeats must be at least 1. Given: {self.repeats}.")

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "ExperimentConfig":
        """
        Build an experiment from a parsed configuration file.

        :param config: the mapping
        :raises ConfigurationError: for missing sections, unknown keys or invalid values
        :return: the experiment
        """
        known = {"game", "solver", "solvers", "output_dir", "seed", "repeats", "regret"}
        unknown = sorted(set(config) - known)
        if unknown:
            raise ConfigurationError(f"Unknown configuration sections {unknown}. Known: {sorted(known)}.")
        if "game" not in config:
            raise ConfigurationError("The configuration needs a 'game' section.")
        if "solver" in config and "solvers" in config:
            raise ConfigurationError("Use either 'solver' or 'solvers', not both.")
        entries = config.get("solvers", [config["solver"]] if "solver" in config else [])
        if not isinstance(entries, list):
            raise ConfigurationError("'solvers' must be a list of solver entries.")
        regret = config.get("regret") or {}
        try:
            regret_config = RegretDemoConfig(**regret)
        except TypeError as error:
            raise ConfigurationError(f"Invalid regret section: {error}") from error
        return cls(
            game=GameSpec.from_dict(config["game"]),
            solvers=tuple(SolverSpec.from_dict(entry) for entry in entries),
            output_dir=str(config.get("output_dir", "results")),
            seed=int(config.get("seed", 0)),
            repeats=int(config.get("repeats", 1)),
            regret=regret_config,
            raw=dict(config),
        )

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None) -> "ExperimentConfig":
        """Apply command-line overrides, keeping the echoed configuration in sync."""
        raw = dict(self.raw)
        if seed is not None:
            raw["seed"] = seed
        if output_dir is not None:
            raw["output_dir"] = output_dir
        return replace(
            self,
            seed=self.seed if seed is None else seed,
            output_dir=self.output_dir if output_dir is None else output_dir,
            raw=raw,
        )

    @property
    def seeds(self) -> List[int]:
        """One seed per repeat, offset from the base seed."""
        return [self.seed + repeat for repeat in range(self.repeats)]

    def sha256(self) -> str:
        """Hash of the canonical JSON form of the configuration."""
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True, default=str).encode("utf-8")).hexdigest()


def write_atomic(path: Union[str, Path], writer: Callable[[str], None]) -> None:
    """
    Write a file through a temporary sibling and move it into place.

    :param path: destination
    :param writer: callable writing the content to the path it receives
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(handle)
    try:
        writer(temporary)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise


def write_json(path: Union[str, Path], data: Any) -> None:
    """Write JSON atomically with sorted keys."""

    def dump(target: str):
        with open(target, "w", encoding="utf-8") as handle:
            json.dump(data, handle, indent=2, sort_keys=True)
            handle.write("\n")

    write_atomic(path, dump)


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> None:
    """Write a CSV table atomically."""
    write_atomic(path, lambda target: frame.to_csv(target, index=False))


def versions() -> Dict[str, str]:
    """Versions of the package and its numerical dependencies."""
    return {
        "meanfield_psro": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def execute_solver(game_spec: GameSpec, solver: SolverSpec, seed: int) -> RunResult:
    """
    Run one solver on a freshly constructed game.

    Payoff noise configured on the game is passed to PSRO unless its own settings define noise.

    :param game_spec: the game
    :param solver: the solver
    :param seed: seed of the run
    :return: the PSRO result or baseline run
    """
    game = load_game(game_spec)
    if solver.kind == "psro":
        config = replace(PsroConfig.from_dict(solver.settings), seed=seed)
        if config.noise is None and game_spec.noise is not None:
            config = replace(config, noise=game_spec.noise, samples=game_spec.samples)
        return run_psro(game, config)
    iterations = int(solver.settings.get("iterations", 200))
    if solver.kind == "fp":
        return fictitious_play(game, iterations)
    return online_mirror_descent(game, iterations, float(solver.settings["learning_rate"]))


def curve_of(result: RunResult, label: str, seed: int) -> GapCurve:
    """Gap curve of a PSRO result or baseline run."""
    if isinstance(result, BaselineRun):
        return result.to_curve(seed)
    curve = GapCurve(label, seed)
    for entry in result.log:
        curve.add(entry.iteration, entry.wall_time_s, entry.gap)
    return curve


def load_result(game_spec: GameSpec, data: Mapping[str, Any]) -> RunResult:
    """Rebuild the result stored in a run.json document."""
    if data["solver"]["kind"] == "psro":
        return PsroResult.from_dict(load_game(game_spec), data["result"])
    return BaselineRun.from_dict(data["result"])


def _run_one(config: ExperimentConfig, solver: SolverSpec, seed: int) -> Dict[str, Any]:
    result = execute_solver(config.game, solver, seed)
    directory = Path(config.output_dir) / f"seed_{seed}"
    curve = curve_of(result, solver.label, seed)
    write_json(
        directory / "run.json",
        {"config": config.raw, "seed": seed, "solver": solver.to_dict(), "result": result.to_dict()},
    )
    write_atomic(directory / "curve.csv", curve.write_to_file)
    write_json(
        directory / "manifest.json",
        {
            "config_sha256": config.sha256(),
            "seed": seed,
            "versions": versions(),
            "files": ["run.json", "curve.csv"],
        },
    )
    logger.info(f"Run {solver.label} with seed {seed} written to {directory}")
    return {"algorithm": solver.label, "final_gap": curve.final_gap, "iterations": len(curve.metrics_val)}


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> List[Dict[str, Any]]:
    """
    Execute the single configured solver once per repeat and write run.json, curve.csv and manifest.json.

    :param config: the experiment
    :param jobs: number of repeats run in parallel
    :raises ConfigurationError: if the configuration does not name exactly one solver
    :return: one summary row per repeat
    """
    if len(config.solvers) != 1:
        raise ConfigurationError(f"'run' needs exactly one solver. Given: {len(config.solvers)}.")
    solvers = config.solvers[0].expand()
    if len(solvers) != 1:
        raise ConfigurationError("'run' needs a single learning rate for omd; use 'compare' for sweeps.")
    return Parallel(n_jobs=jobs)(delayed(_run_one)(config, solvers[0], seed) for seed in config.seeds)


def _compare_one(config: ExperimentConfig, solver: SolverSpec, seed: int) -> pd.DataFrame:
    result = execute_solver(config.game, solver, seed)
    return curve_of(result, solver.label, seed).metrics_val


def compare_experiment(config: ExperimentConfig, jobs: int = 1) -> pd.DataFrame:
    """
    Run every configured solver on the same game and write a merged curve.csv and a summary.csv.

    :param config: the experiment
    :param jobs: number of solver runs executed in parallel
    :raises ConfigurationError: if fewer than two solvers are configured
    :return: the summary table (final gap, iterations and wall time per solver, averaged over repeats)
    """
    if len(config.solvers) < 2:
        raise ConfigurationError(f"'compare' needs at least two solvers. Given: {len(config.solvers)}.")
    tasks = [(solver, seed) for entry in config.solvers for solver in entry.expand() for seed in config.seeds]
    frames = Parallel(n_jobs=jobs)(delayed(_compare_one)(config, solver, seed) for solver, seed in tasks)
    curves = pd.concat(frames, ignore_index=True)[constants.CURVE_COLUMNS]

    finals = curves.groupby(["algorithm", "seed"], sort=False).agg(
        final_gap=("gap", "last"), iterations=("iteration", "max"), wall_time_s=("wall_time_s", "last")
    )
    summary = finals.groupby(level="algorithm", sort=False).mean().reset_index()[constants.SUMMARY_COLUMNS]

    output = Path(config.output_dir)
    write_csv(output / "curve.csv", curves)
    write_csv(output / "summary.csv", summary)
    write_json(
        output / "manifest.json",
        {
            "config_sha256": config.sha256(),
            "seeds": config.seeds,
            "versions": versions(),
            "files": ["curve.csv", "summary.csv"],
        },
    )
    return summary


def compress_demo(config: ExperimentConfig) -> pd.DataFrame:
    """
    Run one regret loop over the constant policies of the game and log the uniform and compressed gaps per step.

    :param config: the experiment; its ``regret`` section configures the loop
    :return: the table written to compression.csv
    """
    game = load_game(config.game)
    policy_set = PolicySet(game, constant_policies(game))
    target = -np.inf if config.regret.target_regret is None else config.regret.target_regret
    result = run_regret_loop(
        game,
        policy_set,
        learner=config.regret.learner,
        t_max=config.regret.t_max,
        target_regret=target,
        noise=config.game.noise,
        samples=config.game.samples,
        compress_every=1,
        algorithm=config.regret.algorithm,
        rng=np.random.default_rng(config.seed),
    )
    table = pd.DataFrame([record._asdict() for record in result.history], columns=constants.COMPRESSION_COLUMNS)
    output = Path(config.output_dir)
    write_csv(output / "compression.csv", table)
    write_json(
        output / "manifest.json",
        {
            "config_sha256": config.sha256(),
            "seed": config.seed,
            "versions": versions(),
            "files": ["compression.csv"],
        },
    )
    logger.info(
        f"Compression demo: {len(table)} steps, final uniform gap {table['uniform_gap'].iloc[-1]:.3e}, "
        f"compressed {table['compressed_gap'].iloc[-1]:.3e}"
    )
    return table
