#!/usr/bin/env python
"""Command-line interface."""
import logging
from typing import Callable, Optional

import click
from rich import traceback
from rich.console import Console
from rich.table import Table

from . import __version__
from .constants import ConfigurationError
from .harness import ExperimentConfig, compare_experiment, compress_demo, load_config, run_experiment

logger = logging.getLogger(__name__)

CONFIG_ERROR_EXIT = 2
RUNTIME_ERROR_EXIT = 1

error_console = Console(stderr=True)


def _load(config: str, seed: Optional[int], output: Optional[str]) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_config(config)).with_overrides(seed=seed, output_dir=output)


def _guarded(ctx: click.Context, action: Callable[[], None]) -> None:
    """Run action, mapping configuration errors to exit code 2 and solver failures to exit code 1."""
    try:
        action()
    except ConfigurationError as error:
        error_console.print(f"[bold red]Configuration error:[/bold red] {error}")
        ctx.exit(CONFIG_ERROR_EXIT)
    except Exception as error:
        logger.exception("Solver run failed")
        error_console.print(f"[bold red]Run failed:[/bold red] {type(error).__name__}: {error}")
        ctx.exit(RUNTIME_ERROR_EXIT)


def _common_options(command: Callable) -> Callable:
    options = [
        click.option(
            "--config", "config", required=True, type=click.Path(exists=True, dir_okay=False), help="YAML config"
        ),
        click.option("--seed", type=int, default=None, help="Base seed, overrides the config."),
        click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Parallel jobs."),
        click.option("--output", type=click.Path(file_okay=False), default=None, help="Output directory."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@click.group()
@click.version_option(version=__version__, message=click.style(f"meanfield_psro Version: {__version__}"))
def main() -> None:
    """meanfield_psro: PSRO equilibrium solvers for mean-field games."""


@main.command()
@_common_options
@click.pass_context
def run(ctx: click.Context, config: str, seed: Optional[int], jobs: int, output: Optional[str]) -> None:
    """Run the configured solver once per repeat."""

    def action():
        experiment = _load(config, seed, output)
        rows = run_experiment(experiment, jobs=jobs)
        table = Table(title=f"{experiment.game.name}: {experiment.solvers[0].label}")
        for column in ("seed", "final_gap", "iterations"):
            table.add_column(column)
        for run_seed, row in zip(experiment.seeds, rows):
            table.add_row(str(run_seed), f"{row['final_gap']:.3e}", str(row["iterations"]))
        Console().print(table)

    _guarded(ctx, action)


@main.command()
@_common_options
@click.pass_context
def compare(ctx: click.Context, config: str, seed: Optional[int], jobs: int, output: Optional[str]) -> None:
    """Run every configured solver on the same game and summarise the final gaps."""

    def action():
        experiment = _load(config, seed, output)
        summary = compare_experiment(experiment, jobs=jobs)
        table = Table(title=f"{experiment.game.name}: {len(summary)} solvers")
        for column in summary.columns:
            table.add_column(column)
        for row in summary.itertuples(index=False):
            table.add_row(row.algorithm, f"{row.final_gap:.3e}", f"{row.iterations:g}", f"{row.wall_time_s:.3f}")
        Console().print(table)

    _guarded(ctx, action)


@main.command(name="compress-demo")
@_common_options
@click.pass_context
def compress_demo_command(
    ctx: click.Context, config: str, seed: Optional[int], jobs: int, output: Optional[str]
) -> None:
    """Compare the uniform average of a regret loop with its compressed device."""

    def action():
        experiment = _load(config, seed, output)
        history = compress_demo(experiment)
        last = history.iloc[-1]
        Console().print(
            f"{int(last['step'])} steps: uniform gap {last['uniform_gap']:.3e}, "
            f"compressed gap {last['compressed_gap']:.3e} on {int(last['sparsity'])} atoms"
        )

    _guarded(ctx, action)


if __name__ == "__main__":
    traceback.install()
    main(prog_name="meanfield_psro")  # pragma: no cover
