"""
Command-line interface for the spin-bath dynamics simulator.

This module provides commands to run scenario files (including the bundled
scenarios) and to compare simulated series with closed-form envelopes.
"""
import logging
import math
from pathlib import Path
from typing import Optional

import typer

from .config import Settings
from .logging_config import configure_logging
from .runner import compare as compare_envelope
from .runner import run_scenario
from .scenario import resolve_scenario
from .theory import EnvelopeLaw, TheoryParams

app = typer.Typer()
logger = logging.getLogger(__name__)


@app.callback()
def main() -> None:
    """Configure logging for all commands."""
    # In a test environment, the logger might already be configured by pytest's
    # caplog fixture. We don't want to overwrite that.
    if not logging.getLogger().hasHandlers():
        configure_logging(Settings().log_level)


@app.command()
def run(
    config: str = typer.Argument(
        ..., help="Scenario file, or a bundled scenario: fig1, fig2, fig3, fig4."
    ),
    out_dir: Optional[Path] = typer.Option(
        None, "--out-dir", help="Output root (default: settings out_dir)."
    ),
    seed_override: Optional[int] = typer.Option(
        None, "--seed-override", help="Replace the scenario's bath seed."
    ),
    threads: Optional[int] = typer.Option(
        None, "--threads", min=1, help="Concurrent sweep members."
    ),
) -> None:
    """Run a scenario and write its CSV series and summary."""
    settings = Settings()
    logger.info("Running scenario.", extra={"config": config})
    try:
        path = resolve_scenario(config)
        summary = run_scenario(
            path,
            out_dir=out_dir,
            seed_override=seed_override,
            threads=threads,
            settings=settings,
        )
        logger.info(
            "Scenario completed successfully.",
            extra={
                "scenario": summary.scenario,
                "outputs": sorted(f.path for f in summary.outputs.values()),
                "metrics": summary.metrics,
            },
        )
    except Exception as e:
        logger.exception("Error running scenario.", exc_info=e)
        raise typer.Exit(code=1)


@app.command()
def compare(
    csv: Path = typer.Argument(..., help="Series CSV written by 'run'."),
    law: EnvelopeLaw = typer.Option(..., "--law", help="Envelope law to compare."),
    b2: float = typer.Option(..., "--b2", help="Bath dispersion sum_k J_k^2."),
    delta: float = typer.Option(0.0, "--delta", help="Central splitting Delta."),
    sigma0: Optional[float] = typer.Option(
        None, "--sigma0", help="Initial amplitude (default: |first sample|)."
    ),
    t_min: float = typer.Option(0.0, "--t-min", help="Start of the window."),
    t_max: float = typer.Option(math.inf, "--t-max", help="End of the window."),
    column: Optional[str] = typer.Option(
        None, "--column", help="Series column (default: sigma_z or sigma1_z)."
    ),
) -> None:
    """Compare a simulated series' envelope with a closed-form law."""
    logger.info("Comparing envelope.", extra={"csv": str(csv), "law": law.value})
    try:
        params = TheoryParams(b2=b2, delta=delta)
        deviation = compare_envelope(
            csv, law, params, sigma0=sigma0, t_min=t_min, t_max=t_max, column=column
        )
        logger.info(
            "Comparison completed successfully.",
            extra={"law": law.value, "max_relative_deviation": deviation},
        )
    except Exception as e:
        logger.exception("Error comparing envelope.", exc_info=e)
        raise typer.Exit(code=1)


if __name__ == "__main__":
    app()
