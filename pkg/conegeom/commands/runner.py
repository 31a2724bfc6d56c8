"""Shared plumbing of the CLI verbs: option types, logging setup, exit codes and the summary table."""

import enum
import logging
from typing import Annotated, Callable, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from conegeom.core.config import settings
from conegeom.core.errors import ConeGeomError, ConfigError, SuiteFailure
from conegeom.models.report_schema import ResultBundle
from conegeom.services.experiment_service import ExperimentService, load_experiment_config, require_passed

log = logging.getLogger(__name__)
console = Console()

EXIT_SUITE_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_ENGINE_ERROR = 3


class LogLevel(str, enum.Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"


ConfigPath = Annotated[str, typer.Option("--config", "-c", help="Experiment config (JSON).")]
OutDir = Annotated[
    Optional[str], typer.Option("--out", "-o", help="Output directory (default: config output_dir, then CONEGEOM_OUTPUT_DIR).")
]
Threads = Annotated[int, typer.Option("--threads", "-t", min=1, help="Worker threads for levels and sweep points.")]
LogLevelOption = Annotated[
    Optional[LogLevel], typer.Option("--log-level", case_sensitive=False, help="Logging level (default: CONEGEOM_LOG_LEVEL).")
]


def configure_logging(level: Optional[LogLevel] = None) -> None:
    logging.basicConfig(
        level=level.value if level is not None else settings.LOG_LEVEL,
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_time=False, show_path=False)],
        force=True,
    )


def print_summary(bundle: ResultBundle) -> None:
    table = Table(title=f"{bundle.command} checks")
    table.add_column("Check")
    table.add_column("Status")
    table.add_column("Value", justify="right")
    table.add_column("Threshold", justify="right")
    table.add_column("Note")
    for check in bundle.checks:
        if check.skipped:
            status = "[yellow]skipped[/yellow]"
        elif check.passed:
            status = "[green]pass[/green]"
        else:
            status = "[bold red]FAIL[/bold red]"
        value = "" if check.value is None else f"{check.value:.3e}"
        threshold = "" if check.threshold is None else f"{check.threshold:.1e}"
        table.add_row(check.name, status, value, threshold, check.note)
    console.print(table)
    console.print(f"Wrote {len(bundle.files)} file(s) to {bundle.output_dir}", markup=False)


def execute(
    command: str,
    config_path: str,
    out: Optional[str],
    threads: int,
    log_level: Optional[LogLevel],
    action: Callable[[ExperimentService], ResultBundle],
) -> None:
    """Load the config, run one experiment verb and map engine errors to exit codes."""
    configure_logging(log_level)
    try:
        config = load_experiment_config(config_path)
        service = ExperimentService(config, output_dir=out, threads=threads)
        bundle = action(service)
        print_summary(bundle)
        require_passed(bundle)
    except SuiteFailure as e:
        log.error(f"{command} failed: {e.detail}")
        console.print(f"FAILED: {e.detail}", style="bold red", markup=False, soft_wrap=True)
        raise typer.Exit(code=EXIT_SUITE_FAILURE)
    except ConfigError as e:
        log.error(f"Invalid configuration: {e.detail}")
        console.print(f"Config error: {e.detail}", style="bold red", markup=False, soft_wrap=True)
        raise typer.Exit(code=EXIT_CONFIG_ERROR)
    except ConeGeomError as e:
        log.error(f"{command} aborted: {e.detail}", exc_info=True)
        console.print(f"Error: {e.detail}", style="bold red", markup=False, soft_wrap=True)
        raise typer.Exit(code=EXIT_ENGINE_ERROR)
