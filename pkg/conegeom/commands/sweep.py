from typing import Annotated, Optional

import typer

from conegeom.commands.runner import ConfigPath, LogLevelOption, OutDir, Threads, execute
from conegeom.models.experiment_schema import SweepAxis


def sweep(
    config: ConfigPath,
    axis: Annotated[
        Optional[SweepAxis], typer.Option("--axis", "-a", case_sensitive=False, help="Overrides sweep.axis.")
    ] = None,
    out: OutDir = None,
    threads: Threads = 1,
    log_level: LogLevelOption = None,
):
    """Mink2 correction term and rigidity defects along a sweep of eps, alpha or delta (values from sweep.values)."""
    execute("sweep", config, out, threads, log_level, lambda service: service.run_sweep(axis))
