from pathlib import Path
from typing import Annotated, Optional

import orjson
import typer

from conegeom.models.experiment_schema import ExperimentConfig


def schema(
    out: Annotated[Optional[str], typer.Option("--out", "-o", help="Write the schema to this file.")] = None,
):
    """Print (or write) the JSON schema of experiment configs."""
    document = orjson.dumps(ExperimentConfig.model_json_schema(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
    if out is None:
        typer.echo(document.decode())
        return
    Path(out).write_bytes(document + b"\n")
    typer.echo(f"Schema written to {out}")
