import logging
from pathlib import Path
from typing import Any, Optional, Sequence

import jinja2
import matplotlib.pyplot as plt
import numpy as np
import orjson
import pandas as pd
from matplotlib.figure import Figure
from pydantic import BaseModel

from conegeom.core.config import settings

log = logging.getLogger(__name__)

_TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
_JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY

# Fixed salt and text-as-text keep SVG output byte-identical between runs
_SVG_RC = {"svg.hashsalt": "conegeom", "svg.fonttype": "none"}


def _to_jsonable(payload: Any) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    if isinstance(payload, dict):
        return {key: _to_jsonable(value) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [_to_jsonable(value) for value in payload]
    return payload


def line_figure(
    title: str,
    x_label: str,
    y_label: str,
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    log_log: bool = False,
) -> Optional[Figure]:
    """
    Line plot of one or more (x, y) series. Non-finite points are dropped, and on log-log axes so
    are non-positive ones. Returns None when no drawable point remains.
    """
    cleaned = {}
    for label, (xs, ys) in series.items():
        x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_log:
            keep &= (x > 0) & (y > 0)
        if keep.any():
            cleaned[label] = (x[keep], y[keep])
    if not cleaned:
        return None

    plt.switch_backend("Agg")  # Use non-interactive backend
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    draw = ax.loglog if log_log else ax.plot
    for label, (x, y) in cleaned.items():
        draw(x, y, marker="o", label=label)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.set_title(title)
    ax.grid(True, which="major", alpha=0.3)
    ax.legend()
    return fig


class ReportService:
    """Writes result bundles: JSON reports, CSV tables, SVG line plots and an HTML summary."""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.template_loader = jinja2.FileSystemLoader(searchpath=str(_TEMPLATE_DIR))
        self.template_env = jinja2.Environment(loader=self.template_loader, autoescape=True)
        self.template_env.filters["sci"] = lambda value, digits=3: "" if value is None else f"{value:.{digits}e}"
        self.written: list[Path] = []

    def _target(self, name: str) -> Path:
        path = self.output_dir / name
        self.written.append(path)
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._target(name)
        path.write_bytes(orjson.dumps(_to_jsonable(payload), option=_JSON_OPTIONS) + b"\n")
        log.debug(f"Wrote {path}")
        return path

    def write_csv(self, name: str, rows: Sequence[dict], columns: Sequence[str]) -> Path:
        """One row per record; missing cells stay empty. An empty row list gives a header-only file."""
        path = self._target(name)
        frame = pd.DataFrame(list(rows), columns=list(columns))
        frame.to_csv(
            path,
            index=False,
            float_format=f"%.{settings.CSV_SIGNIFICANT_DIGITS}g",
            lineterminator="\n",
        )
        log.debug(f"Wrote {path} ({len(frame)} rows)")
        return path

    def write_line_plot(
        self,
        name: str,
        title: str,
        x_label: str,
        y_label: str,
        series: dict[str, tuple[Sequence[float], Sequence[float]]],
        log_log: bool = False,
    ) -> Optional[Path]:
        fig = line_figure(title, x_label, y_label, series, log_log)
        if fig is None:
            log.warning(f"Plot '{name}' skipped: no drawable points")
            return None
        path = self._target(name)
        try:
            with plt.rc_context(_SVG_RC):
                fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
        log.debug(f"Wrote {path}")
        return path

    def write_summary(self, name: str, **context: Any) -> Path:
        """Human-readable run summary rendered from summary.html.j2; plots are linked by file name."""
        path = self._target(name)
        html = self.template_env.get_template("summary.html.j2").render(context)
        path.write_text(html, encoding="utf-8")
        return path
