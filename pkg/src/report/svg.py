"""Reliability diagrams and sweep curves rendered to SVG through jinja2 templates.

Coordinates are formatted with a fixed number of decimals so equal inputs
always produce byte-identical files.
"""

import math
from pathlib import Path

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from src.calibration.metrics import ReliabilityReport
from src.errors import ArtifactError

TEMPLATES_DIR = Path(__file__).parent / "templates"

WIDTH = 420
PLOT = 320
LEFT = 60
TOP = 20
HIST_GAP = 28
HIST_HEIGHT = 50


def format_number(value: float) -> str:
    """Fixed 3-decimal coordinate without a negative zero."""
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


_env = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    autoescape=True,
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    trim_blocks=True,
    lstrip_blocks=True,
)
_env.filters["num"] = format_number


def _write(text: str, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e
    return path


def reliability_svg(report: ReliabilityReport, title: str = "Reliability diagram") -> str:
    """Accuracy bar per bin, gap shading towards bin confidence, identity diagonal
    and a per-bin sample-share strip below the plot."""
    m = report.m
    width = PLOT / m
    bottom = TOP + PLOT
    bars, gaps, hist = [], [], []
    for b in report.bins:
        x = LEFT + b.lower * PLOT
        acc = b.accuracy if b.count else 0.0
        bars.append({"x": x, "y": bottom - acc * PLOT, "w": width, "h": acc * PLOT})
        if b.count:
            hi, lo = max(b.accuracy, b.confidence), min(b.accuracy, b.confidence)
            gaps.append({"x": x, "y": bottom - hi * PLOT, "w": width, "h": (hi - lo) * PLOT})
        share = b.count / report.n if report.n else 0.0
        strip_bottom = bottom + HIST_GAP + HIST_HEIGHT
        h = share * HIST_HEIGHT
        hist.append({"x": x, "y": strip_bottom - h, "w": width, "h": h})

    ticks = [
        {"x": LEFT + v * PLOT, "y": bottom - v * PLOT + 4, "label": f"{v:.1f}"}
        for v in (0.0, 0.25, 0.5, 0.75, 1.0)
    ]
    caption = (
        f"ECE {report.ece:.4f}  MCE {report.mce:.4f}  ACE {report.ace:.4f}  "
        f"acc {report.accuracy:.3f}  conf {report.avg_confidence:.3f}"
    )
    return _env.get_template("reliability.svg.j2").render(
        width=WIDTH,
        height=TOP + PLOT + HIST_GAP + HIST_HEIGHT + 24,
        left=LEFT,
        top=TOP,
        plot=PLOT,
        bars=bars,
        gaps=gaps,
        hist=hist,
        ticks=ticks,
        caption=caption,
        title=title,
    )


def write_reliability_svg(
    report: ReliabilityReport, path: str | Path, title: str = "Reliability diagram"
) -> Path:
    return _write(reliability_svg(report, title), path)


def sweep_svg(rows: pd.DataFrame, perturbation: str, title: str | None = None) -> str:
    """Accuracy and average confidence against sigma for one perturbation.

    Blur sigmas use a log2 axis, noise sigmas a linear one.
    """
    rows = rows[rows["perturbation"] == perturbation].sort_values("sigma")
    if rows.empty:
        raise ArtifactError(f"no sweep rows for perturbation {perturbation!r}")
    sigmas = rows["sigma"].astype(float).tolist()
    log_axis = perturbation == "blur" and sigmas[0] > 0
    to_axis = math.log2 if log_axis else (lambda v: v)
    lo, hi = to_axis(sigmas[0]), to_axis(sigmas[-1])
    span = hi - lo or 1.0
    plot_w, plot_h = PLOT + 40, PLOT * 0.75

    def point(sigma: float, value: float) -> tuple[float, float]:
        return (LEFT + (to_axis(sigma) - lo) / span * plot_w, TOP + (1.0 - value) * plot_h)

    curves = [
        {
            "name": column.replace("_", "-"),
            "label": label,
            "color": color,
            "points": [point(s, v) for s, v in zip(sigmas, rows[column].astype(float))],
        }
        for column, label, color in (
            ("accuracy", "accuracy", "#3b6ea5"),
            ("avg_confidence", "avg confidence", "#d9534f"),
        )
    ]
    x_ticks = [{"x": point(s, 0.0)[0], "label": f"{s:g}"} for s in sigmas]
    y_ticks = [
        {"y": point(sigmas[0], v)[1] + 4, "label": f"{v:.2f}"} for v in (0.0, 0.25, 0.5, 0.75, 1.0)
    ]
    return _env.get_template("sweep.svg.j2").render(
        width=LEFT + plot_w + 30,
        height=TOP + plot_h + 40,
        left=LEFT,
        top=TOP,
        plot_w=plot_w,
        plot_h=plot_h,
        curves=curves,
        x_ticks=x_ticks,
        y_ticks=y_ticks,
        x_label=f"{perturbation} sigma" + (" (log2)" if log_axis else ""),
        title=title or f"{perturbation} sweep",
    )


def write_sweep_svg(
    rows: pd.DataFrame, perturbation: str, path: str | Path, title: str | None = None
) -> Path:
    return _write(sweep_svg(rows, perturbation, title), path)
