"""Rich tables and panels for command summaries."""

from dataclasses import dataclass

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from src.calibration.metrics import ReliabilityReport
from src.models.schemas import CLASS_ORDER, DatasetManifest, Split, TestGroup

console = Console()


@dataclass(frozen=True)
class VariantSummary:
    """Uncalibrated and calibrated evaluation of one trained variant."""
    variant: str
    uncalibrated: ReliabilityReport
    calibrated: ReliabilityReport


def dataset_panel(manifest: DatasetManifest) -> Panel:
    base = manifest.base_samples()
    counts = manifest.class_counts()
    train, test = manifest.train(), manifest.test()
    folds = {}
    for s in train:
        folds[s.fold] = folds.get(s.fold, 0) + 1
    groups = {g.value: len(manifest.group(g)) for g in TestGroup}
    lines = [
        f"[bold]Total:[/bold] {len(base)}",
        "[bold]Classes:[/bold] " + ", ".join(f"{c.value}={counts[c.value]}" for c in CLASS_ORDER),
        f"[bold]Split:[/bold] {Split.TRAIN.value}={len(train)}, {Split.TEST.value}={len(test)}",
        "[bold]Folds:[/bold] " + ", ".join(f"{f}={n}" for f, n in sorted(folds.items())),
        f"[bold]Expanded test:[/bold] {len(manifest.expanded_test())} ("
        + ", ".join(f"{g}={n}" for g, n in groups.items())
        + ")",
    ]
    return Panel.fit(
        "\n".join(lines),
        title="Dataset",
        border_style="blue",
    )


def metrics_table(title: str, reports: dict[str, ReliabilityReport]) -> Table:
    table = Table(title=title)
    table.add_column("Set", style="cyan")
    table.add_column("N", justify="right")
    table.add_column("Accuracy", style="green", justify="right")
    table.add_column("Avg Conf", style="yellow", justify="right")
    table.add_column("ECE", style="magenta", justify="right")
    table.add_column("MCE", justify="right")
    table.add_column("ACE", justify="right")
    for name, r in reports.items():
        table.add_row(
            name,
            str(r.n),
            f"{r.accuracy:.1%}",
            f"{r.avg_confidence:.1%}",
            f"{r.ece:.4f}",
            f"{r.mce:.4f}",
            f"{r.ace:.4f}",
        )
    return table


def summary_table(rows: list[VariantSummary]) -> Table:
    """One row per variant: uncalibrated / calibrated pairs, then a single accuracy."""
    table = Table(title="Calibration summary (uncal / cal)")
    table.add_column("Dataset", style="cyan")
    for name in ("ECE", "MCE", "ACE", "Avg Conf"):
        table.add_column(name, justify="right")
    table.add_column("Accuracy", style="green", justify="right")
    for row in rows:
        u, c = row.uncalibrated, row.calibrated
        table.add_row(
            row.variant,
            f"{u.ece:.4f} / {c.ece:.4f}",
            f"{u.mce:.4f} / {c.mce:.4f}",
            f"{u.ace:.4f} / {c.ace:.4f}",
            f"{u.avg_confidence:.1%} / {c.avg_confidence:.1%}",
            f"{u.accuracy:.1%}",
        )
    return table
