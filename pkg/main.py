"""texcal - texture-classification calibration toolkit: command-line entry point."""

import argparse
import logging
import sys
from pathlib import Path

from rich.logging import RichHandler

from config import echo_config, get_settings, load_config
from src.errors import TexcalError
from src.formats.artifacts import write_run_info
from src.models.schemas import Variant
from src.pipeline import (
    RunContext,
    cmd_all,
    cmd_calibrate,
    cmd_gen,
    cmd_report,
    cmd_sweep,
    cmd_train,
)
from src.report.console import console

COMMANDS = ("gen", "train", "calibrate", "report", "sweep", "all")

logger = logging.getLogger("texcal")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texcal",
        description="Synthetic pit-pattern texture classifier with temperature scaling.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="TOML experiment configuration")
    parser.add_argument("--seed", type=int, help="override experiment.root_seed")
    parser.add_argument(
        "--variant",
        choices=[v.value for v in Variant],
        default=Variant.I.value,
        help="augmentation variant for train/calibrate/report/sweep",
    )
    parser.add_argument("--calibrated", action="store_true", help="apply the fitted temperature")
    parser.add_argument("--force", action="store_true", help="overwrite an existing dataset")
    parser.add_argument(
        "--out", type=Path, help="output directory (default: TEXCAL_OUT_DIR or ./output)"
    )
    parser.add_argument("--bins", type=int, help="override binning.m")
    return parser


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=False, show_path=False)],
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging(settings.log_level)

    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, bins=args.bins)
        out_dir = args.out or Path(settings.out_dir)
        ctx = RunContext(cfg=cfg, out_dir=out_dir, force=args.force, workers=settings.workers)
        variant = Variant(args.variant)

        echo_config(cfg, out_dir)
        command = " ".join(["texcal", *(argv if argv is not None else sys.argv[1:])])
        write_run_info(out_dir, command, cfg.to_toml())

        if args.command == "gen":
            cmd_gen(ctx)
        elif args.command == "train":
            cmd_train(ctx, variant)
        elif args.command == "calibrate":
            cmd_calibrate(ctx, variant)
        elif args.command == "report":
            cmd_report(ctx, variant, calibrated=args.calibrated)
        elif args.command == "sweep":
            cmd_sweep(ctx, variant, calibrated=args.calibrated)
        else:
            cmd_all(ctx)
    except TexcalError as e:
        console.print(f"[red]Error:[/red] {e}")
        return e.exit_code
    except KeyboardInterrupt:
        console.print("[yellow]interrupted[/yellow]")
        return 130
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
