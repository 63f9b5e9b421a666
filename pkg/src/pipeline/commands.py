"""Command implementations: gen, train, calibrate, report, sweep and all.

Output layout under the run directory:

    dataset/                          (gen)
    models/model_<V>.ckpt             (train)
    models/holdout_<V>.csv
    models/train_report_<V>.json
    calibration/temperature_<V>.txt   (calibrate, plus .json diagnostics)
    reports/logits_<V>.csv            (report)
    reports/report_<V>_<tag>.json, reliability_<V>_<tag>.csv, reliability_<V>_<tag>.svg
    sweeps/sweep_<V>_<tag>.csv, sweep_<V>_<tag>_blur.svg, sweep_<V>_<tag>_noise.svg
"""

import logging
import shutil
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from config.settings import ExperimentConfig
from src.augment.filters import gaussian_blur, gaussian_noise
from src.augment.geometry import AugmentParams
from src.augment.rng import RngStream, stream_key
from src.calibration.metrics import BinningConfig, ReliabilityReport, summarize
from src.calibration.scaling import (
    FitConfig,
    LogitMatrix,
    Temperature,
    fit_temperature,
    nll,
    scale_probabilities,
)
from src.classifier.network import ModelConfig, ModelParams
from src.classifier.train import (
    LabeledImages,
    TrainConfig,
    TrainResult,
    load_images,
    logits_for,
    predict_logits,
    train,
)
from src.errors import ArtifactError, StageError
from src.formats.artifacts import (
    EvaluationReport,
    load_checkpoint,
    read_temperature,
    require,
    save_checkpoint,
    write_json,
    write_temperature,
)
from src.formats.tables import (
    SWEEP_COLUMNS,
    read_logits,
    write_logits,
    write_reliability,
    write_sweep,
)
from src.models.image import ImageBuffer
from src.models.schemas import DatasetManifest, TestGroup, Variant
from src.report.console import (
    VariantSummary,
    console,
    dataset_panel,
    metrics_table,
    summary_table,
)
from src.report.svg import write_reliability_svg, write_sweep_svg
from src.synth.baseline import nearest_centroid_accuracy
from src.synth.dataset import MANIFEST_NAME, build_dataset, load_dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunContext:
    cfg: ExperimentConfig
    out_dir: Path
    force: bool = False
    workers: int = 1

    @property
    def dataset_dir(self) -> Path:
        return self.cfg.dataset_path(self.out_dir)

    def model_path(self, variant: Variant) -> Path:
        return self.out_dir / "models" / f"model_{variant.value}.ckpt"

    def holdout_path(self, variant: Variant) -> Path:
        return self.out_dir / "models" / f"holdout_{variant.value}.csv"

    def train_report_path(self, variant: Variant) -> Path:
        return self.out_dir / "models" / f"train_report_{variant.value}.json"

    def temperature_path(self, variant: Variant) -> Path:
        return self.out_dir / "calibration" / f"temperature_{variant.value}.txt"

    def report_stem(self, variant: Variant, calibrated: bool) -> str:
        return f"{variant.value}_{'cal' if calibrated else 'uncal'}"


def _load_manifest(ctx: RunContext) -> DatasetManifest:
    return load_dataset(ctx.dataset_dir)


def _load_model(ctx: RunContext, variant: Variant) -> ModelParams:
    return load_checkpoint(require(ctx.model_path(variant), f"train --variant {variant.value}"))


def _temperature(ctx: RunContext, variant: Variant, calibrated: bool) -> Temperature:
    if not calibrated:
        return Temperature(1.0)
    path = require(ctx.temperature_path(variant), f"calibrate --variant {variant.value}")
    return read_temperature(path)


# -- gen ---------------------------------------------------------------------

def cmd_gen(ctx: RunContext) -> DatasetManifest:
    root = ctx.dataset_dir
    if (root / MANIFEST_NAME).exists() or (root.exists() and any(root.iterdir())):
        if not ctx.force:
            raise ArtifactError(f"{root} already exists; pass --force to regenerate")
        try:
            shutil.rmtree(root)
        except OSError as e:
            raise ArtifactError(f"cannot remove {root}: {e}") from e

    exp, split, groups = ctx.cfg.experiment, ctx.cfg.split, ctx.cfg.test_groups
    manifest = build_dataset(
        exp.root_seed,
        root,
        size=exp.image_size,
        workers=ctx.workers,
        test_fraction=split.test_fraction,
        folds=split.folds,
        blur_cap=groups.blur_cap,
        noise_cap=groups.noise_cap,
    )
    console.print(dataset_panel(manifest))

    train_data = load_images(manifest.train(), root)
    test_data = load_images(manifest.group(TestGroup.CLEAN), root)
    baseline = nearest_centroid_accuracy(
        train_data.images, train_data.labels, test_data.images, test_data.labels
    )
    console.print(f"[dim]nearest-centroid baseline on clean test: {baseline:.1%}[/dim]")
    return manifest


# -- train -------------------------------------------------------------------

def cmd_train(ctx: RunContext, variant: Variant) -> TrainResult:
    manifest = _load_manifest(ctx)
    records = sorted(manifest.train(), key=lambda s: s.sample_id)
    if not records:
        raise ArtifactError(f"{ctx.dataset_dir}: manifest has no train split")
    data = load_images(records, ctx.dataset_dir)
    folds = np.array([r.fold for r in records])

    result = train(
        data,
        folds,
        ModelConfig.from_section(ctx.cfg.model),
        TrainConfig.from_section(
            ctx.cfg.train, variant, workers=ctx.workers, groups=ctx.cfg.test_groups
        ),
        AugmentParams.from_section(ctx.cfg.augment),
    )
    save_checkpoint(result.params, ctx.model_path(variant))
    write_logits(result.holdout, ctx.holdout_path(variant))
    write_json(result.report, ctx.train_report_path(variant))

    accs = ", ".join(f"{a:.1%}" for a in result.report.fold_accuracies)
    per_group = ", ".join(f"{g}={a:.1%}" for g, a in result.report.group_accuracies.items())
    console.print(
        f"[bold]variant {variant.value}[/bold]: {result.report.selected_epochs} epochs, "
        f"fold accuracies {accs}; holdout by group {per_group}"
    )
    return result


# -- calibrate ---------------------------------------------------------------

def cmd_calibrate(ctx: RunContext, variant: Variant) -> Temperature:
    holdout = read_logits(require(ctx.holdout_path(variant), f"train --variant {variant.value}"))
    fit = ctx.cfg.fit
    before = nll(holdout, 1.0)
    t = fit_temperature(
        holdout,
        FitConfig(
            log_t_lower=fit.log_t_lower,
            log_t_upper=fit.log_t_upper,
            tolerance=fit.tolerance,
            max_iterations=fit.max_iterations,
            grid_points=fit.grid_points,
        ),
    )
    write_temperature(t, ctx.temperature_path(variant))
    console.print(
        f"[bold]variant {variant.value}[/bold]: T={t.value:.4f}  "
        f"holdout NLL {before:.4f} -> {t.nll_at_fit:.4f}"
    )
    return t


# -- report ------------------------------------------------------------------

def expanded_test_logits(
    ctx: RunContext, variant: Variant, params: ModelParams, manifest: DatasetManifest
) -> LogitMatrix:
    """Logits of the expanded test set, ordered by group then sample id."""
    logits = predict_logits(params, manifest.expanded_test(), ctx.dataset_dir)
    write_logits(logits, ctx.out_dir / "reports" / f"logits_{variant.value}.csv")
    return logits


def cmd_report(ctx: RunContext, variant: Variant, calibrated: bool = False) -> ReliabilityReport:
    params = _load_model(ctx, variant)
    t = _temperature(ctx, variant, calibrated)
    manifest = _load_manifest(ctx)
    logits = expanded_test_logits(ctx, variant, params, manifest)
    records = manifest.expanded_test()

    binning = BinningConfig(ctx.cfg.binning.m)
    preds = scale_probabilities(logits, t)
    overall = summarize(preds, binning)
    groups = {}
    for g in TestGroup:
        idx = [i for i, r in enumerate(records) if r.group == g]
        if idx:
            groups[g.value] = summarize(preds.take(idx), binning)

    stem = ctx.report_stem(variant, calibrated)
    out = ctx.out_dir / "reports"
    report = EvaluationReport.build(
        variant=variant.value,
        calibrated=calibrated,
        temperature=t.value,
        overall=overall,
        nll=nll(logits, t),
        groups=groups,
    )
    write_json(report, out / f"report_{stem}.json")
    write_reliability(overall.bins, out / f"reliability_{stem}.csv")
    write_reliability_svg(
        overall,
        out / f"reliability_{stem}.svg",
        title=f"Variant {variant.value} ({'calibrated' if calibrated else 'uncalibrated'})",
    )

    label = "calibrated" if calibrated else "uncalibrated"
    console.print(metrics_table(
        f"Variant {variant.value} {label} (T={t.value:.3f})",
        {"expanded": overall} | {f"group {g}": r for g, r in groups.items()},
    ))
    return overall


# -- sweep -------------------------------------------------------------------

def _sweep_rows(
    params: ModelParams,
    data: LabeledImages,
    t: Temperature,
    binning: BinningConfig,
    perturbation: str,
    sigmas: list[float],
    perturb: Callable[[int, float], ImageBuffer],
) -> list[dict]:
    rows = []
    for sigma in sigmas:
        images = [perturb(i, sigma) for i in range(len(data))]
        logits = logits_for(params, LabeledImages(data.ids, images, data.labels))
        r = summarize(scale_probabilities(logits, t), binning)
        rows.append({
            "perturbation": perturbation,
            "sigma": float(sigma),
            "accuracy": r.accuracy,
            "avg_confidence": r.avg_confidence,
            "ece": r.ece,
        })
        logger.debug(
            "%s sigma=%g acc=%.3f conf=%.3f", perturbation, sigma, r.accuracy, r.avg_confidence
        )
    return rows


def cmd_sweep(ctx: RunContext, variant: Variant, calibrated: bool = False) -> pd.DataFrame:
    """Apply each grid sigma to every clean test image and evaluate."""
    params = _load_model(ctx, variant)
    t = _temperature(ctx, variant, calibrated)
    manifest = _load_manifest(ctx)
    data = load_images(manifest.test(), ctx.dataset_dir)
    binning = BinningConfig(ctx.cfg.binning.m)
    seed = stream_key(ctx.cfg.experiment.root_seed, "sweep")

    def blur(i: int, sigma: float):
        return gaussian_blur(data.images[i], sigma)

    def noise(i: int, sigma: float):
        rng = RngStream(seed, f"noise/{data.ids[i]}/{sigma!r}")
        return gaussian_noise(data.images[i], sigma, rng)

    sweep = ctx.cfg.sweep
    rows = _sweep_rows(params, data, t, binning, "blur", sweep.blur_sigmas, blur)
    rows += _sweep_rows(params, data, t, binning, "noise", sweep.noise_sigmas, noise)
    df = pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    stem = ctx.report_stem(variant, calibrated)
    out = ctx.out_dir / "sweeps"
    write_sweep(df, out / f"sweep_{stem}.csv")
    for perturbation in ("blur", "noise"):
        write_sweep_svg(
            df,
            perturbation,
            out / f"sweep_{stem}_{perturbation}.svg",
            title=f"Variant {variant.value} {perturbation} sweep",
        )
    console.print(f"[bold]variant {variant.value}[/bold]: sweep written to {out}")
    return df


# -- all ---------------------------------------------------------------------

def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as e:
        logger.error("stage %s failed: %s", name, e)
        raise StageError(name, e) from e


def cmd_all(ctx: RunContext) -> list[VariantSummary]:
    """gen, then train / calibrate / report x2 / sweep x2 for every configured variant."""
    _stage("gen", cmd_gen, ctx)
    rows = []
    for variant in ctx.cfg.experiment.variants:
        v = variant.value
        _stage(f"train {v}", cmd_train, ctx, variant)
        _stage(f"calibrate {v}", cmd_calibrate, ctx, variant)
        uncal = _stage(f"report {v}", cmd_report, ctx, variant, calibrated=False)
        cal = _stage(f"report {v} --calibrated", cmd_report, ctx, variant, calibrated=True)
        _stage(f"sweep {v}", cmd_sweep, ctx, variant, calibrated=False)
        _stage(f"sweep {v} --calibrated", cmd_sweep, ctx, variant, calibrated=True)
        rows.append(VariantSummary(variant=v, uncalibrated=uncal, calibrated=cal))
    console.print(summary_table(rows))
    return rows
