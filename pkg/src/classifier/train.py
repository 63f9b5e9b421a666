"""Cross-validated training, holdout logit pooling and batch prediction."""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from src.augment.geometry import AugmentParams
from src.augment.pipeline import degrade_for_group, training_pipeline
from src.augment.rng import RngStream, stream_key
from src.calibration.scaling import LogitMatrix
from src.errors import InvalidInputError, NumericError
from src.formats.pgm import read_pgm
from src.models.image import ImageBuffer
from src.models.schemas import SampleRecord, TestGroup, Variant

from .network import (
    ModelConfig,
    ModelParams,
    cross_entropy,
    init_model,
    loss_and_gradient,
    predict_batches,
    to_input,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 16
    learning_rate: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 1e-4
    grad_clip: float = 5.0
    seed: int = 0
    variant: Variant | None = Variant.I  # None trains on un-augmented images
    workers: int = 1
    # sigma caps of the perturbed validation copies (same meaning as the test groups)
    blur_cap: float = 32.0
    noise_cap: float = 30.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise InvalidInputError("epochs, batch_size and learning_rate must be positive")
        if self.grad_clip <= 0:
            raise InvalidInputError("grad_clip must be > 0")

    @classmethod
    def from_section(
        cls, section, variant: Variant, workers: int = 1, groups=None
    ) -> "TrainConfig":
        caps = {}
        if groups is not None:
            caps = {"blur_cap": groups.blur_cap, "noise_cap": groups.noise_cap}
        return cls(
            epochs=section.epochs,
            batch_size=section.batch_size,
            learning_rate=section.learning_rate,
            momentum=section.momentum,
            weight_decay=section.weight_decay,
            grad_clip=section.grad_clip,
            seed=section.seed,
            variant=variant,
            workers=workers,
            **caps,
        )


class FoldReport(BaseModel):
    fold: int
    epoch_losses: list[float] = Field(default_factory=list)
    val_accuracies: list[float] = Field(default_factory=list)
    val_group_accuracies: dict[str, list[float]] = Field(default_factory=dict)
    best_epoch: int = 0  # 1-based
    best_accuracy: float = 0.0


class TrainReport(BaseModel):
    """Per-epoch losses and per-fold validation accuracies of one training run."""
    format_version: int = 2
    variant: str
    parameter_count: int
    initial_loss: float
    folds: list[FoldReport]
    selected_epochs: int
    fold_accuracies: list[float]  # validation accuracy at the selected epoch budget
    group_accuracies: dict[str, float]  # pooled holdout accuracy per test group
    final_epoch_losses: list[float]


@dataclass
class TrainResult:
    params: ModelParams
    report: TrainReport
    holdout: LogitMatrix


@dataclass
class LabeledImages:
    ids: list[str]
    images: list[ImageBuffer]
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, mask: np.ndarray) -> "LabeledImages":
        idx = np.flatnonzero(mask)
        return LabeledImages(
            ids=[self.ids[i] for i in idx],
            images=[self.images[i] for i in idx],
            labels=self.labels[idx],
        )

    @classmethod
    def concat(cls, parts: list["LabeledImages"]) -> "LabeledImages":
        return cls(
            ids=[i for p in parts for i in p.ids],
            images=[img for p in parts for img in p.images],
            labels=np.concatenate([p.labels for p in parts]),
        )


def load_images(records: list[SampleRecord], root: str | Path) -> LabeledImages:
    root = Path(root)
    return LabeledImages(
        ids=[r.sample_id for r in records],
        images=[read_pgm(root / r.path) for r in records],
        labels=np.array([r.label for r in records], dtype=np.int64),
    )


def stack_inputs(images: list[ImageBuffer], size: int) -> np.ndarray:
    if not images:
        return np.zeros((0, size, size))
    return np.stack([to_input(img, size) for img in images])


def validation_copies(data: LabeledImages, cfg: TrainConfig) -> dict[TestGroup, LabeledImages]:
    """Clean, blurred, noisy and blurred+noisy copies of every sample.

    The copies mirror the test groups and depend only on (seed, sample id,
    group), so every variant validates on the same images. Group A keeps the
    sample ids; B to D append "-<group>".
    """
    copies = {TestGroup.CLEAN: data}
    for group in (TestGroup.BLUR, TestGroup.NOISE, TestGroup.BLUR_NOISE):
        images = []
        for sid, img in zip(data.ids, data.images):
            rng = RngStream(cfg.seed, stream_key("validation", sid, group.value))
            images.append(degrade_for_group(img, group, rng, cfg.blur_cap, cfg.noise_cap)[0])
        ids = [f"{sid}-{group.value}" for sid in data.ids]
        copies[group] = LabeledImages(ids, images, data.labels.copy())
    return copies


def _epoch_inputs(data: LabeledImages, cfg: TrainConfig, aug: AugmentParams, size: int,
                  tag: str, epoch: int) -> np.ndarray:
    if cfg.variant is None:
        return stack_inputs(data.images, size)

    def prepare(i: int) -> np.ndarray:
        rng = RngStream(cfg.seed, stream_key("augment", tag, epoch, data.ids[i]))
        return to_input(training_pipeline(data.images[i], cfg.variant, aug, rng), size)

    # each sample owns its stream, so the result is independent of the worker count
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return np.stack(list(pool.map(prepare, range(len(data)))))
    return np.stack([prepare(i) for i in range(len(data))])


def cosine_rate(base: float, progress: float) -> float:
    """Cosine-decayed learning rate at `progress` in [0, 1] of the schedule."""
    return 0.5 * base * (1 + math.cos(math.pi * min(progress, 1.0)))


def fit(
    params: ModelParams,
    data: LabeledImages,
    cfg: TrainConfig,
    aug: AugmentParams,
    epochs: int,
    tag: str,
    on_epoch: Callable[[int, ModelParams], None] | None = None,
    schedule_epochs: int | None = None,
) -> list[float]:
    """SGD with momentum, weight decay, gradient clipping and cosine decay.

    Trains `params` in place for `epochs` epochs and returns the mean training
    loss of every epoch. The cosine schedule spans `schedule_epochs` (default
    `epochs`) measured in epochs, so stopping early at epoch k leaves the same
    learning rate as epoch k of a full-length run. Batch order per epoch is a
    permutation drawn from (seed, tag, epoch).
    """
    if len(data) == 0:
        raise InvalidInputError(f"no training samples for {tag}")
    schedule_epochs = schedule_epochs or epochs
    size = params.config.input_size
    decay_mask = params.weight_mask() * cfg.weight_decay
    velocity = np.zeros_like(params.flat)
    batches_per_epoch = math.ceil(len(data) / cfg.batch_size)
    step = 0
    losses = []
    for epoch in range(epochs):
        inputs = _epoch_inputs(data, cfg, aug, size, tag, epoch)
        order = RngStream(cfg.seed, stream_key("order", tag, epoch)).permutation(len(data))
        batch_losses = []
        for b, start in enumerate(range(0, len(data), cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grad, _ = loss_and_gradient(params, inputs[idx], data.labels[idx])
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise NumericError(
                    f"training diverged ({tag}, epoch {epoch + 1}, step {step}): loss={loss}"
                )
            norm = float(np.linalg.norm(grad))
            if norm > cfg.grad_clip:
                grad = grad * (cfg.grad_clip / norm)
            lr = cosine_rate(cfg.learning_rate, (epoch + b / batches_per_epoch) / schedule_epochs)
            velocity = cfg.momentum * velocity + grad + decay_mask * params.flat
            params.flat -= lr * velocity
            batch_losses.append(loss * len(idx))
            step += 1
        losses.append(math.fsum(batch_losses) / len(data))
        logger.debug("%s epoch %d/%d loss %.4f", tag, epoch + 1, epochs, losses[-1])
        if on_epoch is not None:
            on_epoch(epoch, params)
    return losses


def logits_for(params: ModelParams, data: LabeledImages) -> LogitMatrix:
    inputs = stack_inputs(data.images, params.config.input_size)
    return LogitMatrix(predict_batches(params, inputs), data.labels.copy(), list(data.ids))


def _accuracy(m: LogitMatrix, mask: np.ndarray | None = None) -> float:
    hits = np.argmax(m.logits, axis=1) == m.labels
    if mask is not None:
        hits = hits[mask]
    return float(np.mean(hits)) if hits.size else 0.0


def _fold_seed(cfg: TrainConfig, *parts) -> int:
    variant = cfg.variant.value if cfg.variant else "none"
    return stream_key(cfg.seed, variant, *parts)


def train(
    data: LabeledImages,
    folds: np.ndarray,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    aug: AugmentParams | None = None,
) -> TrainResult:
    """K-fold training, then a final retrain on all samples.

    Each fold model trains on the other folds with the variant's augmentation
    and after every epoch is validated on the held-out fold in all four test
    group conditions (clean, blur, noise, blur+noise). The best fold's best
    epoch sets the epoch budget of the final model, which follows the fold
    runs' learning-rate schedule and stops there. The held-out logits of every
    fold at that epoch are pooled as the temperature holdout.
    """
    aug = aug or AugmentParams()
    folds = np.asarray(folds)
    fold_ids = sorted(set(folds.tolist()))
    if len(fold_ids) < 2 or any(not (folds == f).any() for f in fold_ids):
        raise InvalidInputError("training needs at least two nonempty folds")

    variant = cfg.variant.value if cfg.variant else "none"
    final_params = init_model(model_cfg, _fold_seed(cfg, "final"))
    initial_loss = cross_entropy(
        predict_batches(final_params, stack_inputs(data.images, model_cfg.input_size)), data.labels
    )
    copies = validation_copies(data, cfg)

    fold_reports: list[FoldReport] = []
    fold_logits: list[list[LogitMatrix]] = []
    fold_groups: list[np.ndarray] = []
    for f in fold_ids:
        train_part = data.subset(folds != f)
        val_part = LabeledImages.concat([copies[g].subset(folds == f) for g in TestGroup])
        val_groups = np.repeat([g.value for g in TestGroup], int((folds == f).sum()))
        params = init_model(model_cfg, _fold_seed(cfg, "fold", f))
        per_epoch: list[LogitMatrix] = []
        accuracies: list[float] = []
        by_group: dict[str, list[float]] = {g.value: [] for g in TestGroup}

        def record(epoch: int, p: ModelParams):
            m = logits_for(p, val_part)
            per_epoch.append(m)
            accuracies.append(_accuracy(m))
            for g, accs in by_group.items():
                accs.append(_accuracy(m, val_groups == g))

        losses = fit(params, train_part, cfg, aug, cfg.epochs, f"{variant}/fold{f}", record)
        best = int(np.argmax(accuracies))
        fold_reports.append(FoldReport(
            fold=f,
            epoch_losses=losses,
            val_accuracies=accuracies,
            val_group_accuracies=by_group,
            best_epoch=best + 1,
            best_accuracy=accuracies[best],
        ))
        fold_logits.append(per_epoch)
        fold_groups.append(val_groups)
        logger.info("variant %s fold %d: best val acc %.3f at epoch %d",
                    variant, f, accuracies[best], best + 1)

    best_fold = max(range(len(fold_reports)), key=lambda i: (fold_reports[i].best_accuracy, -i))
    selected = fold_reports[best_fold].best_epoch
    holdout = LogitMatrix.concat([per_epoch[selected - 1] for per_epoch in fold_logits])
    groups = np.concatenate(fold_groups)

    params = final_params
    final_losses = fit(
        params, data, cfg, aug, selected, f"{variant}/final", schedule_epochs=cfg.epochs
    )
    report = TrainReport(
        variant=variant,
        parameter_count=params.count,
        initial_loss=initial_loss,
        folds=fold_reports,
        selected_epochs=selected,
        fold_accuracies=[r.val_accuracies[selected - 1] for r in fold_reports],
        group_accuracies={g.value: _accuracy(holdout, groups == g.value) for g in TestGroup},
        final_epoch_losses=final_losses,
    )
    return TrainResult(params=params, report=report, holdout=holdout)


def predict_logits(
    params: ModelParams, records: list[SampleRecord], root: str | Path
) -> LogitMatrix:
    """One logits row per record, in record order."""
    return logits_for(params, load_images(records, root))
