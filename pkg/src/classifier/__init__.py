"""Dilated CNN classifier: model, training and gradient verification."""

from .gradcheck import gradient_check
from .network import (
    ModelConfig,
    ModelParams,
    forward,
    forward_batch,
    init_model,
    loss_and_gradient,
    to_input,
)
from .train import (
    LabeledImages,
    TrainConfig,
    TrainReport,
    TrainResult,
    fit,
    load_images,
    predict_logits,
    train,
)

__all__ = [
    "LabeledImages",
    "ModelConfig",
    "ModelParams",
    "TrainConfig",
    "TrainReport",
    "TrainResult",
    "fit",
    "forward",
    "forward_batch",
    "gradient_check",
    "init_model",
    "load_images",
    "loss_and_gradient",
    "predict_logits",
    "to_input",
    "train",
]
