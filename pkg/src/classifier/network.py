"""Small dilated convolutional classifier with hand-written backpropagation.

Architecture per conv layer l: 3x3 convolution (dilation d_l, zero "same"
padding) -> ReLU -> 2x2 average pool (stride 2). The head is a global average
pool followed by a linear layer to `num_classes` logits.

Flat parameter layout (float64), in this order:
    for each conv layer l: W_l (out_l, in_l, 3, 3), then b_l (out_l,)
    head: W_h (num_classes, out_last), then b_h (num_classes,)
"""

import math
from dataclasses import dataclass, field

import numpy as np

from src.augment.geometry import resize_bilinear
from src.augment.rng import RngStream
from src.errors import InvalidInputError
from src.models.image import ImageBuffer

KERNEL_TAPS = 9
# floor on the per-image std (intensity scale 0..1), about four gray levels
STD_FLOOR = 4.0 / 255.0


@dataclass(frozen=True)
class ModelConfig:
    input_size: int = 64
    channels: tuple[int, ...] = (8, 16, 32)
    kernel_size: int = 3
    dilations: tuple[int, ...] = (1, 2, 4)
    num_classes: int = 4
    in_channels: int = 1

    def __post_init__(self):
        if len(self.channels) != len(self.dilations):
            raise InvalidInputError("channels and dilations must have equal length")
        if any(d < 1 for d in self.dilations):
            raise InvalidInputError("dilations must be >= 1")
        if self.kernel_size != 3:
            raise InvalidInputError("only 3x3 kernels are supported")
        if self.input_size % (2 ** len(self.channels)):
            raise InvalidInputError("input_size must be divisible by 2**layers")

    @classmethod
    def from_section(cls, section) -> "ModelConfig":
        return cls(
            input_size=section.input_size,
            channels=tuple(section.channels),
            kernel_size=section.kernel_size,
            dilations=tuple(section.dilations),
            num_classes=section.num_classes,
        )

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "channels": list(self.channels),
            "kernel_size": self.kernel_size,
            "dilations": list(self.dilations),
            "num_classes": self.num_classes,
            "in_channels": self.in_channels,
        }

    def layer_shapes(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        """(weight shape, bias shape) per layer, head last."""
        shapes = []
        c_in = self.in_channels
        for c_out in self.channels:
            shapes.append(((c_out, c_in, 3, 3), (c_out,)))
            c_in = c_out
        shapes.append(((self.num_classes, c_in), (self.num_classes,)))
        return shapes

    @property
    def parameter_count(self) -> int:
        return sum(math.prod(w) + math.prod(b) for w, b in self.layer_shapes())


@dataclass(eq=False)
class ModelParams:
    """Flat parameter vector; `layers()` returns (W, b) views in layout order."""
    config: ModelConfig
    flat: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.flat.shape != (self.config.parameter_count,):
            raise InvalidInputError(
                f"expected {self.config.parameter_count} parameters, got {self.flat.shape}"
            )

    @property
    def count(self) -> int:
        return self.flat.size

    def layers(self, flat: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        flat = self.flat if flat is None else flat
        out, offset = [], 0
        for w_shape, b_shape in self.config.layer_shapes():
            nw, nb = math.prod(w_shape), math.prod(b_shape)
            w = flat[offset:offset + nw].reshape(w_shape)
            b = flat[offset + nw:offset + nw + nb]
            out.append((w, b))
            offset += nw + nb
        return out

    def weight_mask(self) -> np.ndarray:
        """1 for weights, 0 for biases (weight decay applies to weights only)."""
        mask = np.zeros_like(self.flat)
        for w, _ in self.layers(mask):
            w[...] = 1.0
        return mask

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, self.flat.copy())


def init_model(cfg: ModelConfig, seed: int) -> ModelParams:
    """Fan-in scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases."""
    rng = RngStream(seed, "init").generator
    params = ModelParams(cfg, np.zeros(cfg.parameter_count))
    for w, _ in params.layers():
        fan_in = math.prod(w.shape[1:])
        bound = math.sqrt(6.0 / fan_in)
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


def to_input(img: ImageBuffer, size: int) -> np.ndarray:
    """Resize (bilinear) to the model input size and standardize per image.

    The result has zero mean and unit variance unless the image is nearly flat,
    in which case the std is floored at STD_FLOOR and the output stays small.
    """
    values = img.as_float()
    if img.width != size or img.height != size:
        values = resize_bilinear(values, size, size)
    values = values / 255.0
    return (values - values.mean()) / max(float(values.std()), STD_FLOOR)


# -- layer primitives ----------------------------------------------------------

def _im2col(x: np.ndarray, d: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*9, H*W) columns of a dilated 3x3 'same' convolution."""
    b, c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (d, d), (d, d)))
    taps = [
        padded[:, :, ky * d:ky * d + h, kx * d:kx * d + w]
        for ky in range(3)
        for kx in range(3)
    ]
    return np.stack(taps, axis=2).reshape(b, c * KERNEL_TAPS, h * w)


def _col2im(cols: np.ndarray, shape: tuple[int, ...], d: int) -> np.ndarray:
    b, c, h, w = shape
    cols = cols.reshape(b, c, KERNEL_TAPS, h, w)
    padded = np.zeros((b, c, h + 2 * d, w + 2 * d))
    for t in range(KERNEL_TAPS):
        ky, kx = divmod(t, 3)
        padded[:, :, ky * d:ky * d + h, kx * d:kx * d + w] += cols[:, :, t]
    return padded[:, :, d:d + h, d:d + w]


def conv_forward(x: np.ndarray, w: np.ndarray, bias: np.ndarray, d: int):
    b, _, h, width = x.shape
    cols = _im2col(x, d)
    out = np.matmul(w.reshape(w.shape[0], -1), cols) + bias[None, :, None]
    return out.reshape(b, w.shape[0], h, width), cols


def conv_backward(grad: np.ndarray, cols: np.ndarray, x_shape, w: np.ndarray, d: int):
    b, o, h, width = grad.shape
    g = grad.reshape(b, o, h * width)
    w2 = w.reshape(o, -1)
    dw = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = g.sum(axis=(0, 2))
    dx = _col2im(np.matmul(w2.T, g), x_shape, d)
    return dx, dw, db


def avg_pool(x: np.ndarray) -> np.ndarray:
    b, c, h, w = x.shape
    return x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def avg_pool_backward(grad: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) / 4.0


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


# -- network -------------------------------------------------------------------

@dataclass
class ForwardCache:
    inputs: list[np.ndarray]
    cols: list[np.ndarray]
    pre_activations: list[np.ndarray]
    features: np.ndarray


def forward_batch(params: ModelParams, x: np.ndarray, flat: np.ndarray | None = None):
    """Logits for a batch (B, H, W) or (B, 1, H, W); returns (logits, cache)."""
    cfg = params.config
    if x.ndim == 3:
        x = x[:, None]
    if x.shape[1:] != (cfg.in_channels, cfg.input_size, cfg.input_size):
        raise InvalidInputError(
            f"input shape {x.shape[1:]} does not match model input "
            f"({cfg.in_channels}, {cfg.input_size}, {cfg.input_size})"
        )
    layers = params.layers(flat)
    cache = ForwardCache(inputs=[], cols=[], pre_activations=[], features=None)
    h = x
    for (w, bias), d in zip(layers[:-1], cfg.dilations):
        cache.inputs.append(h)
        z, cols = conv_forward(h, w, bias, d)
        cache.cols.append(cols)
        cache.pre_activations.append(z)
        h = avg_pool(np.maximum(z, 0.0))
    features = h.mean(axis=(2, 3))
    cache.features = features
    w_h, b_h = layers[-1]
    return features @ w_h.T + b_h, cache


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of integer labels."""
    logp = log_softmax(logits)
    return float(-logp[np.arange(len(labels)), labels].mean())


def loss_and_gradient(
    params: ModelParams,
    x: np.ndarray,
    labels: np.ndarray,
    loss_scale: float = 1.0,
    flat: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """(scaled mean cross-entropy, flat gradient, logits) for one batch."""
    cfg = params.config
    layers = params.layers(flat)
    logits, cache = forward_batch(params, x, flat)
    n = len(labels)
    loss = loss_scale * cross_entropy(logits, labels)

    probs = np.exp(log_softmax(logits))
    g_logits = probs
    g_logits[np.arange(n), labels] -= 1.0
    g_logits *= loss_scale / n

    grad = ModelParams(cfg, np.zeros(cfg.parameter_count))
    grad_layers = grad.layers()
    w_h, _ = layers[-1]
    grad_layers[-1][0][...] = g_logits.T @ cache.features
    grad_layers[-1][1][...] = g_logits.sum(axis=0)

    g_feat = g_logits @ w_h
    last = cache.pre_activations[-1]
    ph, pw = last.shape[2] // 2, last.shape[3] // 2
    g = np.broadcast_to(g_feat[:, :, None, None] / (ph * pw), g_feat.shape + (ph, pw))
    for i in reversed(range(len(cfg.channels))):
        g = avg_pool_backward(g) * (cache.pre_activations[i] > 0)
        w, _ = layers[i]
        g, dw, db = conv_backward(g, cache.cols[i], cache.inputs[i].shape, w, cfg.dilations[i])
        grad_layers[i][0][...] = dw
        grad_layers[i][1][...] = db
    return loss, grad.flat, logits


def forward(params: ModelParams, img: ImageBuffer) -> np.ndarray:
    """Logit vector for a single image (resized to the model input if needed)."""
    x = to_input(img, params.config.input_size)[None]
    logits, _ = forward_batch(params, x)
    return logits[0]


def predict_batches(params: ModelParams, inputs: np.ndarray, chunk: int = 32) -> np.ndarray:
    """Logits for a stack of preprocessed inputs, evaluated in fixed-size chunks."""
    out = [forward_batch(params, inputs[i:i + chunk])[0] for i in range(0, len(inputs), chunk)]
    return np.concatenate(out) if out else np.zeros((0, params.config.num_classes))
