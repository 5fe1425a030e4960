"""Network assembly, training and inference.

Pipeline per segment: discretize each channel -> look the ids up in one shared
embedding table -> concatenate to C*E channels -> stacked (conv1d, ReLU,
max-pool, dropout) blocks -> flatten -> dense classification layer. Training
minimizes softmax cross-entropy with Adam over seeded shuffled mini-batches.
"""

import copy
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, DimensionError
from .signal import ActivityLabel, DiscretizerSpec, SegmentTensor, discretize
from .tensor import (AdamState, Parameter, Tensor, adam_step, conv1d_backward,
                     conv1d_forward, dense_backward, dense_forward, dropout,
                     dropout_backward, relu, relu_backward,
                     softmax_cross_entropy)

log = logging.getLogger("harkit.model")

CLASSIFIER_NAMES = ("classifier.W", "classifier.b")


@dataclass(frozen=True)
class ConvBlockConfig:
    filters: int
    kernel: int
    pool: int
    dropout: float


@dataclass
class NetworkConfig:
    channels: int
    window: int
    classes: int
    bins: int = 64
    embed_dim: int = 8
    blocks: tuple = (ConvBlockConfig(32, 5, 2, 0.5), ConvBlockConfig(64, 5, 2, 0.5))
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        self.blocks = tuple(
            b if isinstance(b, ConvBlockConfig) else ConvBlockConfig(*b)
            for b in self.blocks)

    def validate(self) -> None:
        if self.classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.classes}")
        if self.embed_dim < 1:
            raise ConfigError(f"embedding dim must be >= 1, got {self.embed_dim}")
        if self.bins < 2:
            raise ConfigError(f"bin count must be >= 2, got {self.bins}")
        if self.channels < 1 or self.window < 1:
            raise ConfigError(
                f"channels/window must be positive, got {self.channels}/{self.window}")
        if not self.blocks:
            raise ConfigError("at least one conv block is required")
        for i, b in enumerate(self.blocks):
            if not 0.0 <= b.dropout < 1.0:
                raise ConfigError(f"block {i}: dropout rate {b.dropout} outside [0, 1)")
            if b.filters < 1 or b.kernel < 1 or b.pool < 1:
                raise ConfigError(f"block {i}: filters/kernel/pool must be positive")
        self.layer_lengths()

    def layer_lengths(self) -> list[int]:
        """Sequence lengths through the stack: window, then after each conv and pool."""
        lengths = [self.window]
        length = self.window
        for i, b in enumerate(self.blocks):
            length = length - b.kernel + 1
            if length < 1:
                raise ConfigError(
                    f"block {i}: kernel {b.kernel} leaves no samples "
                    f"(length {lengths[-1]} before the conv)")
            lengths.append(length)
            length = length // b.pool
            if length < 1:
                raise ConfigError(
                    f"block {i}: pool {b.pool} leaves no samples "
                    f"(length {lengths[-1]} before the pool)")
            lengths.append(length)
        return lengths

    def flat_dim(self) -> int:
        return self.blocks[-1].filters * self.layer_lengths()[-1]

    def to_dict(self) -> dict:
        return {
            "channels": self.channels, "window": self.window, "classes": self.classes,
            "bins": self.bins, "embed_dim": self.embed_dim,
            "blocks": [[b.filters, b.kernel, b.pool, b.dropout] for b in self.blocks],
            "learning_rate": self.learning_rate, "beta1": self.beta1,
            "beta2": self.beta2, "epsilon": self.epsilon,
            "epochs": self.epochs, "batch_size": self.batch_size, "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkConfig":
        known = {"channels", "window", "classes", "bins", "embed_dim", "blocks",
                 "learning_rate", "beta1", "beta2", "epsilon", "epochs",
                 "batch_size", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown network config key {sorted(unknown)[0]!r}")
        return NetworkConfig(**d)


@dataclass
class TrainedModel:
    config: NetworkConfig
    params: list  # ordered Parameters: embedding, per-block kernels/bias, classifier
    discretizer: DiscretizerSpec | None = None
    labels: list = field(default_factory=list)

    def param(self, name: str) -> Parameter:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def classifier_params(self) -> list:
        return [p for p in self.params if p.name in CLASSIFIER_NAMES]

    def clone(self) -> "TrainedModel":
        return copy.deepcopy(self)


def build_network(config: NetworkConfig, rng: np.random.Generator,
                  labels=None, discretizer: DiscretizerSpec | None = None) -> TrainedModel:
    """Initialize an untrained model.

    Embedding and conv kernels start uniform in [-a, a] with
    a = sqrt(6 / (fan_in + fan_out)); all biases and the whole classification
    layer start at zero, so the initial loss is exactly ln(classes).
    """
    config.validate()
    params = []
    a = math.sqrt(6.0 / (config.bins + config.embed_dim))
    params.append(Parameter(
        "embedding", Tensor(rng.uniform(-a, a, (config.bins, config.embed_dim)))))
    c_in = config.channels * config.embed_dim
    for i, b in enumerate(config.blocks):
        a = math.sqrt(6.0 / (c_in * b.kernel + b.filters * b.kernel))
        params.append(Parameter(
            f"conv{i + 1}.kernels", Tensor(rng.uniform(-a, a, (b.filters, c_in, b.kernel)))))
        params.append(Parameter(f"conv{i + 1}.bias", Tensor.zeros(b.filters)))
        c_in = b.filters
    params.append(Parameter("classifier.W", Tensor.zeros((config.classes, config.flat_dim()))))
    params.append(Parameter("classifier.b", Tensor.zeros(config.classes)))
    if labels is None:
        labels = [ActivityLabel(i, f"class_{i}") for i in range(config.classes)]
    if len(labels) != config.classes:
        raise ConfigError(
            f"{len(labels)} labels supplied for a {config.classes}-class network")
    return TrainedModel(config=config, params=list(params),
                        discretizer=discretizer, labels=list(labels))


def _check_segment(model: TrainedModel, segment: SegmentTensor) -> None:
    cfg = model.config
    if segment.num_channels != cfg.channels:
        raise DimensionError(
            f"segment has {segment.num_channels} channels, model expects {cfg.channels}")
    if segment.window != cfg.window:
        raise DimensionError(
            f"segment window is {segment.window}, model expects {cfg.window}")


def _forward_cached(model: TrainedModel, segment: SegmentTensor, mode: str,
                    rng: np.random.Generator | None):
    cfg = model.config
    _check_segment(model, segment)
    if model.discretizer is None:
        raise ConfigError("model has no fitted discretizer")
    table = model.param("embedding").tensor
    ids = discretize(segment.channels, model.discretizer)
    # per channel c, embedded rows c*E .. c*E+E-1 hold the id sequence's vectors
    x = Tensor(table.data[ids].transpose(0, 2, 1).reshape(
        cfg.channels * cfg.embed_dim, cfg.window))
    cache = {"ids": ids, "embedded": x, "blocks": []}
    for i, b in enumerate(cfg.blocks):
        conv_in = x
        pre = conv1d_forward(x, model.param(f"conv{i + 1}.kernels").tensor,
                             model.param(f"conv{i + 1}.bias").tensor)
        post = relu(pre)
        pooled_data, argmax = kernels.maxpool1d_fwd(post.data, b.pool)
        pooled = Tensor(pooled_data)
        dropped, mask = dropout(pooled, b.dropout, mode, rng)
        cache["blocks"].append({
            "conv_in": conv_in, "pre_relu": pre, "post_relu": post,
            "argmax": argmax, "pooled": pooled, "mask": mask,
        })
        x = dropped
    flat = Tensor(x.data.reshape(-1))
    scores = dense_forward(flat, model.param("classifier.W").tensor,
                           model.param("classifier.b").tensor)
    cache["flat"] = flat
    return scores, cache


def forward(model: TrainedModel, segment: SegmentTensor, mode: str = "eval",
            rng: np.random.Generator | None = None) -> Tensor:
    """Class scores for one segment; eval mode is deterministic."""
    scores, _ = _forward_cached(model, segment, mode, rng)
    return scores


def _backward(model: TrainedModel, cache: dict, score_grad: Tensor,
              trainable: set) -> dict:
    """Gradients for the trainable parameters of one sample.

    Backpropagation stops at the classification layer when nothing deeper is
    trainable, which makes classifier-only fine-tuning cheap.
    """
    cfg = model.config
    grads = {}
    flat = cache["flat"]
    dx, dw, db = dense_backward(flat, model.param("classifier.W").tensor, score_grad)
    if "classifier.W" in trainable:
        grads["classifier.W"] = dw.data
        grads["classifier.b"] = db.data
    deep = trainable - set(CLASSIFIER_NAMES)
    if not deep:
        return grads
    last = cfg.blocks[-1]
    up = Tensor(dx.data.reshape(last.filters, -1))
    for i in range(len(cfg.blocks) - 1, -1, -1):
        blk = cache["blocks"][i]
        b = cfg.blocks[i]
        up = dropout_backward(blk["mask"], up)
        up = Tensor(kernels.maxpool1d_bwd(
            blk["argmax"], up.data, blk["post_relu"].shape[1], b.pool))
        up = relu_backward(blk["pre_relu"], up)
        dx_c, dw_c, db_c = conv1d_backward(
            blk["conv_in"], model.param(f"conv{i + 1}.kernels").tensor, up)
        if f"conv{i + 1}.kernels" in trainable:
            grads[f"conv{i + 1}.kernels"] = dw_c.data
            grads[f"conv{i + 1}.bias"] = db_c.data
        up = dx_c
    if "embedding" in trainable:
        ids = cache["ids"]
        ups = up.data.reshape(cfg.channels, cfg.embed_dim, cfg.window)
        dtable = np.zeros((cfg.bins, cfg.embed_dim))
        np.add.at(dtable, ids.ravel(), ups.transpose(0, 2, 1).reshape(-1, cfg.embed_dim))
        grads["embedding"] = dtable
    return grads


def _mean_eval_loss(model: TrainedModel, segments) -> float:
    total = 0.0
    for seg in segments:
        scores = forward(model, seg, mode="eval")
        loss, _ = softmax_cross_entropy(scores, seg.label.index)
        total += loss
    return total / len(segments)


def train(model: TrainedModel, segments, config: NetworkConfig | None = None):
    """Train in place over seeded shuffled mini-batches; only non-frozen
    parameters change.

    Returns (model, loss_history). history[0] is the mean dataset loss before
    any update; entry i >= 1 is the mean of pre-update batch losses seen during
    epoch i. Zero epochs is a no-op with an empty history.
    """
    cfg = config if config is not None else model.config
    segments = list(segments)
    missing = [lab.name for lab in model.labels
               if not any(s.label.index == lab.index for s in segments)]
    if missing:
        raise DataError(f"no training segments for classes: {', '.join(missing)}")
    for seg in segments:
        if not 0 <= seg.label.index < cfg.classes:
            raise DataError(f"segment label index {seg.label.index} outside model label set")
    if cfg.epochs == 0:
        return model, []
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(learning_rate=cfg.learning_rate, beta1=cfg.beta1,
                      beta2=cfg.beta2, epsilon=cfg.epsilon)
    trainable = {p.name for p in model.params if not p.frozen}
    history = [_mean_eval_loss(model, segments)]
    n = len(segments)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            acc: dict = {}
            for idx in batch:
                seg = segments[idx]
                scores, cache = _forward_cached(model, seg, "train", rng)
                loss, dscores = softmax_cross_entropy(scores, seg.label.index)
                epoch_loss += loss
                for name, g in _backward(model, cache, dscores, trainable).items():
                    if name in acc:
                        acc[name] += g
                    else:
                        acc[name] = g
            for name in acc:
                acc[name] /= len(batch)
            adam_step(model.params, acc, state)
        history.append(epoch_loss / n)
        log.debug("epoch %d/%d mean loss %.6f", epoch + 1, cfg.epochs, history[-1])
    return model, history


def predict(model: TrainedModel, segment: SegmentTensor) -> ActivityLabel:
    """Argmax of eval-mode scores; ties break toward the lowest class index."""
    scores = forward(model, segment, mode="eval")
    return model.labels[int(np.argmax(scores.data))]
