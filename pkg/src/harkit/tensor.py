"""Minimal tensors plus explicit forward/backward pairs for each layer op.

Everything is float64 internally. Each forward has a matching backward that
consumes the upstream gradient; there is no taped autodiff because the network
is a fixed chain. All randomness flows through explicitly passed
numpy Generators.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError


@dataclass
class Tensor:
    """Rank 1-3 float64 array with an optional same-shape gradient buffer."""

    data: np.ndarray
    grad: np.ndarray | None = None

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if not 1 <= self.data.ndim <= 3:
            raise DimensionError(f"tensor rank must be 1-3, got {self.data.ndim}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the data."""
        return self.data.ravel()

    @staticmethod
    def zeros(shape) -> "Tensor":
        return Tensor(np.zeros(shape))

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), None if self.grad is None else self.grad.copy())


def tensor(values) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float64))


@dataclass
class Parameter:
    """Named trainable tensor; frozen parameters are never touched by the optimizer."""

    name: str
    tensor: Tensor
    frozen: bool = False


# ---------------------------------------------------------------------------
# layer ops


def conv1d_forward(x: Tensor, kernels_t: Tensor, bias: Tensor) -> Tensor:
    """Valid cross-correlation, stride 1.

    out[f][t] = bias[f] + sum over c, k of x[c][t+k] * kernels[f][c][k], with
    the accumulation running k innermost, then c.
    """
    c_in, length = x.shape
    f_out, kc, k = kernels_t.shape
    if kc != c_in:
        raise DimensionError(
            f"kernel channel axis has {kc} channels but input has {c_in}")
    if k > length:
        raise DimensionError(
            f"kernel length axis is {k} but input length is only {length}")
    if bias.shape != (f_out,):
        raise DimensionError(
            f"bias axis has {bias.shape[0]} entries but there are {f_out} filters")
    return Tensor(kernels.conv1d_fwd(x.data, kernels_t.data, bias.data))


def conv1d_backward(x: Tensor, kernels_t: Tensor, upstream: Tensor):
    """Gradients of conv1d_forward w.r.t. input, kernels and bias."""
    c_in, length = x.shape
    f_out, kc, k = kernels_t.shape
    if kc != c_in:
        raise DimensionError(
            f"kernel channel axis has {kc} channels but input has {c_in}")
    expect = (f_out, length - k + 1)
    if upstream.shape != expect:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match forward output {expect}")
    dx, dw, db = kernels.conv1d_bwd(x.data, kernels_t.data, upstream.data)
    return Tensor(dx), Tensor(dw), Tensor(db)


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, 0.0))


def relu_backward(x: Tensor, upstream: Tensor) -> Tensor:
    """Pass upstream where x > 0; subgradient 0 at exactly 0."""
    return Tensor(np.where(x.data > 0.0, upstream.data, 0.0))


def maxpool1d(x: Tensor, pool: int) -> Tensor:
    """Non-overlapping max pooling; trailing remainder samples are dropped."""
    out, _ = _maxpool_fwd(x, pool)
    return Tensor(out)


def maxpool1d_backward(x: Tensor, pool: int, upstream: Tensor) -> Tensor:
    """Route upstream to the first maximum of each window, zeros elsewhere."""
    _, argmax = _maxpool_fwd(x, pool)
    c, length = x.shape
    if upstream.shape != argmax.shape:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match pooled output {argmax.shape}")
    return Tensor(kernels.maxpool1d_bwd(argmax, upstream.data, length, pool))


def _maxpool_fwd(x: Tensor, pool: int):
    if pool < 1:
        raise ValueError(f"pool size must be >= 1, got {pool}")
    _, length = x.shape
    if pool > length:
        raise DimensionError(f"pool size {pool} exceeds input length {length}")
    return kernels.maxpool1d_fwd(x.data, pool)


def embedding_forward(ids, table: Tensor) -> Tensor:
    """Column t of the output is row ids[t] of the table (shape E x L)."""
    ids = np.asarray(ids, dtype=np.int64)
    rows, _ = table.shape
    bad = np.nonzero((ids < 0) | (ids >= rows))[0]
    if bad.size:
        raise IndexError(
            f"id {ids[bad[0]]} at position {bad[0]} outside table with {rows} rows")
    return Tensor(table.data[ids].T)


def embedding_backward(ids, upstream: Tensor, rows: int) -> Tensor:
    """Accumulate upstream column t into the gradient row ids[t]."""
    ids = np.asarray(ids, dtype=np.int64)
    e, length = upstream.shape
    if ids.shape != (length,):
        raise DimensionError(
            f"ids length {ids.shape} does not match upstream columns {length}")
    grad = np.zeros((rows, e))
    np.add.at(grad, ids, upstream.data.T)
    return Tensor(grad)


def dense_forward(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    m, d = weights.shape
    if x.shape != (d,):
        raise DimensionError(
            f"input axis has {x.shape[0]} entries but weights expect {d}")
    if bias.shape != (m,):
        raise DimensionError(
            f"bias axis has {bias.shape[0]} entries but weights produce {m}")
    return Tensor(weights.data @ x.data + bias.data)


def dense_backward(x: Tensor, weights: Tensor, upstream: Tensor):
    m, d = weights.shape
    if upstream.shape != (m,):
        raise DimensionError(
            f"upstream axis has {upstream.shape[0]} entries, expected {m}")
    dx = weights.data.T @ upstream.data
    dw = np.outer(upstream.data, x.data)
    db = upstream.data.copy()
    return Tensor(dx), Tensor(dw), Tensor(db)


def dropout(x: Tensor, rate: float, mode: str, rng: np.random.Generator | None = None):
    """Inverted dropout.

    Train mode keeps each element with probability 1-rate and scales the kept
    ones by 1/(1-rate); eval mode is the identity. Returns (output, mask); the
    mask (None in eval mode or at rate 0) already includes the scale factor and
    is what the backward pass multiplies by.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return Tensor(x.data.copy()), None
    if rng is None:
        raise ValueError("train-mode dropout with rate > 0 needs a generator")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) >= rate) / keep
    return Tensor(x.data * mask), mask


def dropout_backward(mask: np.ndarray | None, upstream: Tensor) -> Tensor:
    if mask is None:
        return Tensor(upstream.data.copy())
    return Tensor(upstream.data * mask)


def softmax_cross_entropy(logits: Tensor, label: int):
    """Loss and logit gradient for one sample, computed with max-subtraction.

    loss = -log softmax(logits)[label]; grad = softmax(logits) - onehot(label).
    """
    (m,) = logits.shape
    if not 0 <= label < m:
        raise IndexError(f"label {label} outside [0, {m})")
    z = logits.data - logits.data.max()
    ez = np.exp(z)
    total = ez.sum()
    loss = float(np.log(total) - z[label])
    grad = ez / total
    grad[label] -= 1.0
    return loss, Tensor(grad)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """Bias-corrected first/second moment state, keyed by parameter name.

    Moment buffers are created lazily and only for non-frozen parameters.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    moments: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState) -> None:
    """One optimizer step over the non-frozen parameters, in place.

    grads maps parameter name -> gradient array; a missing gradient for a
    non-frozen parameter is a contract violation. Frozen parameters are left
    bit-identical and their gradients (if supplied) ignored.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p in params:
        if p.frozen:
            continue
        if p.name not in grads:
            raise ValueError(f"no gradient supplied for trainable parameter {p.name!r}")
        g = np.asarray(grads[p.name], dtype=np.float64)
        if g.shape != p.tensor.shape:
            raise DimensionError(
                f"gradient shape {g.shape} for {p.name!r} does not match {p.tensor.shape}")
        if p.name not in state.moments:
            state.moments[p.name] = (np.zeros(g.shape), np.zeros(g.shape))
        m, v = state.moments[p.name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.tensor.data -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
