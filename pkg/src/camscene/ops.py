"""Float32 layer kernels: convolutions, fully-connected, pooling, activations,
batch-norm folding and the inverted-residual block.

All kernels are pure functions over immutable tensors. Convolutions are
direct: the kernel taps are walked in (row, col) order and each tap
contributes one channel contraction, so every output element accumulates in
a fixed order regardless of caller threading.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import Tensor

# Published selu constants.
SELU_ALPHA = np.float32(1.6732632423)
SELU_LAMBDA = np.float32(1.0507009873)


class OpError(ValueError):
    """Kernel precondition violation (shape/channel mismatch, bad spec)."""


class ActivationKind(enum.IntEnum):
    NONE = 0
    RELU = 1
    RELU6 = 2
    SIGMOID = 3
    TANH = 4
    SELU = 5
    SOFTMAX = 6


class Padding(enum.IntEnum):
    SAME = 0
    VALID = 1


@dataclass(frozen=True)
class ConvSpec:
    kernel_h: int
    kernel_w: int
    stride: int = 1
    padding: Padding = Padding.SAME
    activation: ActivationKind = ActivationKind.NONE

    def __post_init__(self):
        if self.kernel_h < 1 or self.kernel_w < 1:
            raise OpError("kernel dims must be >= 1")
        if self.stride < 1:
            raise OpError("stride must be >= 1")


@dataclass(frozen=True)
class BatchNormParams:
    """Per-channel inference-time batch normalization parameters."""

    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    epsilon: float = 1e-3

    def __post_init__(self):
        vecs = {"gamma": self.gamma, "beta": self.beta,
                "mean": self.mean, "variance": self.variance}
        length = None
        for name, v in vecs.items():
            arr = np.asarray(v, dtype=np.float32)
            if arr.ndim != 1:
                raise OpError(f"batchnorm {name} must be 1-D")
            if length is None:
                length = arr.size
            elif arr.size != length:
                raise OpError("batchnorm vectors must share one channel length")
            object.__setattr__(self, name, arr)
        if np.any(self.variance < 0):
            raise OpError("batchnorm variance must be >= 0")
        if not self.epsilon > 0:
            raise OpError("batchnorm epsilon must be > 0")

    @property
    def channels(self) -> int:
        return self.gamma.size


def same_padding(in_size: int, kernel: int, stride: int) -> tuple[int, int]:
    """Total pad = max((ceil(in/s)-1)*s + k - in, 0), split floor-left/ceil-right."""
    out = -(-in_size // stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    lo = total // 2
    return lo, total - lo


def conv_output_size(in_size: int, kernel: int, stride: int, padding: Padding) -> int:
    if padding == Padding.SAME:
        return -(-in_size // stride)
    out = (in_size - kernel) // stride + 1
    if out < 1:
        raise OpError(f"valid padding leaves no output: input {in_size}, kernel {kernel}")
    return out


def _padded_input(x: np.ndarray, spec: ConvSpec) -> tuple[np.ndarray, int, int]:
    n, h, w, _ = x.shape
    oh = conv_output_size(h, spec.kernel_h, spec.stride, spec.padding)
    ow = conv_output_size(w, spec.kernel_w, spec.stride, spec.padding)
    if spec.padding == Padding.SAME:
        ph = same_padding(h, spec.kernel_h, spec.stride)
        pw = same_padding(w, spec.kernel_w, spec.stride)
        if ph != (0, 0) or pw != (0, 0):
            x = np.pad(x, ((0, 0), ph, pw, (0, 0)))
    return x, oh, ow


def _tap(x: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    return x[:, kh:kh + stride * oh:stride, kw:kw + stride * ow:stride, :]


def apply_activation(x: Tensor, kind: ActivationKind) -> Tensor:
    if kind == ActivationKind.NONE:
        return x
    if kind == ActivationKind.SOFTMAX:
        return Tensor(softmax(x.data))
    return Tensor(activate(x.data, kind))


def activate(x: np.ndarray, kind: ActivationKind) -> np.ndarray:
    """Element-wise activation in float32 (softmax excluded, see softmax())."""
    if kind == ActivationKind.NONE:
        return x
    if kind == ActivationKind.RELU:
        return np.maximum(x, np.float32(0.0))
    if kind == ActivationKind.RELU6:
        return np.clip(x, np.float32(0.0), np.float32(6.0))
    if kind == ActivationKind.SIGMOID:
        # Split by sign to avoid exp overflow.
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    if kind == ActivationKind.TANH:
        return np.tanh(x)
    if kind == ActivationKind.SELU:
        neg = SELU_ALPHA * np.expm1(np.minimum(x, np.float32(0.0)))
        return (SELU_LAMBDA * np.where(x > 0, x, neg)).astype(np.float32)
    if kind == ActivationKind.SOFTMAX:
        raise OpError("softmax is a final-layer normalization; use softmax()")
    raise OpError(f"unknown activation {kind!r}")


def softmax(x: np.ndarray) -> np.ndarray:
    """Softmax over the channel axis of a (1, 1, 1, C) logit tensor."""
    if x.shape[0] != 1 or x.shape[1] != 1 or x.shape[2] != 1:
        raise OpError(f"softmax expects (1, 1, 1, C) logits, got {x.shape}")
    shifted = x - np.max(x)
    ex = np.exp(shifted.astype(np.float32))
    return (ex / np.sum(ex)).astype(np.float32)


def _finish(acc: np.ndarray, bias: Optional[np.ndarray],
            activation: ActivationKind) -> np.ndarray:
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float32)
        if bias.ndim != 1 or bias.size != acc.shape[-1]:
            raise OpError(f"bias length {bias.size} does not match {acc.shape[-1]} output channels")
        acc = acc + bias
    return activate(acc, activation)


def conv2d(x: Tensor, weights: Tensor, bias: Optional[np.ndarray],
           spec: ConvSpec) -> Tensor:
    """Cross-correlation with (kh, kw, in_c, out_c) weights."""
    w = weights.data
    if w.shape[0] != spec.kernel_h or w.shape[1] != spec.kernel_w:
        raise OpError(f"weights {w.shape} do not match kernel spec "
                      f"{spec.kernel_h}x{spec.kernel_w}")
    cin = x.shape.c
    if w.shape[2] != cin:
        raise OpError(f"conv2d channel mismatch: input has {cin}, weights expect {w.shape[2]}")
    cout = w.shape[3]
    xp, oh, ow = _padded_input(x.data, spec)
    n = x.shape.n
    acc = np.zeros((n * oh * ow, cout), dtype=np.float32)
    for kh in range(spec.kernel_h):
        for kw in range(spec.kernel_w):
            tap = _tap(xp, kh, kw, spec.stride, oh, ow).reshape(-1, cin)
            acc += tap @ w[kh, kw]
    out = _finish(acc, bias, spec.activation)
    return Tensor(out.reshape(n, oh, ow, cout))


def depthwise_conv2d(x: Tensor, weights: Tensor, bias: Optional[np.ndarray],
                     spec: ConvSpec) -> Tensor:
    """Per-channel convolution with (kh, kw, channels, 1) weights."""
    w = weights.data
    if w.shape[0] != spec.kernel_h or w.shape[1] != spec.kernel_w or w.shape[3] != 1:
        raise OpError(f"depthwise weights {w.shape} do not match spec "
                      f"{spec.kernel_h}x{spec.kernel_w}x?x1")
    c = x.shape.c
    if w.shape[2] != c:
        raise OpError(f"depthwise channel mismatch: input has {c}, weights expect {w.shape[2]}")
    xp, oh, ow = _padded_input(x.data, spec)
    n = x.shape.n
    acc = np.zeros((n, oh, ow, c), dtype=np.float32)
    for kh in range(spec.kernel_h):
        for kw in range(spec.kernel_w):
            acc += _tap(xp, kh, kw, spec.stride, oh, ow) * w[kh, kw, :, 0]
    return Tensor(_finish(acc, bias, spec.activation))


def fully_connected(x: Tensor, weights: Tensor, bias: Optional[np.ndarray],
                    activation: ActivationKind = ActivationKind.NONE) -> Tensor:
    """Affine map on a flat (n, 1, 1, D) tensor with (1, 1, D, U) weights."""
    if x.shape.h != 1 or x.shape.w != 1:
        raise OpError(f"fully_connected expects a flat tensor, got {x.shape}")
    w = weights.data.reshape(weights.data.shape[-2], weights.data.shape[-1])
    d = x.shape.c
    if w.shape[0] != d:
        raise OpError(f"fully_connected dimension mismatch: input {d}, weights expect {w.shape[0]}")
    flat = x.data.reshape(x.shape.n, d)
    out = _finish(flat @ w, bias, activation)
    return Tensor(out.reshape(x.shape.n, 1, 1, w.shape[1]))


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean, shape (n, 1, 1, C)."""
    return Tensor(np.mean(x.data, axis=(1, 2), keepdims=True, dtype=np.float32))


def flatten(x: Tensor) -> Tensor:
    n = x.shape.n
    return Tensor(np.ascontiguousarray(x.data).reshape(n, 1, 1, -1))


def fold_batchnorm(weights: Tensor, bias: Optional[np.ndarray],
                   bn: BatchNormParams) -> tuple[Tensor, np.ndarray]:
    """Absorb BN into conv weights/bias: w' = w*g/sqrt(v+e), b' = (b-m)*g/sqrt(v+e) + beta.

    The output-channel axis is the last weight axis for regular convolutions
    and axis 2 for depthwise weights (last axis of extent 1).
    """
    w = weights.data
    c = bn.channels
    if w.shape[3] == c:
        axis = 3
    elif w.shape[3] == 1 and w.shape[2] == c:
        axis = 2
    else:
        raise OpError(f"batchnorm channel length {c} does not match weights {w.shape}")
    factor = bn.gamma / np.sqrt(bn.variance + np.float32(bn.epsilon))
    factor = factor.astype(np.float32)
    b = np.zeros(c, dtype=np.float32) if bias is None else np.asarray(bias, dtype=np.float32)
    if b.size != c:
        raise OpError(f"bias length {b.size} does not match batchnorm channels {c}")
    shape = [1, 1, 1, 1]
    shape[axis] = c
    folded_w = (w * factor.reshape(shape)).astype(np.float32)
    folded_b = ((b - bn.mean) * factor + bn.beta).astype(np.float32)
    return Tensor(folded_w), folded_b


@dataclass(frozen=True)
class ConvParams:
    """Weights + bias + spec for one convolution stage of a composite block."""

    weights: Tensor
    bias: Optional[np.ndarray]
    spec: ConvSpec


def inverted_residual(x: Tensor, expand: Optional[ConvParams],
                      depthwise: ConvParams, project: ConvParams,
                      use_residual: bool) -> Tensor:
    """1x1 expansion (relu6) -> depthwise (relu6) -> 1x1 linear projection,
    with an optional skip connection.

    ``expand`` may be None (expansion factor 1 blocks start at the depthwise
    stage). The residual is only legal at stride 1 with matching channels.
    """
    if use_residual:
        if depthwise.spec.stride != 1:
            raise OpError("residual connection requires stride 1")
        out_c = project.weights.data.shape[3]
        if out_c != x.shape.c:
            raise OpError(f"residual channel mismatch: input {x.shape.c}, projection {out_c}")
    h = x
    if expand is not None:
        h = conv2d(h, expand.weights, expand.bias, expand.spec)
    h = depthwise_conv2d(h, depthwise.weights, depthwise.bias, depthwise.spec)
    h = conv2d(h, project.weights, project.bias, project.spec)
    if use_residual:
        if h.shape != x.shape:
            raise OpError(f"residual shape mismatch: {x.shape} vs {h.shape}")
        h = Tensor(x.data + h.data)
    return h
