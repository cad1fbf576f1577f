"""Rank-4 tensor container and affine int8 quantization metadata.

Layout is fixed to (batch, row, col, channel); buffers are C-contiguous
float32 or int8 numpy arrays. Tensors are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

# Quantized code domain.
QMIN = -128
QMAX = 127


class TensorError(ValueError):
    """Invalid tensor or quantization-parameter construction."""


@dataclass(frozen=True)
class Shape:
    """(batch, rows, cols, channels), all dims >= 1."""

    n: int
    h: int
    w: int
    c: int

    def __post_init__(self):
        for name, dim in zip("nhwc", (self.n, self.h, self.w, self.c)):
            if not isinstance(dim, (int, np.integer)) or dim < 1:
                raise TensorError(f"shape dim {name}={dim!r} must be an integer >= 1")
        if self.element_count() >= 2**63:
            raise TensorError("shape element count exceeds addressable range")

    def element_count(self) -> int:
        return self.n * self.h * self.w * self.c

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n, self.h, self.w, self.c)


@dataclass(frozen=True)
class QuantParams:
    """Affine int8 quantization: real = (code - zero_point) * scale.

    Per-tensor: ``scale`` is a single positive float, ``axis`` is None.
    Per-channel (symmetric weights): ``scale`` is one positive float per
    channel along ``axis`` and ``zero_point`` must be 0.
    """

    scale: np.ndarray = field(repr=False)
    zero_point: int = 0
    axis: Optional[int] = None

    def __init__(self, scale: Union[float, Sequence[float], np.ndarray],
                 zero_point: int = 0, axis: Optional[int] = None):
        scale_arr = np.atleast_1d(np.asarray(scale, dtype=np.float32))
        if scale_arr.ndim != 1 or scale_arr.size == 0:
            raise TensorError("scale must be a scalar or a 1-D sequence")
        if not np.all(np.isfinite(scale_arr)) or np.any(scale_arr <= 0.0):
            raise TensorError("invalid QuantParams: every scale must be finite and > 0")
        if not isinstance(zero_point, (int, np.integer)):
            raise TensorError("zero_point must be an integer")
        if not QMIN <= zero_point <= QMAX:
            raise TensorError(f"invalid QuantParams: zero_point {zero_point} outside [{QMIN}, {QMAX}]")
        if axis is not None:
            if not isinstance(axis, (int, np.integer)) or not 0 <= axis <= 3:
                raise TensorError(f"axis {axis!r} must be in [0, 3]")
            if zero_point != 0:
                raise TensorError("per-channel quantization is symmetric: zero_point must be 0")
        elif scale_arr.size != 1:
            raise TensorError("multiple scales require an axis")
        scale_arr.setflags(write=False)
        object.__setattr__(self, "scale", scale_arr)
        object.__setattr__(self, "zero_point", int(zero_point))
        object.__setattr__(self, "axis", None if axis is None else int(axis))

    @property
    def per_channel(self) -> bool:
        return self.axis is not None

    def scalar_scale(self) -> float:
        if self.per_channel:
            raise TensorError("per-channel params have no single scale")
        return float(self.scale[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantParams):
            return NotImplemented
        return (self.zero_point == other.zero_point and self.axis == other.axis
                and np.array_equal(self.scale, other.scale))

    def broadcast_scale(self, ndim: int = 4) -> np.ndarray:
        """Scale reshaped to broadcast against an ``ndim``-rank array."""
        if not self.per_channel:
            return self.scale.reshape(())
        shape = [1] * ndim
        shape[self.axis] = self.scale.size
        return self.scale.reshape(shape)


@dataclass(frozen=True)
class Tensor:
    """Immutable rank-4 array in (batch, row, col, channel) order.

    ``quant`` is present exactly when dtype is int8.
    """

    data: np.ndarray = field(repr=False)
    quant: Optional[QuantParams] = None

    def __post_init__(self):
        arr = self.data
        if not isinstance(arr, np.ndarray) or arr.ndim != 4:
            raise TensorError("tensor data must be a rank-4 numpy array")
        if arr.dtype == np.float32:
            if self.quant is not None:
                raise TensorError("float32 tensors carry no QuantParams")
        elif arr.dtype == np.int8:
            if self.quant is None:
                raise TensorError("int8 tensors require QuantParams")
        else:
            raise TensorError(f"unsupported dtype {arr.dtype}; use float32 or int8")
        shape = Shape(*(int(d) for d in arr.shape))  # validates dims >= 1
        if self.quant is not None and self.quant.per_channel:
            axis_len = arr.shape[self.quant.axis]
            if self.quant.scale.size != axis_len:
                raise TensorError(
                    f"per-channel scale count {self.quant.scale.size} does not match "
                    f"axis {self.quant.axis} length {axis_len}")
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "_shape", shape)

    @property
    def shape(self) -> Shape:
        return self._shape  # type: ignore[attr-defined]

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self.dtype == other.dtype and self.quant == other.quant
                and np.array_equal(self.data, other.data))

    @property
    def is_quantized(self) -> bool:
        return self.quant is not None


def tensor_from(array, quant: Optional[QuantParams] = None) -> Tensor:
    """Wrap an array-like as a Tensor, padding leading 1-dims up to rank 4."""
    arr = np.asarray(array)
    if arr.ndim > 4:
        raise TensorError(f"rank {arr.ndim} not supported")
    arr = arr.reshape((1,) * (4 - arr.ndim) + arr.shape)
    if arr.dtype not in (np.float32, np.int8):
        arr = arr.astype(np.float32)
    return Tensor(arr, quant)


def quantize_array(values: np.ndarray, q: QuantParams) -> np.ndarray:
    """float32 array -> int8 codes: clamp(rint(v / scale) + zp, -128, 127).

    Rounds half to even (np.rint), matching the requantization path.
    """
    scaled = values.astype(np.float32) / q.broadcast_scale(values.ndim)
    codes = np.rint(scaled) + np.float32(q.zero_point)
    return np.clip(codes, QMIN, QMAX).astype(np.int8)


def dequantize_array(codes: np.ndarray, q: QuantParams) -> np.ndarray:
    """int8 codes -> float32: (code - zp) * scale."""
    centered = codes.astype(np.float32) - np.float32(q.zero_point)
    return (centered * q.broadcast_scale(codes.ndim)).astype(np.float32)


def quantize_tensor(t: Tensor, q: QuantParams) -> Tensor:
    if t.dtype != np.float32:
        raise TensorError("quantize_tensor expects a float32 tensor")
    if q.per_channel and q.axis >= t.data.ndim:
        raise TensorError(f"axis {q.axis} not present in tensor shape")
    return Tensor(quantize_array(t.data, q), q)


def dequantize_tensor(t: Tensor) -> Tensor:
    if t.quant is None:
        raise TensorError("dequantize_tensor requires QuantParams on the tensor")
    return Tensor(dequantize_array(t.data, t.quant))


def params_from_range(lo: float, hi: float) -> QuantParams:
    """Per-tensor asymmetric params for a calibrated activation range.

    The range is widened to include zero. A range that is degenerate after
    widening (constant-zero activation) gets scale 1/256 and zero-point 0,
    so the pipeline stays total.
    """
    lo = min(float(lo), 0.0)
    hi = max(float(hi), 0.0)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise TensorError(f"invalid calibration range [{lo}, {hi}]")
    if hi - lo < 1e-12:
        return QuantParams(1.0 / 256.0, 0)
    scale = (hi - lo) / float(QMAX - QMIN)
    zp = int(np.clip(np.rint(QMIN - lo / scale), QMIN, QMAX))
    return QuantParams(scale, zp)


def per_channel_weight_params(weights: np.ndarray, axis: int) -> QuantParams:
    """Symmetric per-channel weight params: scale_c = max|W_c| / 127.

    All-zero channels get scale 1.0 (every code is 0 regardless).
    """
    reduce_axes = tuple(i for i in range(weights.ndim) if i != axis)
    peak = np.max(np.abs(weights), axis=reduce_axes).astype(np.float64)
    scales = np.where(peak > 0.0, peak / QMAX, 1.0)
    return QuantParams(scales.astype(np.float32), 0, axis=axis)
