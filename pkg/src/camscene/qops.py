"""Integer kernels for int8 inference.

Accumulation is 32-bit (held in int64 numpy buffers, range-asserted), and
requantization to the output scale uses int32 fixed-point multipliers with a
rounding right shift (half to even). No float arithmetic happens between the
quantized input and the logits; sigmoid/tanh/selu run through int8 lookup
tables built once at quantization time.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .ops import (ActivationKind, ConvSpec, OpError, Padding, activate,
                  conv_output_size, same_padding)
from .tensor import QMAX, QMIN, QuantParams, Tensor, dequantize_array, quantize_array

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

# Fixed-point fraction bits for the two-input add rescale.
ADD_FRAC_BITS = 20

# Activations realized as int8 lookup tables.
LUT_ACTIVATIONS = (ActivationKind.SIGMOID, ActivationKind.TANH, ActivationKind.SELU)


def quantize_multiplier(m: float) -> tuple[int, int]:
    """Decompose a positive real multiplier as m ~= m_q * 2**-shift with
    m_q in [2^30, 2^31) and shift >= 0."""
    if not (m > 0.0 and math.isfinite(m)):
        raise OpError(f"requantization multiplier must be positive, got {m}")
    mant, exp = math.frexp(m)  # m = mant * 2**exp, mant in [0.5, 1)
    m_q = round(mant * (1 << 31))
    if m_q == 1 << 31:
        m_q >>= 1
        exp += 1
    shift = 31 - exp
    if shift < 0:
        raise OpError(f"multiplier {m} too large to requantize")
    return m_q, shift


def rounding_rshift(x: np.ndarray, shift) -> np.ndarray:
    """Arithmetic right shift with round-half-to-even, elementwise int64."""
    shift = np.asarray(shift, dtype=np.int64)
    if np.any(shift < 0):
        raise OpError("negative requantization shift")
    floor = x >> shift
    safe = np.maximum(shift, 1)
    rem = x & ((np.int64(1) << safe) - 1)
    half = np.int64(1) << (safe - 1)
    up = (rem > half) | ((rem == half) & ((floor & 1) == 1))
    return np.where(shift == 0, x, floor + up)


def _channel_multipliers(in_scale: float, w: QuantParams, target_scale: float,
                         channels: int) -> tuple[np.ndarray, np.ndarray]:
    w_scales = w.scale if w.per_channel else np.repeat(w.scale, channels)
    if w_scales.size != channels:
        raise OpError(f"weight scale count {w_scales.size} != {channels} output channels")
    m_qs = np.empty(channels, dtype=np.int64)
    shifts = np.empty(channels, dtype=np.int64)
    for i, ws in enumerate(w_scales):
        m_qs[i], shifts[i] = quantize_multiplier(in_scale * float(ws) / target_scale)
    return m_qs, shifts


def build_activation_lut(kind: ActivationKind, preact: QuantParams,
                         out: QuantParams) -> np.ndarray:
    """int8 -> int8 table mapping pre-activation codes through ``kind``."""
    if kind not in LUT_ACTIVATIONS:
        raise OpError(f"{kind!r} has no lookup-table form")
    codes = np.arange(QMIN, QMAX + 1, dtype=np.int8)
    x = dequantize_array(codes, preact)
    y = activate(x, kind)
    return quantize_array(y, out)


def apply_lut(codes: np.ndarray, lut: np.ndarray) -> np.ndarray:
    return lut[codes.astype(np.int16) - QMIN]


def _assert_int32(acc: np.ndarray) -> None:
    assert acc.min(initial=0) >= INT32_MIN and acc.max(initial=0) <= INT32_MAX, \
        "int8 kernel accumulator overflowed 32 bits"


def _requant_finish(acc: np.ndarray, out_q: QuantParams,
                    activation: ActivationKind, m_qs: np.ndarray,
                    shifts: np.ndarray, lut: Optional[np.ndarray],
                    lut_target: Optional[QuantParams]) -> np.ndarray:
    """acc (int64, ..., C) -> int8 codes at out_q, activation applied."""
    _assert_int32(acc)
    scaled = rounding_rshift(acc * m_qs, shifts)
    if lut is not None:
        pre = np.clip(scaled + lut_target.zero_point, QMIN, QMAX).astype(np.int8)
        return apply_lut(pre, lut)
    zp = out_q.zero_point
    lo, hi = QMIN, QMAX
    if activation == ActivationKind.RELU:
        lo = zp  # code of real 0
    elif activation == ActivationKind.RELU6:
        lo = zp
        hi = int(np.clip(round(6.0 / out_q.scalar_scale()) + zp, QMIN, QMAX))
    elif activation != ActivationKind.NONE:
        raise OpError(f"activation {activation!r} requires a lookup table")
    return np.clip(scaled + zp, lo, hi).astype(np.int8)


def _stage_requant(in_q: QuantParams, weights: Tensor, out_q: QuantParams,
                   activation: ActivationKind, channels: int,
                   preact_q: Optional[QuantParams]):
    """Precompute multipliers (and LUT) for one conv/fc stage."""
    lut = None
    target = out_q
    if activation in LUT_ACTIVATIONS:
        if preact_q is None:
            raise OpError(f"{activation!r} needs pre-activation quant params")
        lut = build_activation_lut(activation, preact_q, out_q)
        target = preact_q
    m_qs, shifts = _channel_multipliers(in_q.scalar_scale(), weights.quant,
                                        target.scalar_scale(), channels)
    return m_qs, shifts, lut, target if lut is not None else None


def _check_quantized(x: Tensor, weights: Tensor, bias: np.ndarray) -> None:
    if x.quant is None or weights.quant is None:
        raise OpError("quantized kernels require QuantParams on input and weights")
    if np.asarray(bias).dtype != np.int32:
        raise OpError("quantized kernels require an int32 bias")


def conv2d_quantized(x: Tensor, weights: Tensor, bias: np.ndarray,
                     spec: ConvSpec, out_q: QuantParams,
                     preact_q: Optional[QuantParams] = None) -> Tensor:
    _check_quantized(x, weights, bias)
    w = weights.data
    cin, cout = w.shape[2], w.shape[3]
    if cin != x.shape.c:
        raise OpError(f"conv2d channel mismatch: input has {x.shape.c}, weights expect {cin}")
    m_qs, shifts, lut, lut_t = _stage_requant(x.quant, weights, out_q,
                                              spec.activation, cout, preact_q)
    zp_in = x.quant.zero_point
    n, h, wdim = x.shape.n, x.shape.h, x.shape.w
    oh = conv_output_size(h, spec.kernel_h, spec.stride, spec.padding)
    ow = conv_output_size(wdim, spec.kernel_w, spec.stride, spec.padding)
    # Pad with the input zero-point so padding contributes nothing after centering.
    xc = x.data.astype(np.int64) - zp_in
    if spec.padding == Padding.SAME:
        ph = same_padding(h, spec.kernel_h, spec.stride)
        pw = same_padding(wdim, spec.kernel_w, spec.stride)
        if ph != (0, 0) or pw != (0, 0):
            xc = np.pad(xc, ((0, 0), ph, pw, (0, 0)))
    acc = np.zeros((n * oh * ow, cout), dtype=np.int64)
    w64 = w.astype(np.int64)
    for kh in range(spec.kernel_h):
        for kw in range(spec.kernel_w):
            tap = xc[:, kh:kh + spec.stride * oh:spec.stride,
                     kw:kw + spec.stride * ow:spec.stride, :].reshape(-1, cin)
            acc += tap @ w64[kh, kw]
    acc += bias.astype(np.int64)
    out = _requant_finish(acc, out_q, spec.activation, m_qs, shifts, lut, lut_t)
    return Tensor(out.reshape(n, oh, ow, cout), out_q)


def depthwise_conv2d_quantized(x: Tensor, weights: Tensor, bias: np.ndarray,
                               spec: ConvSpec, out_q: QuantParams,
                               preact_q: Optional[QuantParams] = None) -> Tensor:
    _check_quantized(x, weights, bias)
    w = weights.data
    c = w.shape[2]
    if c != x.shape.c or w.shape[3] != 1:
        raise OpError(f"depthwise channel mismatch: input has {x.shape.c}, weights {w.shape}")
    m_qs, shifts, lut, lut_t = _stage_requant(x.quant, weights, out_q,
                                              spec.activation, c, preact_q)
    zp_in = x.quant.zero_point
    n, h, wdim = x.shape.n, x.shape.h, x.shape.w
    oh = conv_output_size(h, spec.kernel_h, spec.stride, spec.padding)
    ow = conv_output_size(wdim, spec.kernel_w, spec.stride, spec.padding)
    xc = x.data.astype(np.int64) - zp_in
    if spec.padding == Padding.SAME:
        ph = same_padding(h, spec.kernel_h, spec.stride)
        pw = same_padding(wdim, spec.kernel_w, spec.stride)
        if ph != (0, 0) or pw != (0, 0):
            xc = np.pad(xc, ((0, 0), ph, pw, (0, 0)))
    acc = np.zeros((n, oh, ow, c), dtype=np.int64)
    w64 = w.astype(np.int64)
    for kh in range(spec.kernel_h):
        for kw in range(spec.kernel_w):
            tap = xc[:, kh:kh + spec.stride * oh:spec.stride,
                     kw:kw + spec.stride * ow:spec.stride, :]
            acc += tap * w64[kh, kw, :, 0]
    acc += bias.astype(np.int64)
    out = _requant_finish(acc, out_q, spec.activation, m_qs, shifts, lut, lut_t)
    return Tensor(out, out_q)


def fully_connected_quantized(x: Tensor, weights: Tensor, bias: np.ndarray,
                              activation: ActivationKind, out_q: QuantParams,
                              preact_q: Optional[QuantParams] = None) -> Tensor:
    _check_quantized(x, weights, bias)
    if x.shape.h != 1 or x.shape.w != 1:
        raise OpError(f"fully_connected expects a flat tensor, got {x.shape}")
    w = weights.data.reshape(weights.data.shape[-2], weights.data.shape[-1])
    d, units = w.shape
    if d != x.shape.c:
        raise OpError(f"fully_connected dimension mismatch: input {x.shape.c}, weights expect {d}")
    m_qs, shifts, lut, lut_t = _stage_requant(x.quant, weights, out_q,
                                              activation, units, preact_q)
    xc = x.data.reshape(x.shape.n, d).astype(np.int64) - x.quant.zero_point
    acc = xc @ w.astype(np.int64) + bias.astype(np.int64)
    out = _requant_finish(acc, out_q, activation, m_qs, shifts, lut, lut_t)
    return Tensor(out.reshape(x.shape.n, 1, 1, units), out_q)


def global_avg_pool_quantized(x: Tensor) -> Tensor:
    """Integer spatial mean (round half to even); scale/zero-point unchanged."""
    if x.quant is None:
        raise OpError("quantized pooling requires QuantParams")
    n, h, w, c = x.shape.as_tuple()
    total = x.data.astype(np.int64).sum(axis=(1, 2), keepdims=True)
    count = h * w
    floor = np.floor_divide(total, count)
    rem = total - floor * count
    up = (2 * rem > count) | ((2 * rem == count) & ((floor & 1) == 1))
    out = (floor + up).astype(np.int8)
    return Tensor(out.reshape(n, 1, 1, c), x.quant)


def add_quantized(a: Tensor, b: Tensor, out_q: QuantParams) -> Tensor:
    """Elementwise add of two int8 tensors, rescaled into ``out_q``."""
    if a.quant is None or b.quant is None:
        raise OpError("quantized add requires QuantParams on both inputs")
    if a.data.shape != b.data.shape:
        raise OpError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    one = np.int64(1) << ADD_FRAC_BITS
    ma = np.int64(round(a.quant.scalar_scale() / out_q.scalar_scale() * one))
    mb = np.int64(round(b.quant.scalar_scale() / out_q.scalar_scale() * one))
    t = ((a.data.astype(np.int64) - a.quant.zero_point) * ma
         + (b.data.astype(np.int64) - b.quant.zero_point) * mb)
    y = rounding_rshift(t, ADD_FRAC_BITS) + out_q.zero_point
    return Tensor(np.clip(y, QMIN, QMAX).astype(np.int8), out_q)
