"""Post-training INT8 quantization: min/max calibration over representative
images and float -> int8 model transformation.

Scheme: per-channel symmetric int8 weights, per-tensor asymmetric int8
activations (ranges widened to include zero), int32 biases at the combined
input*weight scale. Softmax stays float (logits are dequantized first).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .graph import INPUT_QUANT, LayerDesc, LayerKind, Model, WeightSet, run_layers, validate
from .qops import INT32_MAX, INT32_MIN, LUT_ACTIVATIONS
from .tensor import (Tensor, params_from_range, per_channel_weight_params,
                     quantize_array)


class QuantizeError(ValueError):
    """Calibration coverage or quantization precondition failure."""


@dataclass
class CalibrationStats:
    """Running per-activation-tensor min/max over the calibration set."""

    ranges: dict = field(default_factory=dict)   # key -> (min, max)
    image_count: int = 0

    def observe(self, key: str, values: np.ndarray) -> None:
        lo = float(values.min())
        hi = float(values.max())
        if key in self.ranges:
            old_lo, old_hi = self.ranges[key]
            self.ranges[key] = (min(old_lo, lo), max(old_hi, hi))
        else:
            self.ranges[key] = (lo, hi)

    def merge(self, other: "CalibrationStats") -> "CalibrationStats":
        merged = CalibrationStats(dict(self.ranges), self.image_count + other.image_count)
        for key, (lo, hi) in other.ranges.items():
            if key in merged.ranges:
                mlo, mhi = merged.ranges[key]
                merged.ranges[key] = (min(mlo, lo), max(mhi, hi))
            else:
                merged.ranges[key] = (lo, hi)
        return merged

    def range_of(self, key: str) -> tuple[float, float]:
        try:
            return self.ranges[key]
        except KeyError:
            raise QuantizeError(f"calibration stats missing activation tensor {key!r}") from None


def calibrate(model: Model, images: Iterable[Tensor]) -> CalibrationStats:
    """Run float inference per image, recording min/max of every layer output
    (composite stages and lookup-table pre-activations included)."""
    if model.quantized:
        raise QuantizeError("calibration runs on the float model")
    stats = CalibrationStats()
    for image in images:
        stats.observe("input", image.data)
        run_layers(model, image, record=lambda key, t: stats.observe(key, t.data))
        stats.image_count += 1
    if stats.image_count == 0:
        raise QuantizeError("calibration needs at least one image")
    return stats


def _quantize_weight_set(ws: WeightSet, in_scale: float, axis: int) -> WeightSet:
    w = ws.weights.data
    wq_params = per_channel_weight_params(w, axis)
    codes = quantize_array(w, wq_params)
    bias_scale = (in_scale * wq_params.scale).astype(np.float64)
    bias_q = np.rint(ws.bias.astype(np.float64) / bias_scale)
    if bias_q.min(initial=0) < INT32_MIN or bias_q.max(initial=0) > INT32_MAX:
        raise QuantizeError("quantized bias overflows int32")
    return WeightSet(Tensor(codes, wq_params), bias_q.astype(np.int32))


def quantize_model(model: Model, stats: CalibrationStats) -> Model:
    """Transform a float model into its int8 sibling using calibrated ranges."""
    diags = validate(model)
    if diags:
        raise QuantizeError("model failed validation: " + "; ".join(diags))
    if model.quantized:
        raise QuantizeError("model is already quantized")
    layers: list[LayerDesc] = []
    current = INPUT_QUANT  # activation params flowing into the next layer
    for i, layer in enumerate(model.layers):
        key = f"L{i}"
        new = LayerDesc(layer.kind, activation=layer.activation, stride=layer.stride,
                        padding=layer.padding, use_residual=layer.use_residual,
                        dropout_rate=layer.dropout_rate)
        if layer.kind in (LayerKind.CONV, LayerKind.FULLY_CONNECTED,
                          LayerKind.DEPTHWISE_CONV):
            axis = 2 if layer.kind == LayerKind.DEPTHWISE_CONV else 3
            new.main = _quantize_weight_set(layer.main, current.scalar_scale(), axis)
            new.out_quant = params_from_range(*stats.range_of(key))
            if layer.activation in LUT_ACTIVATIONS:
                new.stage_quants["preact"] = params_from_range(*stats.range_of(f"{key}.preact"))
            current = new.out_quant
        elif layer.kind == LayerKind.INVERTED_RESIDUAL:
            block_in = current
            if layer.expand is not None:
                expand_q = params_from_range(*stats.range_of(f"{key}.expand"))
                new.expand = _quantize_weight_set(layer.expand, current.scalar_scale(), 3)
                new.stage_quants["expand"] = expand_q
                current = expand_q
            dw_q = params_from_range(*stats.range_of(f"{key}.dw"))
            new.main = _quantize_weight_set(layer.main, current.scalar_scale(), 2)
            new.stage_quants["dw"] = dw_q
            current = dw_q
            proj_q = params_from_range(*stats.range_of(f"{key}.proj"))
            new.project = _quantize_weight_set(layer.project, current.scalar_scale(), 3)
            if layer.use_residual:
                new.stage_quants["proj"] = proj_q
                new.out_quant = params_from_range(*stats.range_of(key))
            else:
                # Without the skip connection the projection IS the block output.
                new.out_quant = params_from_range(*stats.range_of(key))
                new.stage_quants["proj"] = new.out_quant
            current = new.out_quant
        # gap / flatten / dropout / softmax carry no parameters; activation
        # params propagate unchanged.
        layers.append(new)
    quantized = Model(model.input_h, model.input_w, model.input_c, layers,
                      labels=model.labels, backbone=model.backbone, quantized=True)
    diags = validate(quantized)
    if diags:
        raise QuantizeError("quantized model failed validation: " + "; ".join(diags))
    return quantized
