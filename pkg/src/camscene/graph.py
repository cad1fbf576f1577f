"""Layer-descriptor graph, the two classifier topologies, validation and the
end-to-end inference entry point.

A Model is a straight-line list of layer descriptors executed in order with
ping-pong activation buffers. Batch normalization never appears here: conv
builders fold BN parameters into weights/bias up front.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import qops
from .labels import LABELS, NUM_CATEGORIES
from .ops import (ActivationKind, BatchNormParams, ConvSpec, OpError,
                  Padding, activate, conv2d, conv_output_size,
                  depthwise_conv2d, flatten, fold_batchnorm, fully_connected,
                  global_avg_pool, softmax)
from .tensor import (QuantParams, Tensor, TensorError, dequantize_array,
                     quantize_array)

# Input activation quantization is pinned to the preprocessing contract
# range [-1, 1]; see the format documentation.
INPUT_QUANT = QuantParams(2.0 / 255.0, 0)


class GraphError(ValueError):
    """Model construction or inference precondition violation."""


class LayerKind(enum.IntEnum):
    CONV = 1
    DEPTHWISE_CONV = 2
    INVERTED_RESIDUAL = 3
    FULLY_CONNECTED = 4
    GLOBAL_AVG_POOL = 5
    FLATTEN = 6
    DROPOUT = 7
    SOFTMAX = 8


@dataclass
class WeightSet:
    """Weights + bias for one convolution/FC stage.

    Bias is float32 for float models and int32 (at input_scale*weight_scale)
    for quantized models.
    """

    weights: Tensor
    bias: np.ndarray


@dataclass
class LayerDesc:
    kind: LayerKind
    activation: ActivationKind = ActivationKind.NONE
    stride: int = 1
    padding: Padding = Padding.SAME
    main: Optional[WeightSet] = None          # conv / depthwise / fc / ir-depthwise
    expand: Optional[WeightSet] = None        # inverted residual only
    project: Optional[WeightSet] = None       # inverted residual only
    use_residual: bool = False
    dropout_rate: float = 0.0
    # Quantized models: output params, plus per-stage params for composites
    # and a pre-activation range for lookup-table activations.
    out_quant: Optional[QuantParams] = None
    stage_quants: dict = field(default_factory=dict)

    def weight_sets(self) -> list[tuple[str, WeightSet]]:
        out = []
        if self.expand is not None:
            out.append(("expand", self.expand))
        if self.main is not None:
            name = "dw" if self.kind == LayerKind.INVERTED_RESIDUAL else "main"
            out.append((name, self.main))
        if self.project is not None:
            out.append(("proj", self.project))
        return out


@dataclass
class ScenePrediction:
    """Ranked (category index, category name, probability) entries.

    Empty when threshold rejection fired.
    """

    entries: list[tuple[int, str, float]]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def is_empty(self) -> bool:
        return not self.entries

    def top(self) -> Optional[tuple[int, str, float]]:
        return self.entries[0] if self.entries else None


_BACKBONE_NAMES = {0: "generic", 1: "mobilenet-v1", 2: "mobilenet-v2"}


@dataclass
class Model:
    input_h: int
    input_w: int
    input_c: int
    layers: list[LayerDesc]
    labels: tuple[str, ...] = LABELS
    backbone: int = 0            # 0 generic, 1 v1, 2 v2
    quantized: bool = False
    version: int = 1

    def __post_init__(self):
        self.labels = tuple(self.labels)

    @property
    def name(self) -> str:
        return _BACKBONE_NAMES.get(self.backbone, "generic")

    def input_shape(self) -> tuple[int, int, int, int]:
        return (1, self.input_h, self.input_w, self.input_c)

    def parameter_count(self) -> int:
        total = 0
        for layer in self.layers:
            for _, ws in layer.weight_sets():
                total += ws.weights.data.size + ws.bias.size
        return total

    def head_parameter_count(self) -> int:
        """Parameters in the fully-connected layers after the pooled features."""
        return sum(ws.weights.data.size + ws.bias.size
                   for layer in self.layers if layer.kind == LayerKind.FULLY_CONNECTED
                   for _, ws in layer.weight_sets())


# ---------------------------------------------------------------------------
# Shape inference and validation


def _layer_output_shape(layer: LayerDesc, shape: tuple[int, int, int, int],
                        index: int) -> tuple[int, int, int, int]:
    n, h, w, c = shape
    where = f"layer {index} ({layer.kind.name.lower()})"
    if layer.kind == LayerKind.CONV:
        wt = layer.main.weights.data
        if wt.shape[2] != c:
            raise GraphError(f"{where}: expects {wt.shape[2]} input channels, got {c}")
        oh = conv_output_size(h, wt.shape[0], layer.stride, layer.padding)
        ow = conv_output_size(w, wt.shape[1], layer.stride, layer.padding)
        return (n, oh, ow, wt.shape[3])
    if layer.kind == LayerKind.DEPTHWISE_CONV:
        wt = layer.main.weights.data
        if wt.shape[2] != c:
            raise GraphError(f"{where}: expects {wt.shape[2]} channels, got {c}")
        oh = conv_output_size(h, wt.shape[0], layer.stride, layer.padding)
        ow = conv_output_size(w, wt.shape[1], layer.stride, layer.padding)
        return (n, oh, ow, c)
    if layer.kind == LayerKind.INVERTED_RESIDUAL:
        cin = c
        if layer.expand is not None:
            ew = layer.expand.weights.data
            if ew.shape[2] != cin:
                raise GraphError(f"{where}: expansion expects {ew.shape[2]} channels, got {cin}")
            cin = ew.shape[3]
        dw = layer.main.weights.data
        if dw.shape[2] != cin:
            raise GraphError(f"{where}: depthwise expects {dw.shape[2]} channels, got {cin}")
        pw = layer.project.weights.data
        if pw.shape[2] != cin:
            raise GraphError(f"{where}: projection expects {pw.shape[2]} channels, got {cin}")
        oh = conv_output_size(h, dw.shape[0], layer.stride, layer.padding)
        ow = conv_output_size(w, dw.shape[1], layer.stride, layer.padding)
        if layer.use_residual and (layer.stride != 1 or pw.shape[3] != c):
            raise GraphError(f"{where}: residual requires stride 1 and matching channels")
        return (n, oh, ow, pw.shape[3])
    if layer.kind == LayerKind.FULLY_CONNECTED:
        if h != 1 or w != 1:
            raise GraphError(f"{where}: input must be flat, got {(n, h, w, c)}")
        wt = layer.main.weights.data
        if wt.shape[2] != c:
            raise GraphError(f"{where}: expects {wt.shape[2]} inputs, got {c}")
        return (n, 1, 1, wt.shape[3])
    if layer.kind == LayerKind.GLOBAL_AVG_POOL:
        return (n, 1, 1, c)
    if layer.kind == LayerKind.FLATTEN:
        return (n, 1, 1, h * w * c)
    if layer.kind == LayerKind.DROPOUT:
        if not 0.0 <= layer.dropout_rate < 1.0:
            raise GraphError(f"{where}: dropout rate {layer.dropout_rate} outside [0, 1)")
        return shape
    if layer.kind == LayerKind.SOFTMAX:
        if n != 1 or h != 1 or w != 1:
            raise GraphError(f"{where}: softmax needs flat single-batch logits, got {(n, h, w, c)}")
        return shape
    raise GraphError(f"{where}: unknown layer kind")


def validate(model: Model) -> list[str]:
    """Chain every inter-layer shape; returns diagnostics (empty = ok)."""
    diags: list[str] = []
    if model.input_c != 3:
        diags.append(f"input spec: expected 3 channels, got {model.input_c}")
    if len(model.labels) != NUM_CATEGORIES:
        diags.append(f"label table: expected {NUM_CATEGORIES} labels, got {len(model.labels)}")
    if len(set(model.labels)) != len(model.labels) or any(not l for l in model.labels):
        diags.append("label table: labels must be unique and non-empty")
    shape = model.input_shape()
    for i, layer in enumerate(model.layers):
        try:
            shape = _layer_output_shape(layer, shape, i)
        except (GraphError, OpError, TensorError) as e:
            diags.append(str(e))
            return diags
        if model.quantized:
            diags.extend(_check_layer_quant(layer, i))
    if not model.layers or model.layers[-1].kind != LayerKind.SOFTMAX:
        diags.append("model must end with a softmax layer")
    elif shape != (1, 1, 1, NUM_CATEGORIES):
        diags.append(f"output shape {shape} is not (1, 1, 1, {NUM_CATEGORIES})")
    return diags


def _check_layer_quant(layer: LayerDesc, index: int) -> list[str]:
    diags = []
    where = f"layer {index} ({layer.kind.name.lower()})"
    for name, ws in layer.weight_sets():
        if ws.weights.quant is None:
            diags.append(f"{where}: {name} weights missing QuantParams")
        if ws.bias.dtype != np.int32:
            diags.append(f"{where}: {name} bias must be int32")
    if layer.kind in (LayerKind.CONV, LayerKind.DEPTHWISE_CONV, LayerKind.FULLY_CONNECTED):
        if layer.out_quant is None:
            diags.append(f"{where}: missing output quant params")
        if layer.activation in qops.LUT_ACTIVATIONS and "preact" not in layer.stage_quants:
            diags.append(f"{where}: missing pre-activation quant params")
    if layer.kind == LayerKind.INVERTED_RESIDUAL:
        if layer.out_quant is None:
            diags.append(f"{where}: missing output quant params")
        needed = ["dw", "proj"] + (["expand"] if layer.expand is not None else [])
        for key in needed:
            if key not in layer.stage_quants:
                diags.append(f"{where}: missing {key} stage quant params")
    return diags


# ---------------------------------------------------------------------------
# Execution


def _run_inverted_residual(layer: LayerDesc, x: Tensor,
                           record: Optional[Callable[[str, Tensor], None]]) -> Tensor:
    relu6 = ActivationKind.RELU6
    h = x
    if layer.expand is not None:
        h = conv2d(h, layer.expand.weights, layer.expand.bias,
                   ConvSpec(1, 1, 1, Padding.SAME, relu6))
        if record:
            record("expand", h)
    dw_w = layer.main.weights.data
    h = depthwise_conv2d(h, layer.main.weights, layer.main.bias,
                         ConvSpec(dw_w.shape[0], dw_w.shape[1], layer.stride,
                                  layer.padding, relu6))
    if record:
        record("dw", h)
    h = conv2d(h, layer.project.weights, layer.project.bias,
               ConvSpec(1, 1, 1, Padding.SAME, ActivationKind.NONE))
    if record:
        record("proj", h)
    if layer.use_residual:
        h = Tensor(x.data + h.data)
    return h


def _run_inverted_residual_q(layer: LayerDesc, x: Tensor) -> Tensor:
    relu6 = ActivationKind.RELU6
    h = x
    if layer.expand is not None:
        h = qops.conv2d_quantized(h, layer.expand.weights, layer.expand.bias,
                                  ConvSpec(1, 1, 1, Padding.SAME, relu6),
                                  layer.stage_quants["expand"])
    dw_w = layer.main.weights.data
    h = qops.depthwise_conv2d_quantized(
        h, layer.main.weights, layer.main.bias,
        ConvSpec(dw_w.shape[0], dw_w.shape[1], layer.stride, layer.padding, relu6),
        layer.stage_quants["dw"])
    h = qops.conv2d_quantized(h, layer.project.weights, layer.project.bias,
                              ConvSpec(1, 1, 1, Padding.SAME, ActivationKind.NONE),
                              layer.stage_quants["proj"])
    if layer.use_residual:
        h = qops.add_quantized(x, h, layer.out_quant)
    return h


def run_layers(model: Model, image: Tensor,
               record: Optional[Callable[[str, Tensor], None]] = None) -> np.ndarray:
    """Execute the layer walk; returns the (NUM_CATEGORIES,) probability vector.

    ``record`` (float models only) receives every layer output plus composite
    stage outputs, keyed "L{i}" / "L{i}.{stage}" — the calibration tap.
    """
    if image.shape.as_tuple() != model.input_shape():
        raise GraphError(f"input shape {image.shape.as_tuple()} does not match "
                         f"model spec {model.input_shape()}")
    if model.quantized:
        if image.dtype == np.float32:
            image = Tensor(quantize_array(image.data, INPUT_QUANT), INPUT_QUANT)
        return _run_quantized(model, image)
    if image.dtype != np.float32:
        raise GraphError("float model requires a float32 input tensor")
    x = image
    for i, layer in enumerate(model.layers):
        # During calibration, lookup-table activations additionally need the
        # pre-activation range: split those layers into kernel + activation.
        split_act = (record is not None and layer.activation in qops.LUT_ACTIVATIONS)
        act = ActivationKind.NONE if split_act else layer.activation
        if layer.kind == LayerKind.CONV:
            wt = layer.main.weights.data
            x = conv2d(x, layer.main.weights, layer.main.bias,
                       ConvSpec(wt.shape[0], wt.shape[1], layer.stride,
                                layer.padding, act))
        elif layer.kind == LayerKind.DEPTHWISE_CONV:
            wt = layer.main.weights.data
            x = depthwise_conv2d(x, layer.main.weights, layer.main.bias,
                                 ConvSpec(wt.shape[0], wt.shape[1], layer.stride,
                                          layer.padding, act))
        elif layer.kind == LayerKind.INVERTED_RESIDUAL:
            stage_record = None
            if record is not None:
                stage_record = lambda name, t, _i=i: record(f"L{_i}.{name}", t)
            x = _run_inverted_residual(layer, x, stage_record)
        elif layer.kind == LayerKind.FULLY_CONNECTED:
            x = fully_connected(x, layer.main.weights, layer.main.bias, act)
        elif layer.kind == LayerKind.GLOBAL_AVG_POOL:
            x = global_avg_pool(x)
        elif layer.kind == LayerKind.FLATTEN:
            x = flatten(x)
        elif layer.kind == LayerKind.DROPOUT:
            pass  # inference no-op
        elif layer.kind == LayerKind.SOFTMAX:
            x = Tensor(softmax(x.data))
        if split_act and layer.kind in (LayerKind.CONV, LayerKind.DEPTHWISE_CONV,
                                        LayerKind.FULLY_CONNECTED):
            record(f"L{i}.preact", x)
            x = Tensor(activate(x.data, layer.activation))
        if record is not None and layer.kind != LayerKind.SOFTMAX:
            record(f"L{i}", x)
    return x.data.reshape(-1)


def _run_quantized(model: Model, x: Tensor) -> np.ndarray:
    for layer in model.layers:
        if layer.kind == LayerKind.CONV:
            wt = layer.main.weights.data
            x = qops.conv2d_quantized(
                x, layer.main.weights, layer.main.bias,
                ConvSpec(wt.shape[0], wt.shape[1], layer.stride, layer.padding,
                         layer.activation),
                layer.out_quant, layer.stage_quants.get("preact"))
        elif layer.kind == LayerKind.DEPTHWISE_CONV:
            wt = layer.main.weights.data
            x = qops.depthwise_conv2d_quantized(
                x, layer.main.weights, layer.main.bias,
                ConvSpec(wt.shape[0], wt.shape[1], layer.stride, layer.padding,
                         layer.activation),
                layer.out_quant, layer.stage_quants.get("preact"))
        elif layer.kind == LayerKind.INVERTED_RESIDUAL:
            x = _run_inverted_residual_q(layer, x)
        elif layer.kind == LayerKind.FULLY_CONNECTED:
            x = qops.fully_connected_quantized(
                x, layer.main.weights, layer.main.bias, layer.activation,
                layer.out_quant, layer.stage_quants.get("preact"))
        elif layer.kind == LayerKind.GLOBAL_AVG_POOL:
            x = qops.global_avg_pool_quantized(x)
        elif layer.kind == LayerKind.FLATTEN:
            x = Tensor(np.ascontiguousarray(x.data).reshape(x.shape.n, 1, 1, -1), x.quant)
        elif layer.kind == LayerKind.DROPOUT:
            pass
        elif layer.kind == LayerKind.SOFTMAX:
            logits = dequantize_array(x.data, x.quant)
            return softmax(logits).reshape(-1)
    raise GraphError("quantized model did not end with a softmax layer")


def infer(model: Model, image: Tensor, top_k: int = 3,
          reject_threshold: float = 0.0) -> ScenePrediction:
    """Classify one preprocessed image.

    Returns the top_k classes by probability (ties broken by lower category
    index) or an empty prediction when the best probability is below
    ``reject_threshold``.
    """
    if not 1 <= top_k <= len(model.labels):
        raise GraphError(f"top_k must be in [1, {len(model.labels)}], got {top_k}")
    if not 0.0 <= reject_threshold <= 1.0:
        raise GraphError(f"reject_threshold must be in [0, 1], got {reject_threshold}")
    probs = run_layers(model, image)
    if float(np.max(probs)) < reject_threshold:
        return ScenePrediction([])
    order = np.argsort(-probs, kind="stable")[:top_k]
    return ScenePrediction([(int(i), model.labels[int(i)], float(probs[i])) for i in order])


# ---------------------------------------------------------------------------
# Topology builders

# V1 depthwise-separable stages: (depthwise stride, pointwise out channels).
V1_STAGES = ((1, 64), (2, 128), (1, 128), (2, 256), (1, 256), (2, 512),
             (1, 512), (1, 512), (1, 512), (1, 512), (1, 512),
             (2, 1024), (1, 1024))

# V2 inverted-residual stages: (expansion, out channels, repeats, first stride).
V2_STAGES = ((1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
             (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1))
V2_FEATURES = 1280

INPUT_SIZE = 224


class BundleError(GraphError):
    """Missing or misshaped entry in a parameter bundle."""


def _bundle_weights(bundle: dict, key: str, shape: tuple) -> Tensor:
    try:
        arr = np.asarray(bundle[f"{key}/weights"], dtype=np.float32)
    except KeyError:
        raise BundleError(f"missing weights for {key}") from None
    if arr.ndim < 4:
        arr = arr.reshape((1,) * (4 - arr.ndim) + arr.shape)
    if arr.shape != shape:
        raise BundleError(f"bad shape for {key}/weights: got {arr.shape}, want {shape}")
    return Tensor(arr)


def _bundle_conv(bundle: dict, key: str, shape: tuple) -> WeightSet:
    """Fetch a conv/fc stage, folding optional batch-norm parameters."""
    w = _bundle_weights(bundle, key, shape)
    cout = shape[-1] if shape[-1] != 1 else shape[-2]
    bias = bundle.get(f"{key}/bias")
    bias = np.zeros(cout, dtype=np.float32) if bias is None else np.asarray(bias, dtype=np.float32)
    if bias.shape != (cout,):
        raise BundleError(f"bad shape for {key}/bias: got {bias.shape}, want ({cout},)")
    if f"{key}/bn/gamma" in bundle:
        try:
            bn = BatchNormParams(
                gamma=bundle[f"{key}/bn/gamma"], beta=bundle[f"{key}/bn/beta"],
                mean=bundle[f"{key}/bn/mean"], variance=bundle[f"{key}/bn/variance"],
                epsilon=float(bundle.get(f"{key}/bn/epsilon", 1e-3)))
        except KeyError as e:
            raise BundleError(f"incomplete batchnorm for {key}: missing {e}") from None
        try:
            w, bias = fold_batchnorm(w, bias, bn)
        except OpError as e:
            raise BundleError(f"batchnorm fold failed for {key}: {e}") from None
    return WeightSet(w, bias)


def _head_fc(bundle: dict, key: str, d_in: int, d_out: int,
             activation: ActivationKind) -> LayerDesc:
    ws = _bundle_conv(bundle, key, (1, 1, d_in, d_out))
    return LayerDesc(LayerKind.FULLY_CONNECTED, activation=activation, main=ws)


def build_mobilenet_v1_classifier(bundle: dict) -> Model:
    """Standard V1 backbone (full first conv + 13 depthwise-separable stages)
    with the 1024-unit sigmoid head."""
    relu = ActivationKind.RELU
    layers = [LayerDesc(LayerKind.CONV, activation=relu, stride=2,
                        main=_bundle_conv(bundle, "conv0", (3, 3, 3, 32)))]
    cin = 32
    for i, (stride, cout) in enumerate(V1_STAGES, start=1):
        layers.append(LayerDesc(LayerKind.DEPTHWISE_CONV, activation=relu, stride=stride,
                                main=_bundle_conv(bundle, f"ds{i}/dw", (3, 3, cin, 1))))
        layers.append(LayerDesc(LayerKind.CONV, activation=relu,
                                main=_bundle_conv(bundle, f"ds{i}/pw", (1, 1, cin, cout))))
        cin = cout
    layers.append(LayerDesc(LayerKind.GLOBAL_AVG_POOL))
    layers.append(LayerDesc(LayerKind.FLATTEN))
    layers.append(_head_fc(bundle, "head/fc1", 1024, 1024, ActivationKind.SIGMOID))
    layers.append(LayerDesc(LayerKind.DROPOUT, dropout_rate=0.7))
    layers.append(_head_fc(bundle, "head/fc2", 1024, NUM_CATEGORIES, ActivationKind.NONE))
    layers.append(LayerDesc(LayerKind.SOFTMAX))
    model = Model(INPUT_SIZE, INPUT_SIZE, 3, layers, backbone=1)
    _must_validate(model)
    return model


def build_mobilenet_v2_classifier(bundle: dict) -> Model:
    """Standard V2 backbone (inverted-residual stages) with the
    256/1024/512-unit head."""
    relu6 = ActivationKind.RELU6
    layers = [LayerDesc(LayerKind.CONV, activation=relu6, stride=2,
                        main=_bundle_conv(bundle, "conv0", (3, 3, 3, 32)))]
    cin = 32
    block = 0
    for expansion, cout, repeats, first_stride in V2_STAGES:
        for r in range(repeats):
            block += 1
            stride = first_stride if r == 0 else 1
            cexp = cin * expansion
            key = f"block{block}"
            expand = None
            if expansion != 1:
                expand = _bundle_conv(bundle, f"{key}/expand", (1, 1, cin, cexp))
            dw = _bundle_conv(bundle, f"{key}/dw", (3, 3, cexp, 1))
            proj = _bundle_conv(bundle, f"{key}/project", (1, 1, cexp, cout))
            layers.append(LayerDesc(LayerKind.INVERTED_RESIDUAL, stride=stride,
                                    main=dw, expand=expand, project=proj,
                                    use_residual=(stride == 1 and cin == cout)))
            cin = cout
    layers.append(LayerDesc(LayerKind.CONV, activation=relu6,
                            main=_bundle_conv(bundle, "conv_last", (1, 1, cin, V2_FEATURES))))
    layers.append(LayerDesc(LayerKind.GLOBAL_AVG_POOL))
    layers.append(LayerDesc(LayerKind.FLATTEN))
    layers.append(_head_fc(bundle, "head/fc1", V2_FEATURES, 256, ActivationKind.RELU))
    layers.append(_head_fc(bundle, "head/fc2", 256, 1024, ActivationKind.RELU))
    layers.append(_head_fc(bundle, "head/fc3", 1024, 512, ActivationKind.SIGMOID))
    layers.append(LayerDesc(LayerKind.DROPOUT, dropout_rate=0.7))
    layers.append(_head_fc(bundle, "head/fc4", 512, NUM_CATEGORIES, ActivationKind.NONE))
    layers.append(LayerDesc(LayerKind.SOFTMAX))
    model = Model(INPUT_SIZE, INPUT_SIZE, 3, layers, backbone=2)
    _must_validate(model)
    return model


def _must_validate(model: Model) -> None:
    diags = validate(model)
    if diags:
        raise GraphError("model failed validation: " + "; ".join(diags))


def random_parameter_bundle(backbone: str, seed: int = 0,
                            with_batchnorm: bool = True) -> dict:
    """He-style random bundle for either backbone; used by tests and fixtures."""
    rng = np.random.default_rng(seed)

    def conv_entry(bundle, key, shape):
        fan_in = shape[0] * shape[1] * (shape[2] if shape[3] != 1 else 1)
        bundle[f"{key}/weights"] = rng.normal(
            0.0, np.sqrt(2.0 / fan_in), size=shape).astype(np.float32)
        cout = shape[-1] if shape[-1] != 1 else shape[-2]
        bundle[f"{key}/bias"] = np.zeros(cout, dtype=np.float32)
        if with_batchnorm:
            bundle[f"{key}/bn/gamma"] = rng.normal(1.0, 0.1, cout).astype(np.float32)
            bundle[f"{key}/bn/beta"] = rng.normal(0.0, 0.1, cout).astype(np.float32)
            bundle[f"{key}/bn/mean"] = rng.normal(0.0, 0.1, cout).astype(np.float32)
            bundle[f"{key}/bn/variance"] = np.abs(rng.normal(1.0, 0.1, cout)).astype(np.float32)

    def fc_entry(bundle, key, d_in, d_out):
        bundle[f"{key}/weights"] = rng.normal(
            0.0, np.sqrt(1.0 / d_in), size=(d_in, d_out)).astype(np.float32)
        bundle[f"{key}/bias"] = np.zeros(d_out, dtype=np.float32)

    bundle: dict = {}
    if backbone == "v1":
        conv_entry(bundle, "conv0", (3, 3, 3, 32))
        cin = 32
        for i, (_, cout) in enumerate(V1_STAGES, start=1):
            conv_entry(bundle, f"ds{i}/dw", (3, 3, cin, 1))
            conv_entry(bundle, f"ds{i}/pw", (1, 1, cin, cout))
            cin = cout
        fc_entry(bundle, "head/fc1", 1024, 1024)
        fc_entry(bundle, "head/fc2", 1024, NUM_CATEGORIES)
    elif backbone == "v2":
        conv_entry(bundle, "conv0", (3, 3, 3, 32))
        cin = 32
        block = 0
        for expansion, cout, repeats, _ in V2_STAGES:
            for _r in range(repeats):
                block += 1
                cexp = cin * expansion
                if expansion != 1:
                    conv_entry(bundle, f"block{block}/expand", (1, 1, cin, cexp))
                conv_entry(bundle, f"block{block}/dw", (3, 3, cexp, 1))
                conv_entry(bundle, f"block{block}/project", (1, 1, cexp, cout))
                cin = cout
        conv_entry(bundle, "conv_last", (1, 1, cin, V2_FEATURES))
        fc_entry(bundle, "head/fc1", V2_FEATURES, 256)
        fc_entry(bundle, "head/fc2", 256, 1024)
        fc_entry(bundle, "head/fc3", 1024, 512)
        fc_entry(bundle, "head/fc4", 512, NUM_CATEGORIES)
    else:
        raise GraphError(f"unknown backbone {backbone!r}")
    return bundle
