"""CSDM binary model serialization.

Byte layout (normative, little-endian throughout; see docs/FORMAT.md for the
hex-annotated walkthrough):

    header:
        0   magic "CSDM"
        4   u16 format version (1)
        6   u8  backbone tag (0 generic, 1 v1, 2 v2)
        7   u8  quantized flag
        8   u16 input height
        10  u16 input width
        12  u16 input channels
        14  u32 layer count
        18  u64 label-table offset
        26  u64 weight-blob offset
    layer records (at 34, in execution order):
        u8 op, u8 activation, u8 stride, u8 padding, u8 flags, u8 reserved
        u16 param count, u32 params[...]
        u16 blob count, blob descriptors[...]
        u16 output-quant count, (f32 scale, i32 zero point)[...]
    blob descriptor:
        u32 global blob index, u8 dtype (0 f32, 1 i8, 2 i32), u8 ndim,
        u32 dims[ndim], u64 byte length, u8 has-quant,
        [i32 axis (-1 per-tensor), u32 scale count, f32 scales[...], i32 zero point]
    label table (exactly 30 entries): u16 length + UTF-8 bytes each
    weight area: blob payloads concatenated in global index order

The encoding is canonical: the label table starts exactly where the records
end, the weight area exactly where the labels end, and the file ends exactly
with the last blob. Anything else is a structured error, never a crash.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import LayerDesc, LayerKind, Model, WeightSet, validate
from .labels import NUM_CATEGORIES
from .ops import ActivationKind, Padding
from .tensor import QuantParams, Tensor, TensorError

MAGIC = b"CSDM"
FORMAT_VERSION = 1
HEADER_SIZE = 34

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("int8"), 2: np.dtype("<i4")}
_DTYPE_OF = {np.dtype(np.float32): 0, np.dtype(np.int8): 1, np.dtype(np.int32): 2}

# Expected u32 param counts per op.
_PARAM_COUNTS = {
    LayerKind.CONV: 4,                # kh, kw, in_c, out_c
    LayerKind.DEPTHWISE_CONV: 3,      # kh, kw, channels
    LayerKind.INVERTED_RESIDUAL: 5,   # in_c, expand_c (0 = none), out_c, dw_kh, dw_kw
    LayerKind.FULLY_CONNECTED: 2,     # in_dim, out_dim
    LayerKind.GLOBAL_AVG_POOL: 0,
    LayerKind.FLATTEN: 0,
    LayerKind.DROPOUT: 1,             # rate as f32 bits
    LayerKind.SOFTMAX: 0,
}

_FLAG_RESIDUAL = 1
_FLAG_EXPAND = 2


class CsdmError(Exception):
    """Base class for every structured format error; carries a byte offset."""

    kind = "format"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{self.kind} error at offset {offset}: {message}")
        self.offset = offset


class BadMagicError(CsdmError):
    kind = "bad magic"


class VersionError(CsdmError):
    kind = "unsupported version"


class TruncatedError(CsdmError):
    kind = "truncated stream"


class LayoutError(CsdmError):
    """Section offsets, blob ranges or trailing bytes are inconsistent."""

    kind = "layout"


class RecordError(CsdmError):
    """A layer record or blob descriptor is out of its enumeration/bounds."""

    kind = "record"


class ValidationError(CsdmError):
    """The stream parsed but the model failed graph validation."""

    kind = "validation"

    def __init__(self, diagnostics: list[str], offset: int = 0):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics), offset)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedError(f"need {n} bytes for {what}, "
                                 f"{len(self.data) - self.pos} left", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def i32(self, what: str) -> int:
        return struct.unpack("<i", self.take(4, what))[0]

    def f32(self, what: str) -> float:
        return struct.unpack("<f", self.take(4, what))[0]


@dataclass
class _BlobDesc:
    index: int
    dtype: np.dtype
    dims: tuple[int, ...]
    length: int
    quant: Optional[QuantParams]
    offset: int  # descriptor position, for diagnostics


@dataclass
class _RawLayer:
    kind: LayerKind
    activation: ActivationKind
    stride: int
    padding: Padding
    flags: int
    params: tuple[int, ...]
    blobs: list[_BlobDesc]
    out_quants: list[QuantParams]
    offset: int


def _expected_blob_count(kind: LayerKind, flags: int) -> int:
    if kind in (LayerKind.CONV, LayerKind.DEPTHWISE_CONV, LayerKind.FULLY_CONNECTED):
        return 2
    if kind == LayerKind.INVERTED_RESIDUAL:
        return 6 if flags & _FLAG_EXPAND else 4
    return 0


def _read_blob_desc(r: _Reader, expected_index: int) -> _BlobDesc:
    at = r.pos
    index = r.u32("blob index")
    if index != expected_index:
        raise RecordError(f"blob index {index} out of order (expected {expected_index})", at)
    dtype_code = r.u8("blob dtype")
    if dtype_code not in _DTYPE_CODES:
        raise RecordError(f"unknown blob dtype code {dtype_code}", r.pos - 1)
    ndim = r.u8("blob ndim")
    if not 1 <= ndim <= 4:
        raise RecordError(f"blob ndim {ndim} outside [1, 4]", r.pos - 1)
    dims = tuple(r.u32("blob dim") for _ in range(ndim))
    if any(d < 1 for d in dims):
        raise RecordError(f"blob dims {dims} must all be >= 1", at)
    length = r.u64("blob length")
    dtype = _DTYPE_CODES[dtype_code]
    count = 1
    for d in dims:
        count *= d
    if count * dtype.itemsize != length:
        raise RecordError(f"blob length {length} does not match dims {dims} "
                          f"({count} x {dtype.itemsize} bytes)", at)
    quant = None
    quant_flag = r.u8("blob quant flag")
    if quant_flag not in (0, 1):
        raise RecordError("blob quant flag must be 0 or 1", r.pos - 1)
    if quant_flag:
        q_at = r.pos
        axis = r.i32("quant axis")
        n_scales = r.u32("quant scale count")
        if axis == -1:
            if n_scales != 1:
                raise RecordError(f"per-tensor quant must carry 1 scale, got {n_scales}", q_at)
        elif not 0 <= axis < ndim:
            raise RecordError(f"quant axis {axis} invalid for {ndim}-d blob", q_at)
        elif n_scales != dims[axis]:
            raise RecordError(f"quant scale count {n_scales} != axis extent {dims[axis]}", q_at)
        scales = np.frombuffer(r.take(4 * n_scales, "quant scales"), dtype="<f4")
        zero_point = r.i32("quant zero point")
        try:
            # Blob axes are right-aligned into the rank-4 tensor layout.
            tensor_axis = None if axis == -1 else axis + (4 - ndim)
            quant = QuantParams(scales.astype(np.float32), zero_point, tensor_axis)
        except TensorError as e:
            raise RecordError(str(e), q_at) from None
    return _BlobDesc(index, dtype, dims, length, quant, at)


def _read_layer(r: _Reader, next_blob: int) -> tuple[_RawLayer, int]:
    at = r.pos
    op = r.u8("op code")
    try:
        kind = LayerKind(op)
    except ValueError:
        raise RecordError(f"unknown op code {op}", at) from None
    act = r.u8("activation code")
    try:
        activation = ActivationKind(act)
    except ValueError:
        raise RecordError(f"unknown activation code {act}", r.pos - 1) from None
    stride = r.u8("stride")
    if stride < 1:
        raise RecordError("stride must be >= 1", r.pos - 1)
    pad = r.u8("padding code")
    try:
        padding = Padding(pad)
    except ValueError:
        raise RecordError(f"unknown padding code {pad}", r.pos - 1) from None
    flags = r.u8("flags")
    if flags & ~(_FLAG_RESIDUAL | _FLAG_EXPAND):
        raise RecordError(f"undefined flag bits 0x{flags:02x}", r.pos - 1)
    if r.u8("reserved") != 0:
        raise RecordError("reserved byte must be 0", r.pos - 1)
    param_count = r.u16("param count")
    if param_count != _PARAM_COUNTS[kind]:
        raise RecordError(f"{kind.name.lower()} record carries {param_count} params, "
                          f"expected {_PARAM_COUNTS[kind]}", at)
    params = tuple(r.u32("param") for _ in range(param_count))
    blob_count = r.u16("blob count")
    expected_blobs = _expected_blob_count(kind, flags)
    if blob_count != expected_blobs:
        raise RecordError(f"{kind.name.lower()} record carries {blob_count} blobs, "
                          f"expected {expected_blobs}", at)
    blobs = [_read_blob_desc(r, next_blob + i) for i in range(blob_count)]
    oq_count = r.u16("output quant count")
    out_quants = []
    for _ in range(oq_count):
        q_at = r.pos
        scale = r.f32("output quant scale")
        zp = r.i32("output quant zero point")
        try:
            out_quants.append(QuantParams(scale, zp))
        except TensorError as e:
            raise RecordError(str(e), q_at) from None
    return (_RawLayer(kind, activation, stride, padding, flags, params,
                      blobs, out_quants, at),
            next_blob + blob_count)


def _expected_out_quant_count(raw: _RawLayer, quantized: bool) -> int:
    if not quantized:
        return 0
    if raw.kind in (LayerKind.CONV, LayerKind.DEPTHWISE_CONV, LayerKind.FULLY_CONNECTED):
        return 2 if raw.activation in (ActivationKind.SIGMOID, ActivationKind.TANH,
                                       ActivationKind.SELU) else 1
    if raw.kind == LayerKind.INVERTED_RESIDUAL:
        return 4 if raw.flags & _FLAG_EXPAND else 3
    return 0


def _blob_array(desc: _BlobDesc, payload: bytes) -> np.ndarray:
    arr = np.frombuffer(payload, dtype=desc.dtype).reshape(desc.dims).copy()
    if desc.dtype == np.dtype("<f4"):
        return arr.astype(np.float32, copy=False)
    if desc.dtype == np.dtype("<i4"):
        return arr.astype(np.int32, copy=False)
    return arr


def _weight_tensor(desc: _BlobDesc, payload: bytes) -> Tensor:
    arr = _blob_array(desc, payload)
    arr = arr.reshape((1,) * (4 - arr.ndim) + arr.shape)
    try:
        return Tensor(arr, desc.quant)
    except TensorError as e:
        raise RecordError(str(e), desc.offset) from None


def _assemble_layer(raw: _RawLayer, payloads: list[bytes], quantized: bool) -> LayerDesc:
    def weight_set(w_desc, w_payload, b_desc, b_payload) -> WeightSet:
        weights = _weight_tensor(w_desc, w_payload)
        bias = _blob_array(b_desc, b_payload)
        if bias.ndim != 1:
            raise RecordError("bias blob must be 1-D", b_desc.offset)
        want = np.int32 if quantized else np.float32
        if bias.dtype != want or (quantized and weights.quant is None) \
                or (not quantized and (weights.quant is not None or weights.dtype != np.float32)):
            raise RecordError("blob dtypes inconsistent with the quantized flag", b_desc.offset)
        return WeightSet(weights, bias)

    oq_expected = _expected_out_quant_count(raw, quantized)
    if len(raw.out_quants) != oq_expected:
        raise RecordError(f"{raw.kind.name.lower()} record carries {len(raw.out_quants)} "
                          f"output quant entries, expected {oq_expected}", raw.offset)
    layer = LayerDesc(raw.kind, activation=raw.activation, stride=raw.stride,
                      padding=raw.padding,
                      use_residual=bool(raw.flags & _FLAG_RESIDUAL))
    pairs = [(raw.blobs[i], payloads[i]) for i in range(len(raw.blobs))]
    if raw.kind in (LayerKind.CONV, LayerKind.DEPTHWISE_CONV, LayerKind.FULLY_CONNECTED):
        layer.main = weight_set(*pairs[0], *pairs[1])
        if quantized:
            layer.out_quant = raw.out_quants[0]
            if len(raw.out_quants) == 2:
                layer.stage_quants["preact"] = raw.out_quants[1]
    elif raw.kind == LayerKind.INVERTED_RESIDUAL:
        idx = 0
        if raw.flags & _FLAG_EXPAND:
            layer.expand = weight_set(*pairs[0], *pairs[1])
            idx = 2
        layer.main = weight_set(*pairs[idx], *pairs[idx + 1])
        layer.project = weight_set(*pairs[idx + 2], *pairs[idx + 3])
        if quantized:
            layer.out_quant = raw.out_quants[0]
            quants = list(raw.out_quants[1:])
            if raw.flags & _FLAG_EXPAND:
                layer.stage_quants["expand"] = quants.pop(0)
            layer.stage_quants["dw"] = quants.pop(0)
            layer.stage_quants["proj"] = quants.pop(0)
    elif raw.kind == LayerKind.DROPOUT:
        layer.dropout_rate = float(np.frombuffer(
            struct.pack("<I", raw.params[0]), dtype="<f4")[0])
    # Cross-check declared params against blob shapes.
    _check_params(raw, layer)
    return layer


def _check_params(raw: _RawLayer, layer: LayerDesc) -> None:
    p = raw.params
    at = raw.offset
    if raw.kind == LayerKind.CONV:
        w = layer.main.weights.data
        if (w.shape[0], w.shape[1], w.shape[2], w.shape[3]) != p:
            raise RecordError(f"conv params {p} do not match weight shape {w.shape}", at)
    elif raw.kind == LayerKind.DEPTHWISE_CONV:
        w = layer.main.weights.data
        if (w.shape[0], w.shape[1], w.shape[2]) != p or w.shape[3] != 1:
            raise RecordError(f"depthwise params {p} do not match weight shape {w.shape}", at)
    elif raw.kind == LayerKind.FULLY_CONNECTED:
        w = layer.main.weights.data
        if (w.shape[2], w.shape[3]) != p:
            raise RecordError(f"fully-connected params {p} do not match weight shape {w.shape}", at)
    elif raw.kind == LayerKind.INVERTED_RESIDUAL:
        in_c, expand_c, out_c, dw_kh, dw_kw = p
        dw = layer.main.weights.data
        proj = layer.project.weights.data
        declared_in = layer.expand.weights.data.shape[2] if layer.expand else dw.shape[2]
        if layer.expand is not None:
            if expand_c != layer.expand.weights.data.shape[3]:
                raise RecordError("inverted-residual expansion width mismatch", at)
        elif expand_c != 0:
            raise RecordError("expansion width declared but no expansion blobs", at)
        if (in_c != declared_in or out_c != proj.shape[3]
                or (dw_kh, dw_kw) != (dw.shape[0], dw.shape[1])):
            raise RecordError(f"inverted-residual params {p} do not match blob shapes", at)


def load_model(data: bytes) -> Model:
    """Parse and fully validate a CSDM byte stream."""
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise BadMagicError("not a CSDM stream", 0)
    version = r.u16("version")
    if version != FORMAT_VERSION:
        raise VersionError(f"version {version} not supported (expected {FORMAT_VERSION})", 4)
    backbone = r.u8("backbone tag")
    if backbone not in (0, 1, 2):
        raise RecordError(f"unknown backbone tag {backbone}", 6)
    quantized = r.u8("quantized flag")
    if quantized not in (0, 1):
        raise RecordError(f"quantized flag must be 0 or 1, got {quantized}", 7)
    input_h = r.u16("input height")
    input_w = r.u16("input width")
    input_c = r.u16("input channels")
    if min(input_h, input_w, input_c) < 1:
        raise RecordError("input dims must be >= 1", 8)
    layer_count = r.u32("layer count")
    label_offset = r.u64("label table offset")
    weight_offset = r.u64("weight blob offset")
    if not HEADER_SIZE <= label_offset <= len(data) or not label_offset <= weight_offset <= len(data):
        raise LayoutError("section offsets outside the stream", 18)

    raws: list[_RawLayer] = []
    next_blob = 0
    for _ in range(layer_count):
        if r.pos >= label_offset:
            raise LayoutError("layer records overrun the label table", r.pos)
        raw, next_blob = _read_layer(r, next_blob)
        raws.append(raw)
    if r.pos != label_offset:
        raise LayoutError(f"label table offset {label_offset} does not follow "
                          f"the records (ending at {r.pos})", r.pos)

    labels = []
    for i in range(NUM_CATEGORIES):
        length = r.u16(f"label {i} length")
        raw_label = r.take(length, f"label {i}")
        try:
            labels.append(raw_label.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise RecordError(f"label {i} is not valid UTF-8: {e}", r.pos - length) from None
    if r.pos != weight_offset:
        raise LayoutError(f"weight area offset {weight_offset} does not follow "
                          f"the label table (ending at {r.pos})", r.pos)

    all_blobs = [b for raw in raws for b in raw.blobs]
    payloads: list[bytes] = []
    for blob in all_blobs:
        payloads.append(r.take(blob.length, f"blob {blob.index} payload"))
    if r.pos != len(data):
        raise LayoutError(f"{len(data) - r.pos} unknown trailing bytes", r.pos)

    layers = []
    consumed = 0
    for raw in raws:
        chunk = payloads[consumed:consumed + len(raw.blobs)]
        consumed += len(raw.blobs)
        layers.append(_assemble_layer(raw, chunk, bool(quantized)))

    model = Model(input_h, input_w, input_c, layers, labels=tuple(labels),
                  backbone=backbone, quantized=bool(quantized))
    diags = validate(model)
    if diags:
        raise ValidationError(diags)
    return model


# ---------------------------------------------------------------------------
# Writing


def _layer_params(layer: LayerDesc) -> tuple[int, ...]:
    if layer.kind == LayerKind.CONV:
        return tuple(int(d) for d in layer.main.weights.data.shape)
    if layer.kind == LayerKind.DEPTHWISE_CONV:
        return tuple(int(d) for d in layer.main.weights.data.shape[:3])
    if layer.kind == LayerKind.FULLY_CONNECTED:
        return tuple(int(d) for d in layer.main.weights.data.shape[2:])
    if layer.kind == LayerKind.INVERTED_RESIDUAL:
        dw = layer.main.weights.data
        in_c = layer.expand.weights.data.shape[2] if layer.expand else dw.shape[2]
        expand_c = layer.expand.weights.data.shape[3] if layer.expand else 0
        return (in_c, expand_c, int(layer.project.weights.data.shape[3]),
                int(dw.shape[0]), int(dw.shape[1]))
    if layer.kind == LayerKind.DROPOUT:
        return (struct.unpack("<I", struct.pack("<f", layer.dropout_rate))[0],)
    return ()


def _blob_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr).tobytes()


def _write_blob_desc(out: bytearray, index: int, arr: np.ndarray,
                     quant: Optional[QuantParams], squeeze_rank4: bool) -> bytes:
    dims = arr.shape
    if squeeze_rank4:
        # Weight tensors are rank 4; drop leading 1-dims that only pad rank.
        while len(dims) > 1 and dims[0] == 1:
            dims = dims[1:]
    payload = _blob_bytes(arr.reshape(dims))
    out += struct.pack("<IBB", index, _DTYPE_OF[arr.dtype], len(dims))
    for d in dims:
        out += struct.pack("<I", d)
    out += struct.pack("<Q", len(payload))
    if quant is None:
        out += b"\x00"
    else:
        axis = -1 if quant.axis is None else quant.axis - (4 - len(dims))
        out += b"\x01"
        out += struct.pack("<iI", axis, quant.scale.size)
        out += quant.scale.astype("<f4").tobytes()
        out += struct.pack("<i", quant.zero_point)
    return payload


def _serialize_layer(layer: LayerDesc, next_index: int,
                     quantized: bool) -> tuple[bytes, list[bytes], int]:
    out = bytearray()
    flags = (_FLAG_RESIDUAL if layer.use_residual else 0) \
        | (_FLAG_EXPAND if layer.expand is not None else 0)
    out += struct.pack("<BBBBBB", int(layer.kind), int(layer.activation),
                       layer.stride, int(layer.padding), flags, 0)
    params = _layer_params(layer)
    out += struct.pack("<H", len(params))
    for p in params:
        out += struct.pack("<I", p)
    sets = layer.weight_sets()
    out += struct.pack("<H", 2 * len(sets))
    payloads = []
    for _, ws in sets:
        payloads.append(_write_blob_desc(out, next_index, ws.weights.data,
                                         ws.weights.quant, squeeze_rank4=True))
        next_index += 1
        payloads.append(_write_blob_desc(out, next_index, ws.bias, None,
                                         squeeze_rank4=False))
        next_index += 1
    out_quants: list[QuantParams] = []
    if quantized:
        if layer.kind in (LayerKind.CONV, LayerKind.DEPTHWISE_CONV,
                          LayerKind.FULLY_CONNECTED):
            out_quants.append(layer.out_quant)
            if "preact" in layer.stage_quants:
                out_quants.append(layer.stage_quants["preact"])
        elif layer.kind == LayerKind.INVERTED_RESIDUAL:
            out_quants.append(layer.out_quant)
            if layer.expand is not None:
                out_quants.append(layer.stage_quants["expand"])
            out_quants.append(layer.stage_quants["dw"])
            out_quants.append(layer.stage_quants["proj"])
    out += struct.pack("<H", len(out_quants))
    for q in out_quants:
        out += struct.pack("<fi", q.scalar_scale(), q.zero_point)
    return bytes(out), payloads, next_index


def save_model(model: Model) -> bytes:
    """Serialize a validating model to its canonical CSDM encoding."""
    diags = validate(model)
    if diags:
        raise ValidationError(diags)
    records = bytearray()
    payloads: list[bytes] = []
    next_index = 0
    for layer in model.layers:
        rec, blobs, next_index = _serialize_layer(layer, next_index, model.quantized)
        records += rec
        payloads.extend(blobs)
    label_table = bytearray()
    for label in model.labels:
        encoded = label.encode("utf-8")
        label_table += struct.pack("<H", len(encoded))
        label_table += encoded
    label_offset = HEADER_SIZE + len(records)
    weight_offset = label_offset + len(label_table)
    header = MAGIC + struct.pack(
        "<HBBHHHIQQ", FORMAT_VERSION, model.backbone, int(model.quantized),
        model.input_h, model.input_w, model.input_c, len(model.layers),
        label_offset, weight_offset)
    return b"".join([header, bytes(records), bytes(label_table)] + payloads)


# ---------------------------------------------------------------------------
# Inspection


def _peek_header(data: bytes) -> list[str]:
    """Best-effort header summary for corrupt streams."""
    lines = []
    if len(data) >= 4:
        lines.append(f"magic: {data[:4]!r}")
    if len(data) >= HEADER_SIZE and data[:4] == MAGIC:
        version, backbone, quantized, h, w, c, layer_count = struct.unpack(
            "<HBBHHHI", data[4:18])
        lines.append(f"format version: {version}")
        lines.append(f"backbone tag: {backbone}  quantized: {quantized}")
        lines.append(f"input: {h}x{w}x{c}  declared layers: {layer_count}")
    return lines


def inspect(data: bytes) -> str:
    """Human-readable summary; reports parse/validation failures inline."""
    lines: list[str] = []
    model = None
    error = None
    try:
        model = load_model(data)
    except ValidationError as e:
        error = e
    except CsdmError as e:
        error = e
    if model is None and error is not None and not isinstance(error, ValidationError):
        lines.append("CSDM stream: unreadable")
        lines.extend(_peek_header(data))
        lines.append(f"error: {error}")
        return "\n".join(lines)
    if model is None:
        # Validation failures still have a parseable structure: reparse leniently.
        model = _parse_ignoring_validation(data)
    lines.append(f"model: {model.name}")
    lines.append(f"format version: {model.version}")
    lines.append(f"input: {model.input_h}x{model.input_w}x{model.input_c}")
    lines.append(f"quantized: {'yes' if model.quantized else 'no'}")
    lines.append(f"layers: {len(model.layers)}")
    total = 0
    for i, layer in enumerate(model.layers):
        params = sum(ws.weights.data.size + ws.bias.size for _, ws in layer.weight_sets())
        total += params
        desc = layer.kind.name.lower()
        if layer.activation != ActivationKind.NONE:
            desc += f" ({layer.activation.name.lower()})"
        if layer.stride != 1:
            desc += f" stride {layer.stride}"
        if layer.kind == LayerKind.DROPOUT:
            desc += f" rate {layer.dropout_rate:g}"
        if layer.use_residual:
            desc += " +residual"
        lines.append(f"  layer {i:3d}: {desc:40s} params {params}")
    lines.append(f"total parameters: {total}")
    lines.append(f"labels ({len(model.labels)}):")
    for i, label in enumerate(model.labels):
        lines.append(f"  {i + 1:2d}. {label}")
    if error is not None:
        lines.append("validation errors:")
        for diag in error.diagnostics:
            lines.append(f"  - {diag}")
    return "\n".join(lines)


def _parse_ignoring_validation(data: bytes) -> Model:
    """Identical parse to load_model but skipping graph validation."""
    # load_model raises ValidationError only after the full structure parsed;
    # rebuild by temporarily relaxing: reuse internals.
    r = _Reader(data)
    r.take(4, "magic")
    r.u16("version")
    backbone = r.u8("backbone tag")
    quantized = r.u8("quantized flag")
    input_h = r.u16("input height")
    input_w = r.u16("input width")
    input_c = r.u16("input channels")
    layer_count = r.u32("layer count")
    label_offset = r.u64("label table offset")
    r.u64("weight blob offset")
    raws = []
    next_blob = 0
    for _ in range(layer_count):
        raw, next_blob = _read_layer(r, next_blob)
        raws.append(raw)
    labels = []
    r.pos = label_offset
    for i in range(NUM_CATEGORIES):
        length = r.u16(f"label {i} length")
        labels.append(r.take(length, f"label {i}").decode("utf-8", errors="replace"))
    payloads = []
    for raw in raws:
        for blob in raw.blobs:
            payloads.append(r.take(blob.length, f"blob {blob.index} payload"))
    layers = []
    consumed = 0
    for raw in raws:
        chunk = payloads[consumed:consumed + len(raw.blobs)]
        consumed += len(raw.blobs)
        layers.append(_assemble_layer(raw, chunk, bool(quantized)))
    return Model(input_h, input_w, input_c, layers, labels=tuple(labels),
                 backbone=backbone if backbone in (0, 1, 2) else 0,
                 quantized=bool(quantized))
