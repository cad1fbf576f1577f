"""Image decoding, bilinear resizing and model-input preprocessing.

Supported containers: binary portable-pixmap (P6, hand-rolled, used by all
test fixtures) and PNG (via Pillow). Lossy photographic formats are out of
scope; convert them first, e.g. ``convert photo.jpg photo.png``.

Resampling uses half-pixel-center bilinear interpolation
(src = (dst + 0.5) * scale - 0.5) with edge clamping. ``preprocess`` runs the
same sampling in float32 and maps channel values to [-1, 1] via v/127.5 - 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

SUPPORTED_EXTENSIONS = (".ppm", ".png")


class ImageError(ValueError):
    """Unsupported container or malformed image payload."""


@dataclass(frozen=True)
class RawImage:
    """8-bit RGB raster, row-major."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, 3):
            raise ImageError(f"pixel buffer {px.shape} does not match "
                             f"{self.height}x{self.width}x3")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


def _decode_ppm(data: bytes) -> RawImage:
    if not data.startswith(b"P6"):
        raise ImageError("not a binary portable-pixmap (missing P6 magic)")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; a single whitespace byte ends the header.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageError("truncated portable-pixmap header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ImageError(f"malformed portable-pixmap header fields {fields}") from None
    if width < 1 or height < 1:
        raise ImageError(f"bad portable-pixmap dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise ImageError(f"unsupported portable-pixmap maxval {maxval} (8-bit only)")
    expected = width * height * 3
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise ImageError(f"portable-pixmap payload truncated: {len(payload)} of {expected} bytes")
    if len(data) - pos > expected:
        raise ImageError(f"{len(data) - pos - expected} trailing bytes after pixel data")
    px = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return RawImage(width, height, px.copy())


def encode_ppm(img: RawImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def _decode_png(data: bytes) -> RawImage:
    from PIL import Image, UnidentifiedImageError
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != "PNG":
                raise ImageError(f"expected PNG payload, found {im.format}")
            rgb = im.convert("RGB")
            px = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError:
        raise ImageError("malformed PNG payload") from None
    except OSError as e:
        raise ImageError(f"malformed PNG payload: {e}") from None
    return RawImage(px.shape[1], px.shape[0], px)


def decode_image(data: bytes, format_hint: str) -> RawImage:
    """Decode bytes using the container named by ``format_hint`` (an
    extension like '.ppm'). Grayscale/palette inputs come back as RGB."""
    hint = format_hint.lower()
    if not hint.startswith("."):
        hint = "." + hint
    if hint == ".ppm":
        return _decode_ppm(data)
    if hint == ".png":
        return _decode_png(data)
    if hint in (".jpg", ".jpeg"):
        raise ImageError("lossy photographic containers are not decoded; "
                         "pre-convert to .png (see README)")
    raise ImageError(f"unsupported container {format_hint!r} "
                     f"(supported: {', '.join(SUPPORTED_EXTENSIONS)})")


def load_image(path) -> RawImage:
    from pathlib import Path
    p = Path(path)
    return decode_image(p.read_bytes(), p.suffix)


def save_image(path, img: RawImage) -> None:
    from pathlib import Path
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".ppm":
        p.write_bytes(encode_ppm(img))
    elif suffix == ".png":
        from PIL import Image
        Image.fromarray(np.asarray(img.pixels)).save(p, format="PNG")
    else:
        raise ImageError(f"unsupported container {suffix!r}")


def _bilinear(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Half-pixel-center bilinear resample of an (h, w, c) array, float32."""
    in_h, in_w = pixels.shape[:2]
    src = pixels.astype(np.float32)
    if (out_h, out_w) == (in_h, in_w):
        return src
    sy = np.float32(in_h / out_h)
    sx = np.float32(in_w / out_w)
    ys = (np.arange(out_h, dtype=np.float32) + np.float32(0.5)) * sy - np.float32(0.5)
    xs = (np.arange(out_w, dtype=np.float32) + np.float32(0.5)) * sx - np.float32(0.5)
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    ty = (ys - y0)[:, None, None]
    tx = (xs - x0)[None, :, None]
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    y0c = np.clip(y0, 0, in_h - 1)
    y1c = np.clip(y0 + 1, 0, in_h - 1)
    x0c = np.clip(x0, 0, in_w - 1)
    x1c = np.clip(x0 + 1, 0, in_w - 1)
    top = src[y0c][:, x0c] * (1 - tx) + src[y0c][:, x1c] * tx
    bot = src[y1c][:, x0c] * (1 - tx) + src[y1c][:, x1c] * tx
    return (top * (1 - ty) + bot * ty).astype(np.float32)


def resize_bilinear(img: RawImage, out_w: int, out_h: int) -> RawImage:
    if out_w < 1 or out_h < 1:
        raise ImageError(f"output dims must be >= 1, got {out_w}x{out_h}")
    if (out_w, out_h) == (img.width, img.height):
        return RawImage(out_w, out_h, img.pixels.copy())
    resampled = _bilinear(img.pixels, out_w, out_h)
    px = np.clip(np.rint(resampled), 0, 255).astype(np.uint8)
    return RawImage(out_w, out_h, px)


def preprocess(img: RawImage, input_h: int, input_w: int) -> Tensor:
    """RawImage -> float32 (1, input_h, input_w, 3) tensor in [-1, 1]."""
    resampled = _bilinear(img.pixels, input_w, input_h)
    normalized = resampled / np.float32(127.5) - np.float32(1.0)
    return Tensor(normalized.astype(np.float32).reshape(1, input_h, input_w, 3))
