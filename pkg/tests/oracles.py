"""Naive direct-loop reference implementations.

These stay deliberately independent of the production kernels: explicit
nested loops, float64 accumulation, padding recomputed from the documented
rule. The suite checks the fast paths against these.
"""

from __future__ import annotations

import math

import numpy as np


def same_pad_ref(in_size: int, kernel: int, stride: int) -> tuple[int, int]:
    out = math.ceil(in_size / stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    return total // 2, total - total // 2


def conv2d_ref(x: np.ndarray, w: np.ndarray, bias: np.ndarray | None,
               stride: int = 1, padding: str = "same") -> np.ndarray:
    """Six-nested-loop cross-correlation; x (n,h,w,cin), w (kh,kw,cin,cout)."""
    n, h, wid, cin = x.shape
    kh, kw, _, cout = w.shape
    if padding == "same":
        (pt, pb) = same_pad_ref(h, kh, stride)
        (pl, pr) = same_pad_ref(wid, kw, stride)
        xp = np.zeros((n, h + pt + pb, wid + pl + pr, cin), dtype=np.float64)
        xp[:, pt:pt + h, pl:pl + wid, :] = x
        oh = math.ceil(h / stride)
        ow = math.ceil(wid / stride)
    else:
        xp = x.astype(np.float64)
        oh = (h - kh) // stride + 1
        ow = (wid - kw) // stride + 1
    out = np.zeros((n, oh, ow, cout), dtype=np.float64)
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                for oc in range(cout):
                    acc = 0.0
                    for ky in range(kh):
                        for kx in range(kw):
                            for ic in range(cin):
                                acc += xp[b, oy * stride + ky, ox * stride + kx, ic] \
                                    * float(w[ky, kx, ic, oc])
                    if bias is not None:
                        acc += float(bias[oc])
                    out[b, oy, ox, oc] = acc
    return out


def depthwise_conv2d_ref(x: np.ndarray, w: np.ndarray, bias: np.ndarray | None,
                         stride: int = 1, padding: str = "same") -> np.ndarray:
    """Per-channel direct convolution; w (kh,kw,c,1)."""
    n, h, wid, c = x.shape
    kh, kw = w.shape[:2]
    if padding == "same":
        (pt, pb) = same_pad_ref(h, kh, stride)
        (pl, pr) = same_pad_ref(wid, kw, stride)
        xp = np.zeros((n, h + pt + pb, wid + pl + pr, c), dtype=np.float64)
        xp[:, pt:pt + h, pl:pl + wid, :] = x
        oh = math.ceil(h / stride)
        ow = math.ceil(wid / stride)
    else:
        xp = x.astype(np.float64)
        oh = (h - kh) // stride + 1
        ow = (wid - kw) // stride + 1
    out = np.zeros((n, oh, ow, c), dtype=np.float64)
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                for ch in range(c):
                    acc = 0.0
                    for ky in range(kh):
                        for kx in range(kw):
                            acc += xp[b, oy * stride + ky, ox * stride + kx, ch] \
                                * float(w[ky, kx, ch, 0])
                    if bias is not None:
                        acc += float(bias[ch])
                    out[b, oy, ox, ch] = acc
    return out


def fully_connected_ref(x: np.ndarray, w: np.ndarray,
                        bias: np.ndarray | None) -> np.ndarray:
    """Brute-force dot products; x (n,d), w (d,u)."""
    n, d = x.shape
    u = w.shape[1]
    out = np.zeros((n, u), dtype=np.float64)
    for b in range(n):
        for j in range(u):
            acc = 0.0
            for i in range(d):
                acc += float(x[b, i]) * float(w[i, j])
            if bias is not None:
                acc += float(bias[j])
            out[b, j] = acc
    return out


def global_avg_pool_ref(x: np.ndarray) -> np.ndarray:
    n, h, w, c = x.shape
    out = np.zeros((n, 1, 1, c), dtype=np.float64)
    for b in range(n):
        for ch in range(c):
            acc = 0.0
            for y in range(h):
                for xx in range(w):
                    acc += float(x[b, y, xx, ch])
            out[b, 0, 0, ch] = acc / (h * w)
    return out


def batchnorm_ref(x: np.ndarray, gamma, beta, mean, variance, eps) -> np.ndarray:
    """Standalone inference-time BN, applied after an (unfolded) convolution."""
    return (x - mean) / np.sqrt(variance + eps) * gamma + beta


def topk_count_ref(ranked_indices: list[list[int]], labels: list[int], k: int) -> int:
    hits = 0
    for ranking, truth in zip(ranked_indices, labels):
        if truth in ranking[:k]:
            hits += 1
    return hits


def relative_error(fast: np.ndarray, ref: np.ndarray) -> float:
    denom = max(float(np.max(np.abs(ref))), 1e-12)
    return float(np.max(np.abs(fast.astype(np.float64) - ref)) / denom)
