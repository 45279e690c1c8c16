"""Baseline JPEG compression round trip without an external codec.

Only the lossy stages are modelled: full-range YCbCr, 4:2:0 chroma
subsampling, 8x8 DCT and quantisation with the IJG tables scaled by the
usual quality rule. Entropy coding is lossless and therefore skipped; the
decoded pixels are what a baseline encoder/decoder pair would produce up to
rounding in the colour conversion and chroma upsampling filter.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn

from .color import rgb_to_ycbcr, ycbcr_to_rgb

LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=float)

CHROMA_TABLE = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=float)


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    """IJG quality scaling (quality in 1..100)."""
    quality = int(min(max(quality, 1), 100))
    scale = 5000 / quality if quality < 50 else 200 - 2 * quality
    return np.clip(np.floor((base * scale + 50) / 100), 1, 255)


def _pad_to(plane: np.ndarray, mult: int) -> np.ndarray:
    h, w = plane.shape
    return np.pad(plane, ((0, -h % mult), (0, -w % mult)), mode="edge")


def _quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Blockwise DCT, quantise, dequantise, inverse DCT on a plane in 0..255 units."""
    h, w = plane.shape
    blocks = (plane - 128.0).reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    coeffs = dctn(blocks, type=2, axes=(2, 3), norm="ortho")
    coeffs = np.round(coeffs / table) * table
    out = idctn(coeffs, type=2, axes=(2, 3), norm="ortho") + 128.0
    out = np.clip(np.round(out), 0, 255)
    return out.transpose(0, 2, 1, 3).reshape(h, w)


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Compress and decompress an RGB float image at the given JPEG quality."""
    h, w = img.shape[:2]
    # 8-bit input like a real encoder sees
    rgb8 = np.round(np.clip(img, 0, 1) * 255.0) / 255.0
    ycc = rgb_to_ycbcr(rgb8) * 255.0
    lq, cq = scaled_table(LUMA_TABLE, quality), scaled_table(CHROMA_TABLE, quality)

    y = _quantize_plane(_pad_to(ycc[..., 0], 16), lq)[:h, :w]
    chans = [y]
    for c in (1, 2):
        full = _pad_to(ycc[..., c], 16)
        H, W = full.shape
        sub = full.reshape(H // 2, 2, W // 2, 2).mean(axis=(1, 3))
        sub = _quantize_plane(_pad_to(sub, 8), cq)[: H // 2, : W // 2]
        up = np.repeat(np.repeat(sub, 2, axis=0), 2, axis=1)
        chans.append(up[:h, :w])
    out = ycbcr_to_rgb(np.stack(chans, axis=-1) / 255.0)
    return np.clip(np.round(out * 255.0) / 255.0, 0.0, 1.0)
