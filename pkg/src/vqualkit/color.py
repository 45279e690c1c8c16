"""Colour-space conversions on float RGB images in [0, 1].

Lab and HSV delegate to scikit-image (sRGB, D65). YCbCr is full-range
BT.601, the variant used by JPEG.
"""

from __future__ import annotations

import warnings

import numpy as np
from skimage import color as skcolor

_YCBCR = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
_YCBCR_INV = np.linalg.inv(_YCBCR)


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    return skcolor.rgb2lab(np.asarray(img, dtype=float))


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    # out-of-gamut Lab values are expected after chroma edits; clipping is the intent
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return np.clip(skcolor.lab2rgb(lab), 0.0, 1.0)


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    return skcolor.rgb2hsv(np.asarray(img, dtype=float))


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    return np.clip(skcolor.hsv2rgb(hsv), 0.0, 1.0)


def rgb_to_ycbcr(img: np.ndarray) -> np.ndarray:
    """Full-range YCbCr with Y in [0, 1] and Cb, Cr centred on 0.5."""
    out = np.asarray(img, dtype=float) @ _YCBCR.T
    out[..., 1:] += 0.5
    return out


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    ycc = np.array(ycc, dtype=float, copy=True)
    ycc[..., 1:] -= 0.5
    return ycc @ _YCBCR_INV.T


def luma(img: np.ndarray, weights=(0.299, 0.587, 0.114)) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        return img
    return img @ np.asarray(weights, dtype=float)
