"""Synthetic spatial distortions at five severity levels.

Images are float arrays of shape (H, W, 3) with samples in [0, 1]. Each
category is a function ``(img, params, rng) -> img`` where ``params`` is one
rung of the severity ladder (see ``ladders.json``) and ``rng`` is a
generator seeded only by the distortion spec, so identical inputs give
bit-identical outputs.
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from PIL import Image, features
from scipy import ndimage
from scipy.cluster.vq import kmeans2, vq
from scipy.special import expit
from skimage.restoration import denoise_tv_chambolle

from . import color
from .errors import CodecUnavailable, InvalidImage, InvalidSpec
from .jpeg import jpeg_roundtrip

MIN_SIDE = 16

SPATIAL_CATEGORIES = (
    "gaussian_blur", "lens_blur", "motion_blur", "color_diffusion", "color_shift",
    "color_quantization", "color_oversaturation", "color_desaturation", "jpeg2000",
    "jpeg", "white_noise", "white_noise_color", "impulse_noise", "multiplicative_noise",
    "denoise", "brighten", "darken", "mean_shift", "jitter", "non_eccentricity_patch",
    "pixelation", "quantization", "color_block", "high_sharpen", "contrast_change",
)
VIDEO_CATEGORIES = ("stuttering", "camera_shake", "h264", "h265")
CATEGORIES = SPATIAL_CATEGORIES + VIDEO_CATEGORIES

# names used in "[severity]–[type]" text records
DISPLAY_NAMES = {
    "gaussian_blur": "gaussian blur",
    "lens_blur": "lens blur",
    "motion_blur": "motion blur",
    "color_diffusion": "color diffusion",
    "color_shift": "color shift",
    "color_quantization": "color quantization",
    "color_oversaturation": "color over-saturation",
    "color_desaturation": "color de-saturation",
    "jpeg2000": "jpeg2000 compression",
    "jpeg": "jpeg compression",
    "white_noise": "white noise",
    "white_noise_color": "white noise with color",
    "impulse_noise": "impulse noise",
    "multiplicative_noise": "multiplicative noise",
    "denoise": "denoise",
    "brighten": "brighten",
    "darken": "darken",
    "mean_shift": "mean shift",
    "jitter": "jitter",
    "non_eccentricity_patch": "non-eccentricity patch",
    "pixelation": "pixelation",
    "quantization": "quantization",
    "color_block": "color block",
    "high_sharpen": "high sharpen",
    "contrast_change": "contrast change",
    "stuttering": "stuttering",
    "camera_shake": "camera shake",
    "h264": "h264 compression",
    "h265": "h265 compression",
}

SPATIAL_SEVERITY_NAMES = ("mild", "noticeable", "relatively severe", "severe", "very severe")
VIDEO_SEVERITY_NAMES = ("mild", "noticeable", "severe")

# categories whose PSNR against the source falls strictly with severity
PSNR_MONOTONE = (
    "gaussian_blur", "lens_blur", "motion_blur", "white_noise", "white_noise_color",
    "impulse_noise", "multiplicative_noise", "jpeg", "jpeg2000", "pixelation",
    "quantization", "color_quantization", "jitter",
)

STOCHASTIC = (
    "motion_blur", "color_shift", "color_quantization", "white_noise", "white_noise_color",
    "impulse_noise", "multiplicative_noise", "denoise", "jitter", "non_eccentricity_patch",
    "color_block", "stuttering", "camera_shake",
)

PATCH_SIZE = 32
PATCH_RADIUS = 16
BLOCK_FRACTION = (0.05, 0.15)
SHARPEN_RADIUS = 1.0


def is_video_category(category: str) -> bool:
    return category in VIDEO_CATEGORIES


def max_severity(category: str) -> int:
    return 3 if is_video_category(category) else 5


def severity_name(category: str, severity: int) -> str:
    names = VIDEO_SEVERITY_NAMES if is_video_category(category) else SPATIAL_SEVERITY_NAMES
    return names[severity - 1]


@dataclass(frozen=True)
class DistortionSpec:
    category: str
    severity: int
    seed: int = 0

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise InvalidSpec(f"unknown distortion category {self.category!r}")
        if not 1 <= int(self.severity) <= max_severity(self.category):
            raise InvalidSpec(
                f"severity {self.severity} outside 1..{max_severity(self.category)} for {self.category}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")

    @property
    def label(self) -> str:
        return f"{severity_name(self.category, self.severity)}–{DISPLAY_NAMES[self.category]}"

    def to_dict(self) -> dict:
        return {"category": self.category, "severity": self.severity, "seed": self.seed}


def derive_seed(global_seed: int, item_id: str, category: str) -> int:
    """Per-item seed independent of processing order."""
    h = hashlib.blake2b(f"{global_seed}\x00{item_id}\x00{category}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


# ---------------------------------------------------------------- ladders

@lru_cache(maxsize=1)
def _default_ladder_text() -> str:
    return resources.files("vqualkit").joinpath("ladders.json").read_text(encoding="utf-8")


def validate_ladder(ladder: Mapping) -> None:
    for cat, entry in ladder.items():
        if cat not in CATEGORIES:
            raise InvalidSpec(f"ladder has unknown category {cat!r}")
        levels = entry["levels"]
        if len(levels) != max_severity(cat):
            raise InvalidSpec(f"{cat}: expected {max_severity(cat)} levels, got {len(levels)}")
        key = entry["dominant"]
        vals = [lv[key] for lv in levels]
        diffs = np.diff(vals)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise InvalidSpec(f"{cat}: ladder not strictly monotone in {key!r}: {vals}")


def load_ladder(path: str | Path | None = None, overrides: Mapping | None = None) -> dict:
    """Default ladder, optionally updated per category from a JSON file and/or a mapping."""
    ladder = json.loads(_default_ladder_text())
    extra = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            extra.update(json.load(fh))
    if overrides:
        extra.update(copy.deepcopy(dict(overrides)))
    for cat, entry in extra.items():
        if cat in ladder and "dominant" not in entry:
            entry = {"dominant": ladder[cat]["dominant"], **entry}
        ladder[cat] = entry
    validate_ladder(ladder)
    return ladder


def ladder_params(ladder: Mapping, category: str, severity: int) -> dict:
    return dict(ladder[category]["levels"][severity - 1])


# ---------------------------------------------------------------- helpers

def check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype == np.uint8:
        img = img.astype(float) / 255.0
    img = img.astype(float, copy=False)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidImage(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    if img.shape[0] < MIN_SIDE or img.shape[1] < MIN_SIDE:
        raise InvalidImage(f"image smaller than {MIN_SIDE}x{MIN_SIDE}: {img.shape[:2]}")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise InvalidImage("samples must be finite and in [0, 1]")
    return img


def _per_channel(img: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    return np.stack([fn(img[..., c]) for c in range(img.shape[2])], axis=-1)


def _convolve(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return _per_channel(img, lambda ch: ndimage.convolve(ch, kernel, mode="reflect"))


def disk_kernel(radius: float, supersample: int = 8) -> np.ndarray:
    """Normalised anti-aliased disk of the given radius."""
    r = int(np.ceil(radius))
    n = 2 * r + 1
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    grid = np.arange(n) - r
    ys = (grid[:, None] + offs[None, :]).ravel()
    inside = (ys[:, None] ** 2 + ys[None, :] ** 2) <= radius ** 2
    k = inside.reshape(n, supersample, n, supersample).mean(axis=(1, 3))
    return k / k.sum()


def line_kernel(length: float, angle: float) -> np.ndarray:
    """Normalised linear PSF of the given length (pixels) and direction (radians)."""
    half = (length - 1) / 2.0
    r = int(np.ceil(half)) + 1
    k = np.zeros((2 * r + 1, 2 * r + 1))
    for t in np.linspace(-half, half, max(int(4 * length), 2)):
        x, y = r + t * np.cos(angle), r - t * np.sin(angle)
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        fx, fy = x - x0, y - y0
        k[y0, x0] += (1 - fx) * (1 - fy)
        k[y0, x0 + 1] += fx * (1 - fy)
        k[y0 + 1, x0] += (1 - fx) * fy
        k[y0 + 1, x0 + 1] += fx * fy
    return k / k.sum()


# ---------------------------------------------------------------- categories

def gaussian_blur(img, p, rng):
    return _per_channel(img, lambda ch: ndimage.gaussian_filter(ch, p["sigma"], mode="reflect"))


def lens_blur(img, p, rng):
    return _convolve(img, disk_kernel(p["radius"]))


def motion_blur(img, p, rng):
    angle = rng.uniform(0.0, np.pi)
    return _convolve(img, line_kernel(p["length"], angle))


def color_diffusion(img, p, rng):
    lab = color.rgb_to_lab(img)
    for c in (1, 2):
        lab[..., c] = ndimage.gaussian_filter(lab[..., c], p["sigma"], mode="reflect")
    return color.lab_to_rgb(lab)


def _smooth_mask(shape, rng) -> np.ndarray:
    m = ndimage.gaussian_filter(rng.random(shape), max(shape) / 8.0, mode="reflect")
    lo, hi = m.min(), m.max()
    return (m - lo) / (hi - lo) if hi > lo else np.ones(shape)


def color_shift(img, p, rng):
    """Translate the green channel and blend it back through a smooth random mask."""
    angle = rng.uniform(0.0, 2 * np.pi)
    dy = int(round(p["shift"] * np.sin(angle)))
    dx = int(round(p["shift"] * np.cos(angle)))
    mask = _smooth_mask(img.shape[:2], rng)
    g = img[..., 1]
    shifted = ndimage.shift(g, (dy, dx), order=0, mode="nearest")
    out = img.copy()
    out[..., 1] = shifted * mask + g * (1.0 - mask)
    return out


def color_quantization(img, p, rng):
    """k-means palette of ``colors`` entries learned on a pixel subsample."""
    pixels = img.reshape(-1, 3)
    k = int(p["colors"])
    n = min(len(pixels), 4096)
    sample = pixels[rng.choice(len(pixels), size=n, replace=False)]
    k = min(k, len(np.unique(sample, axis=0)))
    if k < 1:
        return img.copy()
    codebook, _ = kmeans2(sample, k, iter=20, minit="++", seed=rng)
    idx, _ = vq(pixels, codebook)
    return codebook[idx].reshape(img.shape)


def color_oversaturation(img, p, rng):
    hsv = color.rgb_to_hsv(img)
    hsv[..., 1] = np.clip(hsv[..., 1] * p["factor"], 0.0, 1.0)
    return color.hsv_to_rgb(hsv)


def color_desaturation(img, p, rng):
    lab = color.rgb_to_lab(img)
    lab[..., 1:] *= p["factor"]
    return color.lab_to_rgb(lab)


def jpeg2000(img, p, rng):
    if not features.check("jpg_2000"):
        raise CodecUnavailable("Pillow was built without OpenJPEG; JPEG2000 is unavailable")
    pil = Image.fromarray(np.round(img * 255).astype(np.uint8))
    buf = io.BytesIO()
    pil.save(buf, format="JPEG2000", quality_mode="rates",
             quality_layers=[float(p["rate"])], irreversible=True)
    buf.seek(0)
    return np.asarray(Image.open(buf).convert("RGB"), dtype=float) / 255.0


def jpeg(img, p, rng):
    return jpeg_roundtrip(img, int(p["quality"]))


def white_noise(img, p, rng):
    return img + rng.normal(0.0, p["sigma"], img.shape)


def white_noise_color(img, p, rng):
    ycc = color.rgb_to_ycbcr(img) + rng.normal(0.0, p["sigma"], img.shape)
    return color.ycbcr_to_rgb(ycc)


def impulse_noise(img, p, rng):
    u = rng.random(img.shape[:2])
    prob = p["p"]
    out = img.copy()
    out[u < prob / 2] = 0.0
    out[(u >= prob / 2) & (u < prob)] = 1.0
    return out


def multiplicative_noise(img, p, rng):
    return img * (1.0 + rng.normal(0.0, p["sigma"], img.shape))


def denoise(img, p, rng):
    # edge-preserving total-variation smoother in place of a learned denoiser
    noisy = np.clip(img + rng.normal(0.0, p["sigma"], img.shape), 0.0, 1.0)
    return denoise_tv_chambolle(noisy, weight=p.get("weight", p["sigma"]), channel_axis=-1)


def _tone_lightness(img, gamma):
    lab = color.rgb_to_lab(img)
    lab[..., 0] = 100.0 * np.clip(lab[..., 0] / 100.0, 0.0, 1.0) ** gamma
    return color.lab_to_rgb(lab)


def brighten(img, p, rng):
    return _tone_lightness(img, p["gamma"])


def darken(img, p, rng):
    return _tone_lightness(img, p["gamma"])


def mean_shift(img, p, rng):
    return img + p["delta"]


def jitter(img, p, rng):
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    yy += rng.normal(0.0, p["amount"], (h, w))
    xx += rng.normal(0.0, p["amount"], (h, w))
    return _per_channel(img, lambda ch: ndimage.map_coordinates(ch, [yy, xx], order=1, mode="nearest"))


def non_eccentricity_patch(img, p, rng):
    h, w = img.shape[:2]
    size = max(2, min(PATCH_SIZE, h // 2, w // 2))
    radius = max(1, min(PATCH_RADIUS, h // 4, w // 4))
    out = img.copy()
    for _ in range(int(p["count"])):
        y = int(rng.integers(0, h - size + 1))
        x = int(rng.integers(0, w - size + 1))
        dy, dx = 0, 0
        while dy == 0 and dx == 0:
            dy, dx = (int(v) for v in rng.integers(-radius, radius + 1, size=2))
        ty = min(max(y + dy, 0), h - size)
        tx = min(max(x + dx, 0), w - size)
        out[ty:ty + size, tx:tx + size] = img[y:y + size, x:x + size]
    return out


def pixelate(img: np.ndarray, factor: int) -> np.ndarray:
    h, w = img.shape[:2]
    f = int(factor)
    padded = np.pad(img, ((0, -h % f), (0, -w % f), (0, 0)), mode="edge")
    H, W = padded.shape[:2]
    small = padded.reshape(H // f, f, W // f, f, 3).mean(axis=(1, 3))
    return np.repeat(np.repeat(small, f, axis=0), f, axis=1)[:h, :w]


def pixelation(img, p, rng):
    return pixelate(img, p["factor"])


def quantization(img, p, rng):
    n = int(p["levels"])
    idx = np.minimum(np.floor(img * n), n - 1)
    return (idx + 0.5) / n


def color_block(img, p, rng):
    h, w = img.shape[:2]
    out = img.copy()
    for _ in range(int(p["count"])):
        bh = max(2, int(round(h * rng.uniform(*BLOCK_FRACTION))))
        bw = max(2, int(round(w * rng.uniform(*BLOCK_FRACTION))))
        y = int(rng.integers(0, h - bh + 1))
        x = int(rng.integers(0, w - bw + 1))
        out[y:y + bh, x:x + bw] = rng.random(3)
    return out


def high_sharpen(img, p, rng):
    blurred = _per_channel(img, lambda ch: ndimage.gaussian_filter(ch, SHARPEN_RADIUS, mode="reflect"))
    return img + p["amount"] * (img - blurred)


def contrast_change(img, p, rng):
    k = p["steepness"]
    lo, hi = expit(-k / 2), expit(k / 2)
    return (expit(k * (img - 0.5)) - lo) / (hi - lo)


SPATIAL_FUNCS: dict[str, Callable] = {name: globals()[name] for name in SPATIAL_CATEGORIES}


def apply_spatial_distortion(img: np.ndarray, spec: DistortionSpec, ladder: Mapping | None = None) -> np.ndarray:
    """Degrade ``img`` according to ``spec``; output has the same shape and lies in [0, 1]."""
    if is_video_category(spec.category):
        raise InvalidSpec(f"{spec.category} is a video distortion")
    img = check_image(img)
    ladder = load_ladder() if ladder is None else ladder
    params = ladder_params(ladder, spec.category, spec.severity)
    rng = np.random.default_rng(spec.seed)
    out = SPATIAL_FUNCS[spec.category](img, params, rng)
    return np.clip(out, 0.0, 1.0)


def psnr(ref: np.ndarray, test: np.ndarray, peak: float = 1.0) -> float:
    mse = float(np.mean((np.asarray(ref, float) - np.asarray(test, float)) ** 2))
    return float("inf") if mse == 0 else 10.0 * np.log10(peak * peak / mse)
