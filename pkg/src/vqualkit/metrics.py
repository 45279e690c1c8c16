"""Low-level quality metrics for images and frame sequences.

All metrics work on float RGB in [0, 1]. Luma uses BT.601 weights unless
overridden through :data:`LUMA_WEIGHTS`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .color import luma as _luma
from .errors import MetricInfeasible

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

BLOCK = 8
# interior gradients below this are treated as this value so tiled images stay finite
BLOCKINESS_FLOOR = 1e-3
NOISE_LOWPASS_SIGMA = 2.0
FLICKER_THRESHOLD = 0.02

# CPBD constants
CPBD_BLOCK = 64
CPBD_EDGE_BLOCK_FRACTION = 0.002
CPBD_BETA = 3.6
CPBD_CONTRAST_SPLIT = 50.0  # block contrast (0..255) at which the JNB width changes
CPBD_JNB_LOW_CONTRAST = 5.0
CPBD_JNB_HIGH_CONTRAST = 3.0
CPBD_P_JNB = 1.0 - math.exp(-1.0)


def luma(img: np.ndarray) -> np.ndarray:
    return _luma(img, LUMA_WEIGHTS)


def _std(a: np.ndarray) -> float:
    # np.std of a constant array can come out as ~1e-17 because the mean is rounded
    a = np.asarray(a)
    return 0.0 if a.size == 0 or np.ptp(a) == 0 else float(np.std(a))


def blockiness(img: np.ndarray) -> float:
    """Mean luma step across 8x8 block boundaries over the mean step inside blocks.

    Horizontal and vertical directions are summed separately before the
    ratio, so a smooth ramp scores 1 and a constant image scores 0.
    """
    y = luma(img)
    h, w = y.shape
    if h < 2 * BLOCK or w < 2 * BLOCK:
        raise MetricInfeasible(f"blockiness needs at least {2 * BLOCK}x{2 * BLOCK} pixels")
    y = y[: h - h % BLOCK, : w - w % BLOCK]
    dh = np.abs(np.diff(y, axis=1))  # step between column j and j+1
    dv = np.abs(np.diff(y, axis=0))
    hb = (np.arange(dh.shape[1]) % BLOCK) == BLOCK - 1
    vb = (np.arange(dv.shape[0]) % BLOCK) == BLOCK - 1
    boundary = dh[:, hb].mean() + dv[vb, :].mean()
    interior = dh[:, ~hb].mean() + dv[~vb, :].mean()
    if boundary == 0:
        return 0.0
    return float(boundary / max(interior, BLOCKINESS_FLOOR))


# ---------------------------------------------------------------- CPBD

@dataclass(frozen=True)
class CpbdResult:
    score: float
    n_edges: int

    @property
    def no_edges(self) -> bool:
        return self.n_edges == 0


def _vertical_edges(gray: np.ndarray) -> np.ndarray:
    """Sobel edges along the horizontal gradient, thinned to local maxima in x."""
    kernel = np.array([[1, 0, -1], [2, 0, -2], [1, 0, -1]], dtype=float) / 8.0
    strength = ndimage.convolve(gray, kernel, mode="reflect") ** 2
    cutoff = 4.0 * strength.mean()
    if cutoff == 0:
        return np.zeros_like(gray, dtype=bool)
    left = np.pad(strength, ((0, 0), (1, 0)))[:, :-1]
    right = np.pad(strength, ((0, 0), (0, 1)))[:, 1:]
    return (strength > cutoff) & (strength > left) & (strength >= right)


def _edge_width(row: np.ndarray, c: int, rising: bool) -> int:
    """Distance between the extrema bracketing the edge at column ``c``."""
    n = len(row)
    left = c
    right = c
    if rising:
        while left > 0 and row[left - 1] < row[left]:
            left -= 1
        while right < n - 1 and row[right + 1] > row[right]:
            right += 1
    else:
        while left > 0 and row[left - 1] > row[left]:
            left -= 1
        while right < n - 1 and row[right + 1] < row[right]:
            right += 1
    return right - left


def cpbd(img: np.ndarray) -> CpbdResult:
    """Cumulative probability of blur detection (sharpness in [0, 1], higher is sharper).

    Vertical edges are found with a Sobel operator; each edge pixel inside
    an edge-dense 64x64 block gets a width between the bracketing intensity
    extrema along its row. The block's contrast selects the just-noticeable
    blur width, each edge's blur-detection probability is
    ``1 - exp(-(w / w_jnb) ** 3.6)``, and the score is the fraction of edges
    whose probability stays at or below ``1 - 1/e``.
    """
    gray = luma(img) * 255.0
    edges = _vertical_edges(gray)
    gx = np.gradient(gray, axis=1)
    h, w = gray.shape
    probs = []
    for by in range(0, h, CPBD_BLOCK):
        for bx in range(0, w, CPBD_BLOCK):
            eb = edges[by:by + CPBD_BLOCK, bx:bx + CPBD_BLOCK]
            if np.count_nonzero(eb) <= eb.size * CPBD_EDGE_BLOCK_FRACTION:
                continue
            block = gray[by:by + CPBD_BLOCK, bx:bx + CPBD_BLOCK]
            contrast = block.max() - block.min()
            w_jnb = CPBD_JNB_LOW_CONTRAST if contrast <= CPBD_CONTRAST_SPLIT else CPBD_JNB_HIGH_CONTRAST
            for r, c in zip(*np.nonzero(eb)):
                r, c = r + by, c + bx
                if gx[r, c] == 0:
                    continue
                width = _edge_width(gray[r], c, gx[r, c] > 0)
                if width == 0:
                    continue
                probs.append(1.0 - math.exp(-((width / w_jnb) ** CPBD_BETA)))
    if not probs:
        return CpbdResult(0.0, 0)
    probs = np.asarray(probs)
    return CpbdResult(float(np.mean(probs <= CPBD_P_JNB)), len(probs))


def blur_cpbd(img: np.ndarray) -> float:
    return cpbd(img).score


# ---------------------------------------------------------------- simple statistics

def contrast(img: np.ndarray) -> float:
    return _std(luma(img))


def luminance(img: np.ndarray) -> float:
    return float(np.mean(luma(img)))


def noise_residual(img: np.ndarray) -> np.ndarray:
    y = luma(img)
    return y - ndimage.gaussian_filter(y, NOISE_LOWPASS_SIGMA, mode="reflect")


def noise_estimate(img: np.ndarray) -> float:
    """RMS of the luma residual after a Gaussian low-pass (sigma 2)."""
    return float(np.sqrt(np.mean(noise_residual(img) ** 2)))


def colourfulness(img: np.ndarray) -> float:
    """Opponent-colour statistic ``sqrt(s_rg^2 + s_yb^2) + 0.3 sqrt(m_rg^2 + m_yb^2)``."""
    img = np.asarray(img, dtype=float)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    rg = r - g
    yb = 0.5 * (r + g) - b
    return float(np.hypot(_std(rg), _std(yb)) + 0.3 * np.hypot(rg.mean(), yb.mean()))


def sobel_magnitude(y: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude on the interior (one-pixel border dropped)."""
    gx = ndimage.sobel(y, axis=1, mode="reflect")
    gy = ndimage.sobel(y, axis=0, mode="reflect")
    return np.hypot(gx, gy)[1:-1, 1:-1]


def spatial_information(img: np.ndarray) -> float:
    return _std(sobel_magnitude(luma(img)))


def _frames(seq) -> np.ndarray:
    frames = getattr(seq, "frames", seq)
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 4 or frames.shape[0] < 2:
        raise MetricInfeasible("need a (T, H, W, 3) sequence with at least 2 frames")
    return frames


def temporal_information(seq) -> float:
    """Maximum over consecutive frame pairs of the std of the luma difference."""
    y = luma(_frames(seq))
    return float(max(_std(y[t] - y[t - 1]) for t in range(1, len(y))))


def flicker(seq, threshold: float = FLICKER_THRESHOLD) -> float:
    """Fraction of consecutive frame pairs whose mean luma changes by more than ``threshold``."""
    means = luma(_frames(seq)).mean(axis=(1, 2))
    return float(np.mean(np.abs(np.diff(means)) > threshold))


# ---------------------------------------------------------------- report

@dataclass
class MetricReport:
    blockiness: float
    blur_cpbd: float
    contrast: float
    noise: float
    colourfulness: float
    luminance: float
    spatial_info: float
    flicker: float | None = None
    temporal_info: float | None = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.flicker is None:
            del d["flicker"]
        if self.temporal_info is None:
            del d["temporal_info"]
        return d


def image_metrics(img: np.ndarray) -> MetricReport:
    c = cpbd(img)
    return MetricReport(
        blockiness=blockiness(img),
        blur_cpbd=c.score,
        contrast=contrast(img),
        noise=noise_estimate(img),
        colourfulness=colourfulness(img),
        luminance=luminance(img),
        spatial_info=spatial_information(img),
        flags=["NoEdges"] if c.no_edges else [],
    )


def sequence_metrics(seq, flicker_threshold: float = FLICKER_THRESHOLD) -> MetricReport:
    """Per-frame metrics averaged over time; SI takes the maximum over frames."""
    frames = _frames(seq)
    per = [image_metrics(f) for f in frames]
    mean = lambda name: float(np.mean([getattr(r, name) for r in per]))  # noqa: E731
    flags = ["NoEdges"] if all("NoEdges" in r.flags for r in per) else []
    return MetricReport(
        blockiness=mean("blockiness"),
        blur_cpbd=mean("blur_cpbd"),
        contrast=mean("contrast"),
        noise=mean("noise"),
        colourfulness=mean("colourfulness"),
        luminance=mean("luminance"),
        spatial_info=float(max(r.spatial_info for r in per)),
        flicker=flicker(frames, flicker_threshold),
        temporal_info=temporal_information(frames),
        flags=flags,
    )
