"""Proxy machine opinion distributions and Thurstone pair probabilities.

A fused opinion ``(mu, sigma)`` becomes a five-level distribution over
Low, Poor, Fair, Good, High. Levels are the intervals of width 0.2 on [0, 1];
the distribution's mean is measured at the interval midpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import InvalidDistribution, InvalidSummary
from .fusion import OpinionSummary

LEVEL_EDGES = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
MIDPOINTS = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
# inference weights in Low -> High order; the affine image (m - 0.1) / 0.8 of MIDPOINTS
SCORE_WEIGHTS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])

SIGMA_FLOOR = 1e-6
# a midpoint mean can only lie in [0.1, 0.9]
MU_CLAMP = (0.1, 0.9)
# width of the band just inside each end of MU_CLAMP that absorbs the out-of-range tail
TAIL_BAND = 5e-7
SUM_TOL = 1e-9
MEAN_TOL = 1e-6


class QualityLevel(Enum):
    LOW = 0
    POOR = 1
    FAIR = 2
    GOOD = 3
    HIGH = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @property
    def bounds(self) -> tuple[float, float]:
        return (float(LEVEL_EDGES[self.value]), float(LEVEL_EDGES[self.value + 1]))


@dataclass(frozen=True)
class Pmod:
    probs: tuple[float, float, float, float, float]
    target_mu: float

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (5,) or np.any(p < 0) or abs(p.sum() - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"not a 5-level distribution: {self.probs}")
        if abs(float(p @ MIDPOINTS) - self.target_mu) > MEAN_TOL:
            raise InvalidDistribution(
                f"midpoint mean {float(p @ MIDPOINTS)!r} != target {self.target_mu!r}")

    @property
    def level(self) -> QualityLevel:
        return level_of(self.target_mu)

    @property
    def mean(self) -> float:
        return float(np.asarray(self.probs) @ MIDPOINTS)

    def to_dict(self) -> dict:
        return {"probs": list(self.probs), "target_mu": self.target_mu, "level": self.level.label}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Pmod":
        return cls(tuple(float(v) for v in d["probs"]), float(d["target_mu"]))


@dataclass(frozen=True)
class PairLabel:
    p_true: float

    def __post_init__(self):
        if self.p_true not in (0.0, 0.5, 1.0):
            raise InvalidDistribution(f"pair label must be 0, 0.5 or 1, got {self.p_true}")

    def mirrored(self) -> "PairLabel":
        return PairLabel(1.0 - self.p_true)

    def to_dict(self) -> dict:
        return {"p_true": self.p_true}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PairLabel":
        return cls(float(d["p_true"]))


def std_normal_cdf(x):
    """Standard normal CDF (scalar or array)."""
    out = ndtr(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_interval_mass(mu: float, sigma: float, a: float, b: float) -> float:
    if not sigma > 0:
        raise InvalidSummary(f"sigma must be positive, got {sigma}")
    if not a < b:
        raise ValueError(f"empty interval [{a}, {b}]")
    # for intervals in the upper tail, differencing upper-tail probabilities keeps precision
    za, zb = (a - mu) / sigma, (b - mu) / sigma
    if za > 0:
        return float(ndtr(-za) - ndtr(-zb))
    return float(ndtr(zb) - ndtr(za))


def level_of(mu: float) -> QualityLevel:
    """Interval containing ``mu``; a boundary belongs to the upper level, 1.0 to High."""
    if not (0.0 <= mu <= 1.0):
        raise InvalidSummary(f"mu {mu!r} outside [0, 1]")
    idx = int(np.searchsorted(LEVEL_EDGES, mu, side="right")) - 1
    return QualityLevel(min(idx, 4))


def _discretize(mu: float, sigma: float) -> np.ndarray:
    masses = np.array([gaussian_interval_mass(mu, sigma, a, b)
                       for a, b in zip(LEVEL_EDGES[:-1], LEVEL_EDGES[1:])])
    total = masses.sum()
    if total <= 0:
        # all mass underflowed outside [0, 1]; put it in the nearest end level
        masses[:] = 0.0
        masses[0 if mu < 0.5 else 4] = 1.0
        return masses
    return masses / total


def _tilt(p: np.ndarray, target: float) -> np.ndarray | None:
    """Solve ``p_i (1 + lam (m_i - target))`` for the multiplier that hits ``target``.

    The mean condition is linear in ``lam`` so the root is closed-form. Entries
    driven negative are zeroed and the solve repeats on the reduced support.
    Returns ``None`` when the support cannot reach ``target``.
    """
    support = p > 0
    d = MIDPOINTS - target
    for _ in range(5):
        w = np.where(support, p, 0.0)
        first = float(w @ d)
        second = float(w @ (d * d))
        if second == 0.0:
            return w / w.sum() if first == 0.0 and w.sum() > 0 else None
        lam = -first / second
        q = w * (1.0 + lam * d)
        neg = q < 0
        if not neg.any():
            q = np.where(support, q, 0.0)
            return q / q.sum() if q.sum() > 0 else None
        support &= ~neg
        if not support.any():
            return None
    return None


def _bracketing(target: float) -> np.ndarray:
    """Linear interpolation of ``target`` between the two nearest midpoints."""
    q = np.zeros(5)
    pos = (target - MIDPOINTS[0]) / 0.2
    lo = min(int(math.floor(pos)), 3)
    frac = pos - lo
    q[lo] = 1.0 - frac
    q[lo + 1] = frac
    return q


def reachable_target(mu: float) -> float:
    """Map ``mu`` in [0, 1] to the midpoint mean the distribution will carry.

    Identity on [0.1 + TAIL_BAND, 0.9 - TAIL_BAND]. Each tail, including the
    unreachable part outside [0.1, 0.9], is squeezed linearly into the band
    next to the end point, so the map stays strictly increasing (a flat clamp
    would tie every item past the ends) and is never off by more than
    TAIL_BAND where ``mu`` is reachable.
    """
    lo, hi = MU_CLAMP
    a, b = lo + TAIL_BAND, hi - TAIL_BAND
    if mu < a:
        return lo + TAIL_BAND * mu / a
    if mu > b:
        return hi - TAIL_BAND * (1.0 - mu) / (1.0 - b)
    return mu


def build_pmod(summary: OpinionSummary | tuple[float, float]) -> Pmod:
    """Five-level distribution with the fused mean preserved at the level midpoints.

    Steps: floor sigma, map mu into the reachable midpoint range
    (:func:`reachable_target`), integrate
    the Gaussian over the five intervals (truncated to [0, 1] and
    renormalised), then tilt the masses so the midpoint mean equals the
    clamped mu. If the Gaussian left too little support to reach the target
    (sigma tiny compared to the distance to a neighbouring level), the mass is
    split linearly between the two midpoints around mu.
    """
    mu, sigma = (summary.mu, summary.sigma) if isinstance(summary, OpinionSummary) else summary
    if not (math.isfinite(mu) and 0.0 <= mu <= 1.0):
        raise InvalidSummary(f"mu {mu!r} outside [0, 1]")
    if not math.isfinite(sigma) or sigma < 0:
        raise InvalidSummary(f"sigma {sigma!r} must be finite and non-negative")
    sigma = max(sigma, SIGMA_FLOOR)
    target = reachable_target(mu)

    raw = _discretize(mu, sigma)
    probs = _tilt(raw, target)
    if probs is None or abs(float(probs @ MIDPOINTS) - target) > 1e-12:
        probs = _bracketing(target)
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    return Pmod(tuple(float(v) for v in probs), target)


def expected_score(probs: Sequence[float]) -> float:
    """Weighted sum with weights 0, 0.25, 0.5, 0.75, 1 over Low..High."""
    p = np.asarray(probs, dtype=float)
    if p.shape != (5,) or np.any(p < 0) or abs(p.sum() - 1.0) > SUM_TOL or not np.all(np.isfinite(p)):
        raise InvalidDistribution(f"not a 5-level distribution: {probs}")
    return float(p @ SCORE_WEIGHTS)


def pairwise_prob(mu1: float, sigma1: float, mu2: float, sigma2: float) -> float:
    """Thurstone probability that item 1 is preferred over item 2."""
    if not (sigma1 > 0 and sigma2 > 0):
        raise InvalidSummary("pairwise_prob needs positive sigmas")
    return std_normal_cdf((mu1 - mu2) / math.sqrt(sigma1 * sigma1 + sigma2 * sigma2))


def pairwise_prob_unit(mu1: float, mu2: float) -> float:
    """Training-path convention: both predicted sigmas fixed to 1."""
    return pairwise_prob(mu1, 1.0, mu2, 1.0)


def pairwise_label(s1: OpinionSummary, s2: OpinionSummary) -> PairLabel:
    """1 if item 1 is better by more than the combined std, 0 if worse, else a tie."""
    gap = math.sqrt(s1.sigma * s1.sigma + s2.sigma * s2.sigma)
    if s1.mu - s2.mu > gap:
        return PairLabel(1.0)
    if s2.mu - s1.mu > gap:
        return PairLabel(0.0)
    return PairLabel(0.5)
