"""Training objectives as framework-free functions with analytic gradients.

A token sequence is represented only by the probability the model assigns to
each correct target token, so every loss here is a plain function of a few
numbers and can be checked against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import InfiniteDivergence, InfiniteLoss, InvalidDistribution
from .pmod import PairLabel, Pmod

SCORING_GAMMA = 0.01
PAIR_PROB_CLAMP = 1e-12
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TokenTargetSequence:
    """Per-position probability of the correct token; the last position is the level token."""

    target_probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.target_probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("target_probs must be a non-empty 1-D sequence")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("target_probs must lie in [0, 1]")

    @property
    def length(self) -> int:
        return len(self.target_probs)

    @property
    def level_index(self) -> int:
        return self.length - 1


@dataclass(frozen=True)
class FocalParams:
    alpha: float = 1.0
    beta: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta >= 0:
            raise ValueError(f"invalid focal params alpha={self.alpha} beta={self.beta}")


def softmax5(logits: Sequence[float]) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    if z.shape != (5,) or not np.all(np.isfinite(z)):
        raise ValueError("expected five finite logits")
    e = np.exp(z - z.max())
    return e / e.sum()


def kl_div(p: Sequence[float], q: Sequence[float]) -> tuple[float, np.ndarray]:
    """``KL(p || q)`` and its gradient with respect to the logits behind ``q``.

    With ``q = softmax(z)`` the gradient is ``q * sum(p) - p``. Terms with
    ``p_i = 0`` contribute nothing.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidDistribution("p and q differ in shape")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidDistribution(f"p is not a distribution: {p}")
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise InfiniteDivergence("q vanishes where p has mass")
    value = float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))
    grad = q * p.sum() - p
    return max(value, 0.0), grad


def _prefix_log_probs(seq: TokenTargetSequence) -> np.ndarray:
    prefix = np.asarray(seq.target_probs[: seq.level_index], dtype=float)
    if np.any(prefix <= 0):
        raise InfiniteLoss("a prefix token has probability 0")
    return prefix


def scoring_single_loss(
    seq: TokenTargetSequence,
    target: Pmod | Sequence[float],
    level_logits: Sequence[float],
    gamma: float = SCORING_GAMMA,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Scoring loss for one item: weighted prefix cross-entropy plus level-token KL.

    ``(1/L) * (-gamma * sum(log p_l for l < level) + KL(target || softmax(logits)))``

    Returns ``(loss, grad_logits, grad_probs)``; ``grad_probs`` has one entry per
    sequence position and is zero at the level position, whose probability is
    replaced by the KL term.
    """
    probs = np.asarray(target.probs if isinstance(target, Pmod) else target, dtype=float)
    L = seq.length
    prefix = _prefix_log_probs(seq)
    q = softmax5(level_logits)
    kl, kl_grad = kl_div(probs, q)
    ce = -float(np.sum(np.log(prefix)))
    loss = (gamma * ce + kl) / L
    grad_probs = np.zeros(L)
    grad_probs[: seq.level_index] = -gamma / (L * prefix)
    return loss, kl_grad / L, grad_probs


def pairwise_kl_loss(label: PairLabel | float, mu1_pred: float, mu2_pred: float) -> tuple[float, float, float]:
    """KL between the label and predicted two-outcome preference distributions.

    The prediction uses unit predicted sigmas: ``p = Phi((mu1 - mu2) / sqrt(2))``,
    clamped to ``[1e-12, 1 - 1e-12]``. Returns ``(loss, d/dmu1, d/dmu2)``; the
    gradient is zero where the clamp is active.
    """
    t = label.p_true if isinstance(label, PairLabel) else float(label)
    x = (mu1_pred - mu2_pred) / SQRT2
    p = float(ndtr(x))
    r = float(ndtr(-x))  # 1 - p without cancellation
    clamped = not (PAIR_PROB_CLAMP <= p <= 1 - PAIR_PROB_CLAMP)
    if clamped:
        # set the small side to the clamp itself; 1 - (1 - 1e-12) is not 1e-12 in floats
        if p < PAIR_PROB_CLAMP:
            p, r = PAIR_PROB_CLAMP, 1.0 - PAIR_PROB_CLAMP
        else:
            p, r = 1.0 - PAIR_PROB_CLAMP, PAIR_PROB_CLAMP
        log_p, log_r = math.log(p), math.log(r)
    else:
        log_p, log_r = float(log_ndtr(x)), float(log_ndtr(-x))

    loss = 0.0
    if t > 0:
        loss += t * (math.log(t) - log_p)
    if t < 1:
        loss += (1 - t) * (math.log(1 - t) - log_r)
    if clamped:
        return max(loss, 0.0), 0.0, 0.0
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    dloss_dx = (-t / p + (1 - t) / r) * pdf
    g = dloss_dx / SQRT2
    return max(loss, 0.0), g, -g


def focal_loss(seq: TokenTargetSequence, params: FocalParams = FocalParams()) -> tuple[float, np.ndarray]:
    """Mean focal-weighted cross-entropy over all positions, and its gradient per probability."""
    p = np.asarray(seq.target_probs, dtype=float)
    if np.any(p <= 0):
        raise InfiniteLoss("a target token has probability 0")
    a, b = params.alpha, params.beta
    L = len(p)
    logp = np.log(p)
    one_minus = 1.0 - p
    weight = one_minus ** b
    loss = float(np.sum(a * weight * -logp)) / L
    if b == 0:
        grad = -a / (L * p)
    else:
        grad = a * (b * one_minus ** (b - 1) * logp - weight / p) / L
    return loss, grad


def cross_entropy(seq: TokenTargetSequence) -> float:
    """Mean negative log-likelihood of the target tokens."""
    p = np.asarray(seq.target_probs, dtype=float)
    if np.any(p <= 0):
        raise InfiniteLoss("a target token has probability 0")
    return float(-np.mean(np.log(p)))
