"""Correlation statistics between predicted and ground-truth scores."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import CorrelationDegenerate
from .fusion import apply_sigmoid_map, fit_sigmoid_map


def _pair(pred: Sequence[float], gt: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(pred, dtype=float)
    y = np.asarray(gt, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pred and gt must be 1-D sequences of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 pairs")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite scores")
    return x, y


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.dot(xc, xc))
    sy = np.sqrt(np.dot(yc, yc))
    if sx == 0 or sy == 0:
        raise CorrelationDegenerate("constant score vector")
    return float(np.clip(np.dot(xc, yc) / (sx * sy), -1.0, 1.0))


def plcc(pred: Sequence[float], gt: Sequence[float]) -> float:
    return _pearson(*_pair(pred, gt))


def srcc(pred: Sequence[float], gt: Sequence[float]) -> float:
    """Spearman correlation with average ranks for ties."""
    x, y = _pair(pred, gt)
    return _pearson(rankdata(x, method="average"), rankdata(y, method="average"))


def fitted_plcc(pred: Sequence[float], gt: Sequence[float]) -> float:
    """PLCC after mapping ``pred`` onto ``gt`` with the four-parameter logistic."""
    x, y = _pair(pred, gt)
    fit = fit_sigmoid_map(x, y)
    mapped = apply_sigmoid_map(fit.params, x)
    # the logistic family contains affine maps only as a limit (gamma1 -> 0);
    # when the straight line fits better, that limit is the least-squares map
    # and PLCC is unchanged by it
    slope, intercept = np.polyfit(x, y, 1)
    if np.sum((slope * x + intercept - y) ** 2) <= np.sum((mapped - y) ** 2):
        return _pearson(x, y)
    return _pearson(mapped, y)


def evaluate(pred: Sequence[float], gt: Sequence[float]) -> dict:
    return {"srcc": srcc(pred, gt), "plcc": plcc(pred, gt),
            "fitted_plcc": fitted_plcc(pred, gt), "n": len(pred)}
