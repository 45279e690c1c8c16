"""Synthetic ground truth and machine annotators for testing the fusion path.

Ground truth is a mixture on [0, 1]: 85% uniform on the core [0.15, 0.85]
and 7.5% uniform on each edge band. Each annotator sees
``warp(gt) + bias + noise`` clipped to the warp's output range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .fusion import (
    OpinionItem,
    RawOpinionTable,
    SigmoidMapParams,
    apply_sigmoid_map,
    fit_sigmoid_map,
    summarize_opinions,
)
from .pmod import build_pmod, expected_score
from .stats import srcc

CORE = (0.15, 0.85)
CORE_WEIGHT = 0.85
CALIBRATION_FRACTION = 0.5

# gamma1 small enough that the logistic is linear to ~1e-9 on [0, 1]
IDENTITY_WARP = SigmoidMapParams(1e-3, 0.0, 4000.0, -2000.0)


def mixture_cdf(x: float) -> float:
    """CDF of the ground-truth mixture."""
    lo, hi = CORE
    edge = (1.0 - CORE_WEIGHT) / 2
    x = min(max(x, 0.0), 1.0)
    c = edge * min(x, lo) / lo
    c += CORE_WEIGHT * min(max(x - lo, 0.0), hi - lo) / (hi - lo)
    c += edge * max(x - hi, 0.0) / (1.0 - hi)
    return c


def synth_ground_truth(n: int, seed: int = 0) -> np.ndarray:
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    lo, hi = CORE
    edge = (1.0 - CORE_WEIGHT) / 2
    comp = rng.choice(3, size=n, p=[edge, CORE_WEIGHT, edge])
    u = rng.random(n)
    bounds = np.array([[0.0, lo], [lo, hi], [hi, 1.0]])
    return bounds[comp, 0] + u * (bounds[comp, 1] - bounds[comp, 0])


@dataclass(frozen=True)
class SynthAnnotatorSpec:
    bias: float = 0.0
    noise_sigma: float = 0.1
    warp: SigmoidMapParams = IDENTITY_WARP
    seed: int = 0

    def __post_init__(self):
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        if not self.warp.gamma1 * self.warp.gamma3 > 0:
            raise ValueError("warp must be strictly increasing (gamma1 * gamma3 > 0)")

    def with_seed(self, seed: int) -> "SynthAnnotatorSpec":
        return SynthAnnotatorSpec(self.bias, self.noise_sigma, self.warp, seed)

    def to_dict(self) -> dict:
        return {"bias": self.bias, "noise_sigma": self.noise_sigma,
                "warp": self.warp.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthAnnotatorSpec":
        warp = SigmoidMapParams.from_dict(d["warp"]) if d.get("warp") else IDENTITY_WARP
        return cls(float(d.get("bias", 0.0)), float(d.get("noise_sigma", 0.1)), warp, int(d.get("seed", 0)))


def synth_scores(gt: Sequence[float], spec: SynthAnnotatorSpec) -> np.ndarray:
    gt = np.asarray(gt, dtype=float)
    rng = np.random.default_rng(spec.seed)
    raw = apply_sigmoid_map(spec.warp, gt) + spec.bias + rng.normal(0.0, spec.noise_sigma, size=gt.shape)
    lo, hi = spec.warp.output_range()
    return np.clip(raw, lo, hi)


@dataclass
class FusionReport:
    n_eval: int
    annotator_srcc: list[float]
    fused_srcc: float
    pmod_srcc: float
    pmod_vs_fused_srcc: float
    # exact comparison of the two rank vectors; srcc can round to 1 - 1e-16
    pmod_rank_identical: bool = False

    @property
    def fused_beats_best(self) -> bool:
        return self.fused_srcc >= max(self.annotator_srcc)

    def to_dict(self) -> dict:
        return {"n_eval": self.n_eval, "annotator_srcc": self.annotator_srcc,
                "fused_srcc": self.fused_srcc, "pmod_srcc": self.pmod_srcc,
                "pmod_vs_fused_srcc": self.pmod_vs_fused_srcc,
                "pmod_rank_identical": self.pmod_rank_identical,
                "fused_beats_best": self.fused_beats_best}


def run_fusion_experiment(n: int, specs: Sequence[SynthAnnotatorSpec], seed: int = 0) -> FusionReport:
    """Score synthetic items, calibrate each annotator on half, fuse and rank the other half.

    Each annotator's logistic map is fitted (raw score to ground truth) on a
    random calibration split; correlations are reported on the held-out
    items only.
    """
    if not specs:
        raise ValueError("need at least one annotator")
    gt = synth_ground_truth(n, seed)
    scores = {f"a{k}": synth_scores(gt, s) for k, s in enumerate(specs)}

    perm = np.random.default_rng([seed, 1]).permutation(n)
    n_cal = int(round(n * CALIBRATION_FRACTION))
    cal, ev = np.sort(perm[:n_cal]), np.sort(perm[n_cal:])

    maps = {name: fit_sigmoid_map(s[cal], gt[cal]).params for name, s in scores.items()}
    annotator_srcc = [srcc(apply_sigmoid_map(maps[name], s[ev]), gt[ev]) for name, s in scores.items()]

    items = [OpinionItem(f"item{i:05d}", "image", {name: float(s[i]) for name, s in scores.items()})
             for i in ev]
    summaries = summarize_opinions(RawOpinionTable(items), maps)
    mu = np.array([s.mu for s in summaries])
    pmod_scores = np.array([expected_score(build_pmod(s).probs) for s in summaries])
    return FusionReport(
        n_eval=len(ev),
        annotator_srcc=[float(v) for v in annotator_srcc],
        fused_srcc=float(srcc(mu, gt[ev])),
        pmod_srcc=float(srcc(pmod_scores, gt[ev])),
        pmod_vs_fused_srcc=float(srcc(pmod_scores, mu)),
        pmod_rank_identical=bool(np.array_equal(rankdata(pmod_scores), rankdata(mu))),
    )


def run_trials(n: int, specs: Sequence[SynthAnnotatorSpec], trials: int, seed: int = 0) -> dict:
    """Repeat the experiment with fresh ground truth and annotator noise per trial."""
    children = np.random.SeedSequence(seed).spawn(trials)
    reports = []
    for child in children:
        s = [int(v) for v in child.generate_state(len(specs) + 1, dtype=np.uint32)]
        trial_specs = [spec.with_seed(s[k + 1]) for k, spec in enumerate(specs)]
        reports.append(run_fusion_experiment(n, trial_specs, seed=s[0]))
    wins = sum(r.fused_beats_best for r in reports)
    return {
        "trials": trials,
        "fused_beats_best": wins,
        "mean_fused_srcc": float(np.mean([r.fused_srcc for r in reports])),
        "mean_best_annotator_srcc": float(np.mean([max(r.annotator_srcc) for r in reports])),
        "min_pmod_vs_fused_srcc": float(min(r.pmod_vs_fused_srcc for r in reports)),
        "pmod_rank_identical": sum(r.pmod_rank_identical for r in reports),
        "reports": [r.to_dict() for r in reports],
    }


def equal_annotators(k: int, noise_sigma: float = 0.1, bias: float = 0.0, seed: int = 0) -> list[SynthAnnotatorSpec]:
    return [SynthAnnotatorSpec(bias, noise_sigma, IDENTITY_WARP, seed + i) for i in range(k)]


def chi_square_bins(edges: Sequence[float]) -> np.ndarray:
    """Expected probability of each bin between consecutive ``edges`` under the mixture."""
    return np.diff([mixture_cdf(e) for e in edges])


__all__ = [
    "CORE", "CORE_WEIGHT", "IDENTITY_WARP", "SynthAnnotatorSpec", "FusionReport",
    "synth_ground_truth", "synth_scores", "run_fusion_experiment", "run_trials",
    "equal_annotators", "mixture_cdf", "chi_square_bins",
]
