"""Toolkit for building visual-quality training labels.

Calibrates and fuses machine quality scores, turns them into five-level
opinion distributions and pair labels, generates synthetic distortions,
computes low-level quality metrics and assembles JSONL training manifests.
"""

__version__ = "0.1.0"

from .errors import VQualError
from .fusion import (
    OpinionItem,
    OpinionSummary,
    RawOpinionTable,
    SigmoidMapParams,
    apply_sigmoid_map,
    fit_sigmoid_map,
    rescale_scores,
    summarize_opinions,
)
from .pmod import (
    PairLabel,
    Pmod,
    QualityLevel,
    build_pmod,
    expected_score,
    level_of,
    pairwise_label,
    pairwise_prob,
    reachable_target,
)
from .stats import evaluate, fitted_plcc, plcc, srcc

__all__ = [
    "VQualError",
    "OpinionItem", "OpinionSummary", "RawOpinionTable", "SigmoidMapParams",
    "apply_sigmoid_map", "fit_sigmoid_map", "rescale_scores", "summarize_opinions",
    "PairLabel", "Pmod", "QualityLevel", "build_pmod", "expected_score", "level_of",
    "pairwise_label", "pairwise_prob", "reachable_target",
    "evaluate", "fitted_plcc", "plcc", "srcc",
]
