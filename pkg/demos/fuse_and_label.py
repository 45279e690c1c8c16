"""Walk through label construction on synthetic data.

Six noisy machine annotators score 400 items. Each is calibrated onto a
common scale on half the items, the calibrated scores are fused, and every
fused opinion becomes a five-level distribution plus a handful of
labelled pairs.

    python3 demos/fuse_and_label.py
"""

import numpy as np

from vqualkit import (
    OpinionItem,
    RawOpinionTable,
    build_pmod,
    expected_score,
    fit_sigmoid_map,
    srcc,
    summarize_opinions,
)
from vqualkit.dataset import make_pair_record, make_scoring_record, sample_pairs, stratum_counts
from vqualkit.fusion import SigmoidMapParams
from vqualkit.simulate import SynthAnnotatorSpec, synth_ground_truth, synth_scores

N = 400
rng = np.random.default_rng(0)
gt = synth_ground_truth(N, seed=0)

# annotators disagree on scale, offset and noise level
specs = [
    SynthAnnotatorSpec(0.0, 0.08, SigmoidMapParams(6.0, -3.0, 1.0, 0.0), seed=1),
    SynthAnnotatorSpec(0.1, 0.10, SigmoidMapParams(4.0, -2.0, 5.0, 1.0), seed=2),
    SynthAnnotatorSpec(-0.05, 0.12, SigmoidMapParams(8.0, -4.0, 1.0, 0.0), seed=3),
    SynthAnnotatorSpec(0.0, 0.10, SigmoidMapParams(3.0, -1.5, 100.0, 0.0), seed=4),
    SynthAnnotatorSpec(0.0, 0.15, SigmoidMapParams(5.0, -2.5, 1.0, 0.0), seed=5),
    SynthAnnotatorSpec(0.02, 0.09, SigmoidMapParams(7.0, -3.5, 10.0, 0.0), seed=6),
]
raw = {f"m{k}": synth_scores(gt, s) for k, s in enumerate(specs)}

cal = rng.permutation(N)[: N // 2]
held = np.setdiff1d(np.arange(N), cal)
maps = {}
for name, scores in raw.items():
    fit = fit_sigmoid_map(scores[cal], gt[cal])
    maps[name] = fit.params
    print(f"{name}: raw range [{scores.min():7.3f}, {scores.max():7.3f}]  fit rmse {fit.rmse:.4f}")

table = RawOpinionTable([OpinionItem(f"item{i:03d}", "image", {n: float(s[i]) for n, s in raw.items()})
                         for i in held])
summaries = summarize_opinions(table, maps)
mu = np.array([s.mu for s in summaries])

print()
for name, scores in raw.items():
    print(f"SRCC {name:>6}: {srcc(scores[held], gt[held]):.4f}")
print(f"SRCC  fused: {srcc(mu, gt[held]):.4f}")

pmods = [build_pmod(s) for s in summaries]
pscore = np.array([expected_score(p.probs) for p in pmods])
print(f"SRCC   pmod: {srcc(pscore, gt[held]):.4f}  (vs fused {srcc(pscore, mu):.6f})")

print("\nthree items and their distributions:")
for s, p in list(zip(summaries, pmods))[:3]:
    bars = " ".join(f"{v:5.3f}" for v in p.probs)
    print(f"  {s.item_id}  mu={s.mu:.3f} sigma={s.sigma:.3f}  [{bars}]  -> {make_scoring_record(s, p).target}")

pairs = sample_pairs(summaries, 20, seed=1)
by_id = {s.item_id: s for s in summaries}
print(f"\n20 pairs, strata {stratum_counts(pairs)}; first three:")
for a, b, label in pairs[:3]:
    print(f"  {a} vs {b}: {make_pair_record(by_id[a], by_id[b], label).target}")
