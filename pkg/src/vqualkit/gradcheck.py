"""Finite-difference checks of the analytic loss gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .losses import (
    FocalParams,
    TokenTargetSequence,
    focal_loss,
    kl_div,
    pairwise_kl_loss,
    scoring_single_loss,
    softmax5,
)
from .pmod import PairLabel, build_pmod

FD_STEP = 1e-6
REL_TOL = 1e-4
# gradients smaller than this are compared in absolute terms
GRAD_FLOOR = 1e-8


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2 * step)
    return g


def relative_error(analytic, numeric) -> float:
    a = np.atleast_1d(np.asarray(analytic, dtype=float))
    n = np.atleast_1d(np.asarray(numeric, dtype=float))
    scale = max(np.abs(a).max(), np.abs(n).max(), GRAD_FLOOR)
    return float(np.abs(a - n).max() / scale)


def _random_seq(rng, lo=0.05, hi=0.95, max_len=20) -> TokenTargetSequence:
    L = int(rng.integers(2, max_len + 1))
    return TokenTargetSequence(tuple(rng.uniform(lo, hi, size=L)))


def check_scoring(rng) -> float:
    seq = _random_seq(rng)
    pmod = build_pmod((float(rng.uniform(0, 1)), float(rng.uniform(0.01, 0.4))))
    z = rng.normal(0, 2, size=5)
    _, g_logits, g_probs = scoring_single_loss(seq, pmod, z)
    n_logits = central_difference(lambda v: scoring_single_loss(seq, pmod, v)[0], z)
    prefix = np.asarray(seq.target_probs[:-1])
    level_p = seq.target_probs[-1]

    def by_prefix(v):
        return scoring_single_loss(TokenTargetSequence(tuple(v) + (level_p,)), pmod, z)[0]

    n_probs = central_difference(by_prefix, prefix, h=1e-7)
    return max(relative_error(g_logits, n_logits), relative_error(g_probs[:-1], n_probs))


def check_pairwise(rng) -> float:
    label = PairLabel(float(rng.choice([0.0, 0.5, 1.0])))
    mu = rng.normal(0, 2, size=2)
    _, g1, g2 = pairwise_kl_loss(label, *mu)
    n = central_difference(lambda v: pairwise_kl_loss(label, v[0], v[1])[0], mu)
    return relative_error([g1, g2], n)


def check_focal(rng, params: FocalParams = FocalParams()) -> float:
    seq = _random_seq(rng)
    p = np.asarray(seq.target_probs)
    _, g = focal_loss(seq, params)
    n = central_difference(lambda v: focal_loss(TokenTargetSequence(tuple(v)), params)[0], p, h=1e-7)
    return relative_error(g, n)


def check_kl(rng) -> float:
    p = rng.dirichlet(np.ones(5))
    z = rng.normal(0, 2, size=5)
    _, g = kl_div(p, softmax5(z))
    n = central_difference(lambda v: kl_div(p, softmax5(v))[0], z)
    return relative_error(g, n)


CHECKS = {
    "scoring_single_loss": check_scoring,
    "pairwise_kl_loss": check_pairwise,
    "focal_loss": check_focal,
    "kl_div": check_kl,
}


@dataclass
class CheckRow:
    name: str
    instances: int
    max_rel_err: float
    tol: float = REL_TOL

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "instances": self.instances,
                "max_rel_err": self.max_rel_err, "tol": self.tol, "passed": self.passed}


def run_gradchecks(instances: int = 1000, seed: int = 0) -> list[CheckRow]:
    rows = []
    for k, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, k])
        worst = max(fn(rng) for _ in range(instances))
        rows.append(CheckRow(name, instances, worst))
    return rows


def format_table(rows: list[CheckRow]) -> str:
    lines = [f"{'loss':<22}{'n':>6}{'max rel err':>14}  result"]
    for r in rows:
        lines.append(f"{r.name:<22}{r.instances:>6}{r.max_rel_err:>14.3e}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
