"""Machine-opinion calibration and fusion.

Each machine annotator's raw scores are mapped onto a common scale with a
four-parameter logistic, pooled per modality, min-max rescaled and reduced to
a per-item mean and standard deviation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit

from .errors import (
    CalibrationDegenerate,
    CalibrationNoConverge,
    InvalidTable,
    MissingCalibration,
    RescaleDegenerate,
)

MODALITIES = ("image", "video")

# multi-start schedule for the logistic fit
MAX_NFEV = 500
STEP_TOL = 1e-10
# cosine between residual and Jacobian columns (MINPACK orthogonality test)
GRAD_TOL = 1e-8
MIN_FIT_POINTS = 8
# when no start converges, the best one gets up to STALL_ROUNDS further rounds
# of STALL_NFEV evaluations and is accepted once a round converges or lowers
# the cost by less than STALL_RTOL of the constant-fit cost: the
# solver is then drifting toward a limit of the logistic family (a line as
# gamma1 -> 0, or a step as |gamma1| -> inf) where the curve barely changes
STALL_NFEV = 50
STALL_RTOL = 1e-4
STALL_ROUNDS = 10


@dataclass(frozen=True)
class SigmoidMapParams:
    """``q' = gamma3 * sigmoid(gamma1 * q + gamma2) + gamma4``."""

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float

    def __post_init__(self):
        vals = (self.gamma1, self.gamma2, self.gamma3, self.gamma4)
        if not all(math.isfinite(v) for v in vals):
            raise CalibrationDegenerate(f"non-finite map parameters {vals}")
        if self.gamma3 == 0:
            raise CalibrationDegenerate("gamma3 == 0 gives a flat map")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.gamma1, self.gamma2, self.gamma3, self.gamma4)

    @property
    def is_increasing(self) -> bool:
        return self.gamma1 * self.gamma3 > 0

    def output_range(self) -> tuple[float, float]:
        lo, hi = self.gamma4, self.gamma4 + self.gamma3
        return (min(lo, hi), max(lo, hi))

    def to_dict(self) -> dict:
        return {"gamma1": self.gamma1, "gamma2": self.gamma2,
                "gamma3": self.gamma3, "gamma4": self.gamma4}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SigmoidMapParams":
        return cls(float(d["gamma1"]), float(d["gamma2"]),
                   float(d["gamma3"]), float(d["gamma4"]))


@dataclass(frozen=True)
class SigmoidFit:
    params: SigmoidMapParams
    rmse: float
    starts: int


@dataclass
class OpinionItem:
    item_id: str
    modality: str
    scores: dict[str, float]


@dataclass
class RawOpinionTable:
    items: list[OpinionItem]
    allow_partial: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        seen = set()
        reference = None
        for it in self.items:
            if it.item_id in seen:
                raise InvalidTable(f"duplicate item_id {it.item_id!r}")
            seen.add(it.item_id)
            if it.modality not in MODALITIES:
                raise InvalidTable(f"item {it.item_id!r}: unknown modality {it.modality!r}")
            if not it.scores:
                raise InvalidTable(f"item {it.item_id!r} has no annotator scores")
            for name, v in it.scores.items():
                if not math.isfinite(v):
                    raise InvalidTable(f"item {it.item_id!r}: non-finite score from {name!r}")
            keys = frozenset(it.scores)
            if reference is None:
                reference = keys
            elif keys != reference and not self.allow_partial:
                raise InvalidTable(
                    f"item {it.item_id!r} annotator set {sorted(keys)} differs from "
                    f"{sorted(reference)}; pass allow_partial=True to permit this"
                )

    @property
    def annotators(self) -> list[str]:
        names: set[str] = set()
        for it in self.items:
            names.update(it.scores)
        return sorted(names)


@dataclass(frozen=True)
class OpinionSummary:
    item_id: str
    mu: float
    sigma: float
    n: int
    modality: str = "image"

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "modality": self.modality,
                "mu": self.mu, "sigma": self.sigma, "n": self.n}

    @classmethod
    def from_dict(cls, d: Mapping) -> "OpinionSummary":
        return cls(str(d["item_id"]), float(d["mu"]), float(d["sigma"]),
                   int(d.get("n", 1)), str(d.get("modality", "image")))


def apply_sigmoid_map(params: SigmoidMapParams, q):
    """Evaluate the logistic map on a scalar or array."""
    out = params.gamma3 * expit(params.gamma1 * np.asarray(q, dtype=float) + params.gamma2) + params.gamma4
    return float(out) if np.ndim(out) == 0 else out


def _residuals(theta, x, y):
    g1, g2, g3, g4 = theta
    return g3 * expit(g1 * x + g2) + g4 - y


def _jacobian(theta, x, y):
    g1, g2, g3, _ = theta
    s = expit(g1 * x + g2)
    ds = s * (1.0 - s)
    return np.column_stack([g3 * ds * x, g3 * ds, s, np.ones_like(x)])


def _initial_guesses(x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    lo, hi = float(y.min()), float(y.max())
    span = hi - lo if hi > lo else 1.0
    xm, xs = float(x.mean()), float(x.std())
    rising = np.corrcoef(x, y)[0, 1] >= 0 if y.std() > 0 else True
    starts = []
    for scale in (1.0, 1.0 / xs):
        for g1 in (1.0, 5.0, -1.0, -5.0):
            g1 = g1 * scale
            # orient the curve so that gt increases with pred when they correlate positively
            up = (g1 > 0) == rising
            g3 = span if up else -span
            g4 = lo if up else hi
            starts.append(np.array([g1, -g1 * xm, g3, g4]))
    # near-linear start reproducing the least-squares line, so the fit never does worse than it
    slope, intercept = np.polyfit(x, y, 1)
    g1 = 0.01 / xs
    g3 = 4.0 * slope / g1
    starts.append(np.array([g1, -g1 * xm, g3, intercept + slope * xm - 0.5 * g3]))
    return starts


def _continue(res, x, y):
    """Extra rounds from an unconverged result; returns (result, settled)."""
    # progress is judged against the cost of the best constant fit, so that a
    # near-perfect fit creeping toward its limit is not held to a tiny scale
    scale = max(0.5 * float(np.sum((y - y.mean()) ** 2)), np.finfo(float).tiny)
    for _ in range(STALL_ROUNDS):
        more = least_squares(_residuals, res.x, jac=_jacobian, args=(x, y), method="lm",
                             xtol=STEP_TOL, ftol=1e-15, gtol=GRAD_TOL, max_nfev=STALL_NFEV)
        drop = res.cost - more.cost
        if more.cost < res.cost:
            res = more
        if more.status > 0 or drop <= STALL_RTOL * scale:
            return res, True
    return res, False


def fit_sigmoid_map(pred: Sequence[float], gt: Sequence[float]) -> SigmoidFit:
    """Least-squares fit of the four-parameter logistic mapping ``pred`` onto ``gt``.

    Runs a Levenberg-Marquardt solve from nine data-driven starting points
    and keeps the one with the lowest residual. Raises
    :class:`CalibrationNoConverge` (with the best parameters found) if no start
    converges within the budget and the best one is still making progress.
    """
    x = np.asarray(pred, dtype=float)
    y = np.asarray(gt, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise CalibrationDegenerate("pred and gt must be 1-D and of equal length")
    if len(x) < MIN_FIT_POINTS:
        raise CalibrationDegenerate(f"need at least {MIN_FIT_POINTS} points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise CalibrationDegenerate("non-finite input")
    if np.ptp(x) == 0:
        raise CalibrationDegenerate("pred is constant")

    best = None
    converged_any = False
    for theta0 in _initial_guesses(x, y):
        res = least_squares(_residuals, theta0, jac=_jacobian, args=(x, y), method="lm",
                            xtol=STEP_TOL, ftol=1e-15, gtol=GRAD_TOL, max_nfev=MAX_NFEV)
        if not np.all(np.isfinite(res.x)) or res.x[2] == 0:
            continue
        converged_any |= res.status > 0
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise CalibrationDegenerate("every start diverged")
    settled = converged_any
    if not settled:
        best, settled = _continue(best, x, y)
    rmse = float(np.sqrt(2.0 * best.cost / len(x)))
    params = SigmoidMapParams(*map(float, best.x))
    if not settled:
        raise CalibrationNoConverge("no start converged within the iteration budget",
                                    best=params, residual=rmse)
    return SigmoidFit(params, rmse, len(_initial_guesses(x, y)))


def rescale_scores(scores: Sequence[float], mode: str = "unit") -> list[float]:
    """Min-max rescale onto [0, 1] (``unit``) or [0, 100] (``percent``)."""
    arr = np.asarray(scores, dtype=float)
    if arr.size == 0:
        raise RescaleDegenerate("empty score list")
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        raise RescaleDegenerate(f"all scores equal ({lo})")
    top = {"unit": 1.0, "percent": 100.0}.get(mode)
    if top is None:
        raise ValueError(f"unknown rescale mode {mode!r}")
    return ((arr - lo) / (hi - lo) * top).tolist()


def summarize_opinions(
    table: RawOpinionTable,
    maps: Mapping[str, SigmoidMapParams | None],
    rescale: bool = True,
) -> list[OpinionSummary]:
    """Map, pool-rescale and reduce each item's machine opinions to (mu, sigma).

    ``maps[annotator] = None`` selects the identity map explicitly; an
    annotator absent from ``maps`` is an error. Rescaling is a single min-max
    over all mapped scores of one modality. Sigma is the population standard
    deviation.
    """
    for name in table.annotators:
        if name not in maps:
            raise MissingCalibration(name)

    mapped: list[np.ndarray] = []
    for it in table.items:
        names = sorted(it.scores)
        raw = np.array([it.scores[k] for k in names], dtype=float)
        vals = np.array([raw[i] if maps[k] is None else apply_sigmoid_map(maps[k], raw[i])
                         for i, k in enumerate(names)], dtype=float)
        mapped.append(vals)

    if rescale:
        for modality in MODALITIES:
            idx = [i for i, it in enumerate(table.items) if it.modality == modality]
            if not idx:
                continue
            pooled = np.concatenate([mapped[i] for i in idx])
            lo, hi = float(pooled.min()), float(pooled.max())
            if hi <= lo:
                raise RescaleDegenerate(f"all {modality} scores equal ({lo})")
            for i in idx:
                mapped[i] = (mapped[i] - lo) / (hi - lo)

    out = []
    for it, vals in zip(table.items, mapped):
        mu = float(np.clip(np.mean(vals), 0.0, 1.0))
        sigma = float(np.std(vals))
        out.append(OpinionSummary(it.item_id, mu, sigma, len(vals), it.modality))
    return out


# ---------------------------------------------------------------- table I/O

def _coerce_item(row: Mapping, skip: Iterable[str]) -> OpinionItem:
    try:
        item_id = str(row["item_id"])
    except KeyError:
        raise InvalidTable("row without item_id") from None
    modality = str(row.get("modality") or "image")
    scores = {}
    for k, v in row.items():
        if k in skip or v is None or v == "":
            continue
        try:
            scores[k] = float(v)
        except (TypeError, ValueError):
            raise InvalidTable(f"item {item_id!r}: non-numeric score {v!r} for {k!r}") from None
    return OpinionItem(item_id, modality, scores)


def read_opinion_table(path: str | Path, allow_partial: bool = False) -> RawOpinionTable:
    """Read a CSV or JSONL opinion table (``item_id``, ``modality``, one field per annotator)."""
    path = Path(path)
    skip = ("item_id", "modality")
    items = []
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                items.append(_coerce_item(row, skip))
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise InvalidTable(f"{path}:{lineno}: {exc}") from None
                if "scores" in row and isinstance(row["scores"], dict):
                    row = {"item_id": row.get("item_id"), "modality": row.get("modality"),
                           **row["scores"]}
                items.append(_coerce_item(row, skip))
    return RawOpinionTable(items, allow_partial=allow_partial)


def write_summaries(summaries: Iterable[OpinionSummary], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in summaries:
            fh.write(json.dumps(s.to_dict()) + "\n")
            n += 1
    return n


def read_summaries(path: str | Path) -> list[OpinionSummary]:
    with open(path, encoding="utf-8") as fh:
        return [OpinionSummary.from_dict(json.loads(line)) for line in fh if line.strip()]


def read_maps(path: str | Path) -> dict[str, SigmoidMapParams | None]:
    """Load ``{annotator: {gamma1..gamma4} | "identity"}`` from JSON."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return {k: (None if v in (None, "identity") else SigmoidMapParams.from_dict(v))
            for k, v in raw.items()}
