"""Training manifest assembly: scoring, pair, distortion and description records.

Records are serialized one JSON object per line with the key order of
:data:`RECORD_KEYS`. Description statements pass through judge voting and
self-judging before they become records.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .distortions import DistortionSpec
from .errors import InvalidRecord, JudgeUnavailable, PairBudgetExhausted
from .fusion import MODALITIES, OpinionSummary
from .pmod import PairLabel, Pmod, level_of, pairwise_label

TASKS = ("distribution", "pair", "distortion", "depict")
RECORD_KEYS = ("record_id", "media_ref", "modality", "task", "prompt", "target", "payload", "pair_ref")

SCORING_TEMPLATE = "The quality of the {modality} is {level}."
PAIR_TEMPLATES = {
    1.0: "The first {modality} has better quality than the second.",
    0.0: "The first {modality} has worse quality than the second.",
    0.5: "The two {modality}s have similar quality.",
}

DEFAULT_RATIO = (4, 4, 2)
RATIO_TOLERANCE = 0.02
PAIR_BUDGET_FACTOR = 50

JUDGE_ROUNDS = 3
SELF_JUDGE_PROMPTS = (
    "Given one {modality}, describe whether the visual quality assessment statement "
    "\"{statement}\" is correct.\nA. Yes\nB. No",
    "Statement about the {modality}: \"{statement}\"\nDoes this statement describe the visual "
    "quality of the {modality} correctly?\nA. Yes\nB. No",
    "Look at the {modality} and answer with one letter. Is the following quality assessment "
    "accurate? \"{statement}\"\nA. Yes\nB. No",
)

JUDGE_RETRIES = 3
JUDGE_BACKOFF = 0.5


def media_prompt(modality: str) -> str:
    return f"[{modality}]"


def self_judge_prompt(statement: str, modality: str, round_index: int) -> str:
    """Prompt text for one self-judge round; backends receive the round as the variant index."""
    return SELF_JUDGE_PROMPTS[round_index % len(SELF_JUDGE_PROMPTS)].format(
        statement=statement, modality=modality)


# ---------------------------------------------------------------- records

@dataclass(frozen=True)
class VLPairRecord:
    record_id: str
    media_ref: str
    modality: str
    task: str
    prompt: str
    target: str
    payload: Pmod | PairLabel | None = None
    pair_ref: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.record_id:
            raise InvalidRecord("empty record_id")
        if self.modality not in MODALITIES:
            raise InvalidRecord(f"{self.record_id}: unknown modality {self.modality!r}")
        if self.task not in TASKS:
            raise InvalidRecord(f"{self.record_id}: unknown task {self.task!r}")
        if self.task == "pair" and (self.pair_ref is None or not isinstance(self.payload, PairLabel)):
            raise InvalidRecord(f"{self.record_id}: pair records need pair_ref and a PairLabel payload")
        if self.task == "distribution" and not isinstance(self.payload, Pmod):
            raise InvalidRecord(f"{self.record_id}: distribution records need a Pmod payload")
        if self.task != "pair" and self.pair_ref is not None:
            raise InvalidRecord(f"{self.record_id}: pair_ref only allowed on pair records")

    def to_dict(self) -> dict:
        payload = None if self.payload is None else self.payload.to_dict()
        values = (self.record_id, self.media_ref, self.modality, self.task,
                  self.prompt, self.target, payload, self.pair_ref)
        return dict(zip(RECORD_KEYS, values))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> "VLPairRecord":
        task = d["task"]
        raw = d.get("payload")
        payload = None
        if raw is not None:
            payload = PairLabel.from_dict(raw) if task == "pair" else Pmod.from_dict(raw)
        return cls(d["record_id"], d["media_ref"], d["modality"], task, d["prompt"], d["target"],
                   payload, d.get("pair_ref"))


def _item_fields(item) -> tuple[str, str]:
    """(item_id, modality) from an OpinionSummary, a mapping or a bare id."""
    if isinstance(item, str):
        return item, "image"
    if isinstance(item, Mapping):
        return str(item["item_id"]), item.get("modality", "image")
    return item.item_id, getattr(item, "modality", "image")


def make_scoring_record(item, pmod: Pmod) -> VLPairRecord:
    item_id, modality = _item_fields(item)
    target = SCORING_TEMPLATE.format(modality=modality, level=level_of(pmod.target_mu).label)
    return VLPairRecord(f"{item_id}#distribution", item_id, modality, "distribution",
                        media_prompt(modality), target, pmod)


def make_distortion_record(item, spec: DistortionSpec, media_ref: str | None = None) -> VLPairRecord:
    """``media_ref`` points at the distorted file when it differs from the item id."""
    item_id, modality = _item_fields(item)
    rid = f"{item_id}#{spec.category}-{spec.severity}"
    return VLPairRecord(rid, media_ref or item_id, modality, "distortion",
                        media_prompt(modality), spec.label)


def make_pair_record(first, second, label: PairLabel) -> VLPairRecord:
    id1, modality = _item_fields(first)
    id2, _ = _item_fields(second)
    target = PAIR_TEMPLATES[label.p_true].format(modality=modality)
    prompt = f"{media_prompt(modality)} {media_prompt(modality)}"
    return VLPairRecord(f"{id1}|{id2}#pair", id1, modality, "pair", prompt, target, label, id2)


def make_depict_record(item, statement: str, index: int = 0) -> VLPairRecord:
    item_id, modality = _item_fields(item)
    return VLPairRecord(f"{item_id}#depict-{index}", item_id, modality, "depict",
                        media_prompt(modality), statement)


# ---------------------------------------------------------------- pair sampling

def _quotas(count: int, ratio: Sequence[int]) -> dict[float, int]:
    """Largest-remainder split of ``count`` into better/worse/tie quotas."""
    r = np.asarray(ratio, dtype=float)
    if r.shape != (3,) or np.any(r < 0) or r.sum() <= 0:
        raise ValueError(f"ratio must be three non-negative numbers, got {ratio}")
    exact = count * r / r.sum()
    base = np.floor(exact).astype(int)
    for i in np.argsort(-(exact - base), kind="stable")[: count - base.sum()]:
        base[i] += 1
    return {1.0: int(base[0]), 0.0: int(base[1]), 0.5: int(base[2])}


def sample_pairs(
    summaries: Sequence[OpinionSummary],
    count: int,
    ratio: Sequence[int] = DEFAULT_RATIO,
    seed: int = 0,
) -> list[tuple[str, str, PairLabel]]:
    """Draw ``count`` labelled pairs whose better:worse:tie split follows ``ratio``.

    Each draw picks two distinct items uniformly; an unordered pair is used
    at most once. Draws that land in an already-full stratum are flipped if
    the mirrored label fills an open one, otherwise rejected. The budget is
    ``50 * count`` draws.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    n = len(summaries)
    quotas = _quotas(count, ratio)
    if count == 0:
        return []
    if n < 2:
        raise PairBudgetExhausted("need at least two items", achieved={"better": 0, "worse": 0, "tie": 0})
    rng = np.random.default_rng(seed)
    seen: set[tuple[int, int]] = set()
    filled = Counter()
    out = []
    budget = PAIR_BUDGET_FACTOR * count
    for _ in range(budget):
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        label = pairwise_label(summaries[i], summaries[j])
        if filled[label.p_true] >= quotas[label.p_true]:
            flipped = label.mirrored()
            if filled[flipped.p_true] >= quotas[flipped.p_true]:
                continue
            i, j, label = j, i, flipped
        seen.add(key)
        filled[label.p_true] += 1
        out.append((summaries[i].item_id, summaries[j].item_id, label))
        if len(out) == count:
            return out
    achieved = {"better": filled[1.0], "worse": filled[0.0], "tie": filled[0.5],
                "requested": {"better": quotas[1.0], "worse": quotas[0.0], "tie": quotas[0.5]}}
    raise PairBudgetExhausted(f"filled {len(out)} of {count} pairs within {budget} draws", achieved=achieved)


def stratum_counts(pairs: Iterable[tuple[str, str, PairLabel]]) -> dict[str, int]:
    c = Counter(label.p_true for _, _, label in pairs)
    return {"better": c[1.0], "worse": c[0.0], "tie": c[0.5]}


# ---------------------------------------------------------------- judges

@dataclass(frozen=True)
class JudgeVerdict:
    score: int
    revision: str | None = None
    reason: str | None = None

    def __post_init__(self):
        if self.score not in (0, 1, 2):
            raise ValueError(f"judge score must be 0, 1 or 2, got {self.score}")
        if self.score == 1 and not self.revision:
            raise ValueError("a score of 1 needs a revision")
        if self.score == 0 and not self.reason:
            raise ValueError("a score of 0 needs a reason")

    @classmethod
    def from_dict(cls, d: Mapping) -> "JudgeVerdict":
        return cls(int(d["score"]), d.get("revision"), d.get("reason"))


class JudgeBackend(Protocol):
    def evaluate(self, statement: str, media_ref: str, round_index: int) -> JudgeVerdict: ...

    def binary_judge(self, statement: str, media_ref: str, round_index: int) -> bool: ...


@dataclass
class ScriptedJudge:
    """Replays fixed answers in call order; records every call.

    ``verdicts`` feed :meth:`evaluate` and ``answers`` feed
    :meth:`binary_judge`; the last entry repeats once a script runs out.
    An entry that is an exception instance is raised instead.
    """

    verdicts: Sequence = (JudgeVerdict(2),)
    answers: Sequence = (True,)
    calls: list = field(default_factory=list)

    def _next(self, script, kind):
        n = sum(1 for c in self.calls if c[0] == kind)
        return script[min(n, len(script) - 1)]

    def evaluate(self, statement, media_ref, round_index):
        entry = self._next(self.verdicts, "evaluate")
        self.calls.append(("evaluate", statement, media_ref, round_index))
        if isinstance(entry, BaseException):
            raise entry
        return entry

    def binary_judge(self, statement, media_ref, round_index):
        entry = self._next(self.answers, "binary")
        self.calls.append(("binary", statement, media_ref, round_index))
        if isinstance(entry, BaseException):
            raise entry
        return bool(entry)


@dataclass(frozen=True)
class MockJudge:
    """Seeded stand-in: verdicts depend only on (seed, statement, media, round)."""

    seed: int = 0
    p_accept: float = 0.8
    p_minor: float = 0.1

    def _u(self, statement, media_ref, round_index, salt):
        h = hashlib.blake2b(f"{self.seed}|{salt}|{media_ref}|{round_index}|{statement}".encode(), digest_size=8)
        return int.from_bytes(h.digest(), "little") / 2**64

    def evaluate(self, statement, media_ref, round_index):
        u = self._u(statement, media_ref, round_index, "evaluate")
        if u < self.p_accept:
            return JudgeVerdict(2)
        if u < self.p_accept + self.p_minor:
            return JudgeVerdict(1, revision=statement.rstrip(".") + ", to a minor degree.")
        return JudgeVerdict(0, reason="statement does not match the media")

    def binary_judge(self, statement, media_ref, round_index):
        return self._u(statement, media_ref, round_index, "binary") < self.p_accept ** (1 / JUDGE_ROUNDS)


class HttpJudge:
    """Generic JSON-over-HTTP judge.

    POSTs ``{statement, media_url, round}`` to ``<endpoint>/evaluate`` and
    ``<endpoint>/self-judge``; the responses are ``{score, revision?, reason?}``
    and ``{answer: bool}``. Endpoint and bearer token default to
    ``JUDGE_ENDPOINT`` and ``JUDGE_TOKEN``.
    """

    def __init__(self, endpoint: str | None = None, token: str | None = None,
                 timeout: float = 30.0, retries: int = JUDGE_RETRIES, backoff: float = JUDGE_BACKOFF):
        self.endpoint = (endpoint or os.environ.get("JUDGE_ENDPOINT") or "").rstrip("/")
        if not self.endpoint:
            raise JudgeUnavailable("no judge endpoint configured; set JUDGE_ENDPOINT")
        self.token = token if token is not None else os.environ.get("JUDGE_TOKEN")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _post(self, route: str, body: dict) -> dict:
        data = json.dumps(body).encode()
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last = None
        for attempt in range(self.retries):
            req = urllib.request.Request(f"{self.endpoint}/{route}", data=data, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode())
            except (urllib.error.URLError, OSError, ValueError) as exc:
                last = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise JudgeUnavailable(f"judge at {self.endpoint}/{route} failed after {self.retries} attempts: {last}")

    def evaluate(self, statement, media_ref, round_index):
        d = self._post("evaluate", {"statement": statement, "media_url": media_ref, "round": round_index})
        try:
            return JudgeVerdict.from_dict(d)
        except (KeyError, TypeError, ValueError) as exc:
            raise JudgeUnavailable(f"malformed judge response {d!r}: {exc}") from exc

    def binary_judge(self, statement, media_ref, round_index):
        d = self._post("self-judge", {"statement": statement, "media_url": media_ref, "round": round_index})
        if not isinstance(d.get("answer"), bool):
            raise JudgeUnavailable(f"malformed self-judge response {d!r}")
        return d["answer"]


@dataclass(frozen=True)
class Accepted:
    text: str
    revised: bool = False


@dataclass(frozen=True)
class Discarded:
    reason: str


def _call(fn, *args):
    try:
        return fn(*args)
    except JudgeUnavailable:
        raise
    except Exception as exc:  # any backend fault defers the item
        raise JudgeUnavailable(f"judge backend failed: {exc}") from exc


def self_judge(statement: str, media_ref: str, judge: JudgeBackend, rounds: int = JUDGE_ROUNDS) -> bool:
    """True iff every round answers yes. All rounds run even after a no."""
    votes = [_call(judge.binary_judge, statement, media_ref, r) for r in range(rounds)]
    return all(votes)


def scrutinize_statement(
    statement: str,
    media_ref: str,
    judges: Sequence[JudgeBackend],
    rounds: int = JUDGE_ROUNDS,
    self_judge_backend: JudgeBackend | None = None,
) -> Accepted | Discarded:
    """Judge vote over ``rounds`` rounds.

    All 2s accept the statement as is; any 0 discards it. Otherwise the
    first revision offered (in round, then judge order) replaces the
    statement, and it is kept only if it passes :func:`self_judge` with
    ``self_judge_backend`` (default: the first judge).
    """
    if not judges:
        raise ValueError("need at least one judge")
    verdicts = []
    for r in range(rounds):
        for judge in judges:
            verdicts.append(_call(judge.evaluate, statement, media_ref, r))
    zero = next((v for v in verdicts if v.score == 0), None)
    if zero is not None:
        return Discarded(zero.reason)
    minor = next((v for v in verdicts if v.score == 1), None)
    if minor is None:
        return Accepted(statement)
    if self_judge(minor.revision, media_ref, self_judge_backend or judges[0], rounds):
        return Accepted(minor.revision, revised=True)
    return Discarded("revision failed self-judge")


# ---------------------------------------------------------------- overlap and manifests

def overlap_check(train_ids: Iterable[str], test_ids: Iterable[str]) -> list[str]:
    return sorted(set(train_ids) & set(test_ids))


def write_manifest(records: Iterable[VLPairRecord], path: str | Path, header: Mapping | None = None) -> int:
    """Write JSONL; ``header`` (e.g. the effective config) becomes a first line ``{"_header": ...}``."""
    path = Path(path)
    n = 0
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if header is not None:
                fh.write(json.dumps({"_header": header}, ensure_ascii=False, sort_keys=True,
                                    separators=(",", ":")) + "\n")
            for rec in records:
                rec.validate()
                fh.write(rec.to_json() + "\n")
                n += 1
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return n


def read_manifest(path: str | Path) -> tuple[list[VLPairRecord], dict | None]:
    records = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidRecord(f"{path}:{lineno}: {exc}") from exc
            if "_header" in d:
                header = d["_header"]
                continue
            records.append(VLPairRecord.from_dict(d))
    return records, header
