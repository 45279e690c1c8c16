"""Command-line front end: ``vqualkit <subcommand> ...``.

Exit status is 0 on success, 1 on a domain error (reported on stderr as a
single JSON object) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dataset import (
    DEFAULT_RATIO,
    Accepted,
    HttpJudge,
    MockJudge,
    make_depict_record,
    make_distortion_record,
    make_pair_record,
    make_scoring_record,
    sample_pairs,
    scrutinize_statement,
    write_manifest,
)
from .distortions import (
    CATEGORIES,
    SPATIAL_CATEGORIES,
    DistortionSpec,
    apply_spatial_distortion,
    derive_seed,
    is_video_category,
    load_ladder,
    max_severity,
)
from .errors import InvalidSpec, JudgeUnavailable, VQualError
from .fusion import (
    OpinionSummary,
    read_maps,
    read_opinion_table,
    read_summaries,
    summarize_opinions,
    write_summaries,
)
from .gradcheck import format_table, run_gradchecks
from .media import is_image_file, load_image, save_image
from .metrics import FLICKER_THRESHOLD, image_metrics, sequence_metrics
from .pmod import Pmod, build_pmod, expected_score
from .simulate import SynthAnnotatorSpec, equal_annotators, run_trials
from .stats import evaluate
from .video import apply_video_distortion, read_frames, write_frames


@dataclass
class PipelineConfig:
    """Settings shared by the subcommands; a JSON file provides them and flags override it."""

    seed: int = 0
    ratio: tuple[int, int, int] = DEFAULT_RATIO
    judges: str = "mock"
    ladder: str | None = None
    ladder_overrides: dict = field(default_factory=dict)
    workers: int = 1
    flicker_threshold: float = FLICKER_THRESHOLD
    paths: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | None) -> "PipelineConfig":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.ratio = tuple(cfg.ratio)
        return cfg

    def override(self, args: argparse.Namespace) -> "PipelineConfig":
        for name in ("seed", "ratio", "judges", "ladder", "workers"):
            value = getattr(args, name, None)
            if value is not None:
                setattr(self, name, value)
        for key, value in vars(args).items():
            if value is not None and key in ("summaries", "table", "maps", "input", "out", "pmods",
                                             "distortions", "statements"):
                self.paths[key] = str(value)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = list(self.ratio)
        return d


def _ratio(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratio must look like 4:4:2")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("ratio parts must be integers") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _write_jsonl(rows, path: Path, header: dict | None = None) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(json.dumps({"_header": header}, sort_keys=True, separators=(",", ":")) + "\n")
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
            n += 1
    return n


def _read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return [r for r in rows if "_header" not in r]


def _pmap(fn, items, workers: int):
    """Map in input order; threads only help where numpy releases the GIL."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- subcommands

def cmd_fuse(args, cfg: PipelineConfig) -> int:
    table = read_opinion_table(args.table, allow_partial=args.allow_partial)
    if args.maps:
        maps = read_maps(args.maps)
    else:
        maps = {name: None for name in table.annotators}
    summaries = summarize_opinions(table, maps, rescale=not args.no_rescale)
    n = write_summaries(summaries, args.out)
    print(f"wrote {n} summaries to {args.out}", file=sys.stderr)
    return 0


def _pmod_row(s: OpinionSummary) -> dict:
    pm = build_pmod(s)
    return {"item_id": s.item_id, "modality": s.modality, **pm.to_dict(),
            "expected_score": expected_score(pm.probs)}


def cmd_pmod(args, cfg) -> int:
    if args.summaries:
        if not args.out:
            raise SystemExit("pmod: --out is required with --summaries")
        rows = [_pmod_row(s) for s in read_summaries(args.summaries)]
        _write_jsonl(rows, Path(args.out))
        print(f"wrote {len(rows)} distributions to {args.out}", file=sys.stderr)
        return 0
    if args.mu is None or args.sigma is None:
        raise SystemExit("pmod: give --mu and --sigma, or --summaries")
    pm = build_pmod((args.mu, args.sigma))
    print(_dump({**pm.to_dict(), "expected_score": expected_score(pm.probs)}))
    return 0


def cmd_pair_labels(args, cfg) -> int:
    summaries = read_summaries(args.summaries)
    pairs = sample_pairs(summaries, args.count, cfg.ratio, cfg.seed)
    rows = [{"first": a, "second": b, "p_true": lab.p_true} for a, b, lab in pairs]
    if args.out:
        _write_jsonl(rows, Path(args.out))
    else:
        for r in rows:
            print(json.dumps(r))
    return 0


def _categories(names: Sequence[str] | None, video: bool = False) -> list[str]:
    if not names or names == ["all"]:
        # codec categories need ENCODER_BIN, so they are only run when named
        return ["stuttering", "camera_shake"] if video else list(SPATIAL_CATEGORIES)
    for n in names:
        if n not in CATEGORIES:
            raise InvalidSpec(f"unknown category {n!r}")
    return list(names)


def _severities(cat: str, levels: Sequence[int] | None) -> list[int]:
    return list(levels) if levels else list(range(1, max_severity(cat) + 1))


def cmd_distort(args, cfg: PipelineConfig) -> int:
    ladder = load_ladder(cfg.ladder, cfg.ladder_overrides)
    src = Path(args.input)
    out = Path(args.out)
    cats = _categories(args.category, args.video)

    if args.video:
        seq = read_frames(src)
        rows = []
        for cat in cats:
            if not is_video_category(cat):
                raise InvalidSpec(f"{cat} is not a video distortion")
            for sev in _severities(cat, args.severity):
                spec = DistortionSpec(cat, sev, derive_seed(cfg.seed, src.name, cat))
                result = apply_video_distortion(seq, spec, ladder=ladder)
                dest = out / f"{src.name}__{cat}_{sev}"
                write_frames(result, dest)
                rows.append({"item_id": src.name, "modality": "video", "path": dest.name, **spec.to_dict(),
                             "label": spec.label})
        _write_jsonl(rows, out / "distortions.jsonl", header=cfg.to_dict())
        return 0

    paths = [src] if src.is_file() else sorted(p for p in src.iterdir() if is_image_file(p))
    if not paths:
        raise VQualError(f"no images under {src}")
    for cat in cats:
        if is_video_category(cat):
            raise InvalidSpec(f"{cat} needs --video")

    def work(path: Path) -> list[dict]:
        img = load_image(path)
        rows = []
        for cat in cats:
            seed = derive_seed(cfg.seed, path.stem, cat)
            for sev in _severities(cat, args.severity):
                spec = DistortionSpec(cat, sev, seed)
                name = f"{path.stem}__{cat}_{sev}.png"
                save_image(out / name, apply_spatial_distortion(img, spec, ladder))
                rows.append({"item_id": path.stem, "modality": "image", "path": name,
                             **spec.to_dict(), "label": spec.label})
        return rows

    out.mkdir(parents=True, exist_ok=True)
    rows = [r for chunk in _pmap(work, paths, cfg.workers) for r in chunk]
    _write_jsonl(rows, out / "distortions.jsonl", header=cfg.to_dict())
    print(f"wrote {len(rows)} distorted images to {out}", file=sys.stderr)
    return 0


def cmd_metrics(args, cfg: PipelineConfig) -> int:
    src = Path(args.input)
    if args.video:
        rows = [{"item_id": src.name, **sequence_metrics(read_frames(src), cfg.flicker_threshold).to_dict()}]
    else:
        paths = [src] if src.is_file() else sorted(p for p in src.iterdir() if is_image_file(p))
        if not paths:
            raise VQualError(f"no images under {src}")
        rows = _pmap(lambda p: {"item_id": p.stem, **image_metrics(load_image(p)).to_dict()},
                     paths, cfg.workers)
    if args.out:
        _write_jsonl(rows, Path(args.out))
    else:
        for r in rows:
            print(json.dumps(r))
    return 0


def read_scores(path) -> tuple[list[str] | None, np.ndarray]:
    """Scores from a CSV (``item_id,score``), JSONL (``{"item_id", "score"}``) or one number per line."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise VQualError(f"{path}: no scores")
    if lines[0].lstrip().startswith("{"):
        rows = [json.loads(ln) for ln in lines]
        return [str(r["item_id"]) for r in rows], np.array([float(r["score"]) for r in rows])
    if "," in lines[0]:
        rows = list(csv.DictReader(lines))
        if not rows or "score" not in rows[0]:
            raise VQualError(f"{path}: CSV needs a 'score' column")
        ids = [r["item_id"] for r in rows] if "item_id" in rows[0] else None
        return ids, np.array([float(r["score"]) for r in rows])
    return None, np.array([float(ln) for ln in lines])


def cmd_eval(args, cfg) -> int:
    pid, pred = read_scores(args.pred)
    gid, gt = read_scores(args.gt)
    if pid is not None and gid is not None:
        lookup = dict(zip(gid, gt))
        missing = [i for i in pid if i not in lookup]
        if missing:
            raise VQualError(f"{len(missing)} predicted items lack ground truth, e.g. {missing[0]!r}")
        gt = np.array([lookup[i] for i in pid])
    elif len(pred) != len(gt):
        raise VQualError(f"length mismatch: {len(pred)} predictions, {len(gt)} ground-truth scores")
    print(_dump(evaluate(pred, gt)))
    return 0


def _judges(kind: str, seed: int):
    if kind == "mock":
        return [MockJudge(seed + k) for k in range(3)]
    return [HttpJudge()]


def cmd_dataset(args, cfg: PipelineConfig) -> int:
    summaries = read_summaries(args.summaries)
    by_id = {s.item_id: s for s in summaries}
    records = []
    if args.pmods:
        for row in _read_jsonl(args.pmods):
            records.append(make_scoring_record(by_id[row["item_id"]], Pmod.from_dict(row)))
    else:
        records.extend(make_scoring_record(s, build_pmod(s)) for s in summaries)

    if args.pairs_count:
        for a, b, label in sample_pairs(summaries, args.pairs_count, cfg.ratio, cfg.seed):
            records.append(make_pair_record(by_id[a], by_id[b], label))

    if args.distortions:
        for row in _read_jsonl(args.distortions):
            spec = DistortionSpec(row["category"], int(row["severity"]), int(row["seed"]))
            item = {"item_id": row["item_id"], "modality": row.get("modality", "image")}
            records.append(make_distortion_record(item, spec, media_ref=row["path"]))

    deferred = 0
    if args.statements:
        judges = _judges(cfg.judges, cfg.seed)
        counts: dict[str, int] = {}
        for row in _read_jsonl(args.statements):
            item = {"item_id": row["item_id"], "modality": row.get("modality", "image")}
            try:
                verdict = scrutinize_statement(row["statement"], row.get("media_ref", row["item_id"]), judges)
            except JudgeUnavailable:
                deferred += 1
                continue
            if isinstance(verdict, Accepted):
                k = counts.get(row["item_id"], 0)
                counts[row["item_id"]] = k + 1
                records.append(make_depict_record(item, verdict.text, k))

    n = write_manifest(records, args.out, header=cfg.to_dict())
    print(f"wrote {n} records to {args.out}" + (f" ({deferred} statements deferred)" if deferred else ""),
          file=sys.stderr)
    return 0


def cmd_simulate(args, cfg: PipelineConfig) -> int:
    if args.annotators:
        with open(args.annotators, encoding="utf-8") as fh:
            raw = json.load(fh)
        if isinstance(raw, dict):
            specs = equal_annotators(int(raw.get("k", 6)), float(raw.get("noise_sigma", 0.1)),
                                     float(raw.get("bias", 0.0)))
        else:
            specs = [SynthAnnotatorSpec.from_dict(d) for d in raw]
    else:
        specs = equal_annotators(6)
    report = run_trials(args.n, specs, args.trials, cfg.seed)
    if not args.per_trial:
        report.pop("reports")
    print(_dump(report))
    return 0


def cmd_loss_check(args, cfg: PipelineConfig) -> int:
    rows = run_gradchecks(args.instances, cfg.seed)
    print(format_table(rows))
    return 0 if all(r.passed for r in rows) else 1


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config; flags override its values")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)

    p = argparse.ArgumentParser(prog="vqualkit", description="Visual quality label tooling.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("fuse", parents=[common], help="calibrate and fuse machine opinions")
    s.add_argument("--table", required=True, help="CSV or JSONL opinion table")
    s.add_argument("--maps", help="JSON annotator -> logistic params (default: identity for all)")
    s.add_argument("--no-rescale", action="store_true", help="skip the per-modality min-max rescale")
    s.add_argument("--allow-partial", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("pmod", parents=[common], help="build five-level opinion distributions")
    s.add_argument("--mu", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--summaries")
    s.add_argument("--out")
    s.set_defaults(func=cmd_pmod)

    s = sub.add_parser("pair-labels", parents=[common], help="sample labelled pairs")
    s.add_argument("--summaries", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--ratio", type=_ratio)
    s.add_argument("--out")
    s.set_defaults(func=cmd_pair_labels)

    s = sub.add_parser("distort", parents=[common], help="apply synthetic distortions")
    s.add_argument("--input", required=True, help="image, image directory or frame directory")
    s.add_argument("--category", nargs="+", help="categories (default: all spatial ones)")
    s.add_argument("--severity", nargs="+", type=int)
    s.add_argument("--video", action="store_true", help="treat --input as a directory of frames")
    s.add_argument("--ladder", help="JSON ladder overrides")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_distort)

    s = sub.add_parser("metrics", parents=[common], help="low-level quality metrics")
    s.add_argument("--input", required=True)
    s.add_argument("--video", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("eval", parents=[common], help="SRCC / PLCC / fitted PLCC")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("dataset", parents=[common], help="assemble a training manifest")
    s.add_argument("--summaries", required=True)
    s.add_argument("--pmods", help="JSONL from `pmod --summaries` (default: rebuilt)")
    s.add_argument("--pairs-count", type=int, default=0)
    s.add_argument("--ratio", type=_ratio)
    s.add_argument("--distortions", help="distortions.jsonl written by `distort`")
    s.add_argument("--statements", help="JSONL of {item_id, statement} to scrutinize")
    s.add_argument("--judges", choices=["mock", "http"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("simulate", parents=[common], help="synthetic fusion experiment")
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--annotators", help="JSON list of annotator specs or {k, noise_sigma, bias}")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--per-trial", action="store_true", help="include every trial's report")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("loss-check", parents=[common], help="finite-difference gradient checks")
    s.add_argument("--instances", type=int, default=1000)
    s.set_defaults(func=cmd_loss_check)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = PipelineConfig.load(args.config).override(args)
        return args.func(args, cfg)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            parser.print_usage(sys.stderr)
            print(exc.code, file=sys.stderr)
            return 2
        raise
    except VQualError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
