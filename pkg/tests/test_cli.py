import json

import numpy as np
import pytest

from pipeline import cli
from vqualkit.cli import PipelineConfig, main
from vqualkit.dataset import read_manifest
from vqualkit.fusion import OpinionSummary, write_summaries


def test_pmod_prints_distribution(capsys):
    assert main(["pmod", "--mu", "0.5", "--sigma", "0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    p = out["probs"]
    assert p == pytest.approx(p[::-1], abs=1e-15)
    assert out["level"] == "fair" and out["expected_score"] == pytest.approx(0.5)


def test_domain_error_exit_1(capsys):
    assert main(["pmod", "--mu", "1.5", "--sigma", "0.1"]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "InvalidSummary"


def test_missing_file_exit_1(tmp_path, capsys):
    assert main(["eval", "--pred", str(tmp_path / "nope.csv"), "--gt", str(tmp_path / "nope.csv")]) == 1
    assert "error" in json.loads(capsys.readouterr().err)


def test_usage_errors_exit_2(tmp_path):
    assert cli(["fuse"], tmp_path).returncode == 2
    assert cli(["frobnicate"], tmp_path).returncode == 2
    assert cli(["pmod", "--mu", "0.5"], tmp_path).returncode == 2


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 3, "colour": "blue"}))
    with pytest.raises(ValueError):
        PipelineConfig.load(str(cfg))
    cfg.write_text(json.dumps({"seed": 3, "ratio": [1, 1, 1]}))
    loaded = PipelineConfig.load(str(cfg))
    assert loaded.seed == 3 and loaded.ratio == (1, 1, 1)


def test_flag_overrides_config(tmp_path, capsys):
    rows = [OpinionSummary(f"i{k}", k / 40, 0.05, 4) for k in range(40)]
    write_summaries(rows, tmp_path / "s.jsonl")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1}))
    out = tmp_path / "m.jsonl"
    args = ["dataset", "--config", str(cfg), "--summaries", str(tmp_path / "s.jsonl"),
            "--pairs-count", "10", "--out", str(out)]
    assert main(args + ["--seed", "5"]) == 0
    records, header = read_manifest(out)
    assert header["seed"] == 5
    assert sum(r.task == "pair" for r in records) == 10


def test_eval_aligns_by_id(tmp_path, capsys):
    pred = [0.1, 0.5, 0.2, 0.9, 0.3, 0.8, 0.4, 0.6, 0.7, 0.05]
    ids = "abcdefghij"
    (tmp_path / "p.csv").write_text("item_id,score\n" + "".join(f"{i},{v}\n" for i, v in zip(ids, pred)))
    # ground truth listed in reverse order, on another scale
    (tmp_path / "g.csv").write_text("item_id,score\n" + "".join(
        f"{i},{1 + 4 * v ** 2}\n" for i, v in reversed(list(zip(ids, pred)))))
    assert main(["eval", "--pred", str(tmp_path / "p.csv"), "--gt", str(tmp_path / "g.csv")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["srcc"] == pytest.approx(1.0)


def test_loss_check_passes(capsys):
    assert main(["loss-check", "--instances", "20"]) == 0
    assert "kl_div" in capsys.readouterr().out


def test_simulate_small(capsys):
    assert main(["simulate", "--n", "100", "--trials", "2", "--seed", "4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["trials"] == 2 and "reports" not in out


def test_pair_labels_to_stdout(tmp_path, capsys):
    rows = [OpinionSummary(f"i{k}", k / 30, 0.05, 4) for k in range(30)]
    write_summaries(rows, tmp_path / "s.jsonl")
    assert main(["pair-labels", "--summaries", str(tmp_path / "s.jsonl"), "--count", "5", "--ratio", "2:2:1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5


def test_flicker_threshold_from_config(tmp_path, capsys, astronaut):
    from vqualkit.video import FrameSequence, write_frames

    frames = np.stack([astronaut * 0.9, astronaut, astronaut * 0.9, astronaut])
    write_frames(FrameSequence(frames), tmp_path / "clip")
    assert main(["metrics", "--video", "--input", str(tmp_path / "clip")]) == 0
    default = json.loads(capsys.readouterr().out)["flicker"]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"flicker_threshold": 0.5}))
    assert main(["metrics", "--video", "--input", str(tmp_path / "clip"), "--config", str(cfg)]) == 0
    assert default == 1.0 and json.loads(capsys.readouterr().out)["flicker"] == 0.0
