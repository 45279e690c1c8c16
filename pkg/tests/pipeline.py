"""Drive the full CLI chain on the 20-image fixture set, as a user would from a shell."""

import shutil
import subprocess
import sys
import time
from pathlib import Path

from conftest import FIXTURES

CLI20 = FIXTURES / "cli20"

STEPS = (
    ["fuse", "--table", "in/table.jsonl", "--out", "out/summaries.jsonl"],
    ["pmod", "--summaries", "out/summaries.jsonl", "--out", "out/pmods.jsonl"],
    ["distort", "--input", "in", "--category", "gaussian_blur", "jpeg", "impulse_noise",
     "--severity", "1", "3", "5", "--seed", "11", "--out", "out/distorted"],
    ["metrics", "--input", "out/distorted", "--out", "out/metrics.jsonl"],
    ["dataset", "--summaries", "out/summaries.jsonl", "--pmods", "out/pmods.jsonl",
     "--pairs-count", "10", "--distortions", "out/distorted/distortions.jsonl",
     "--statements", "in/statements.jsonl", "--seed", "11", "--out", "out/manifest.jsonl"],
)


def cli(args, cwd, check=False):
    return subprocess.run([sys.executable, "-m", "vqualkit", *args], cwd=cwd,
                          capture_output=True, text=True, check=check)


def run_pipeline(workdir: Path) -> tuple[list[int], float]:
    """Copy the fixtures to ``workdir/in`` and run every step; returns exit codes and wall time."""
    shutil.copytree(CLI20, workdir / "in")
    codes = []
    t0 = time.perf_counter()
    for step in STEPS:
        proc = cli(step, workdir)
        codes.append(proc.returncode)
        if proc.returncode:
            raise AssertionError(f"{step[0]} exited {proc.returncode}: {proc.stderr}")
    return codes, time.perf_counter() - t0


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
