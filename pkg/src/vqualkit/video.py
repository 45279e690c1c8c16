"""Video-specific distortions on frame sequences.

Stuttering and camera shake are computed in-process; H.264/H.265 go through
an external ffmpeg-compatible encoder whose path is taken from the
``ENCODER_BIN`` environment variable.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image

from .distortions import DistortionSpec, check_image, ladder_params, load_ladder
from .errors import CodecUnavailable, EncodeFailed, InvalidImage, InvalidSpec

CODECS = {
    # codec -> (ffmpeg encoder, preset)
    "h264": ("libx264", "fast"),
    "h265": ("libx265", "veryslow"),
}
FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class FrameSequence:
    frames: np.ndarray  # (T, H, W, 3) float in [0, 1]
    fps: float = 25.0

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.dtype == np.uint8:
            frames = frames.astype(float) / 255.0
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise InvalidImage(f"expected (T, H, W, 3) frames, got {frames.shape}")
        if frames.shape[0] < 2:
            raise InvalidImage("a frame sequence needs at least 2 frames")
        if not self.fps > 0:
            raise InvalidImage("fps must be positive")
        check_image(frames[0])
        if frames.min() < 0 or frames.max() > 1:
            raise InvalidImage("samples must be in [0, 1]")
        self.frames = frames.astype(float, copy=False)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:3]


def stutter_mask(n_frames: int, q: float, seed: int) -> np.ndarray:
    """Boolean per frame: True where the frame is replaced by the previous output."""
    rng = np.random.default_rng(seed)
    u = rng.random(n_frames - 1)
    return np.concatenate([[False], u <= q])


def apply_stutter(seq: FrameSequence, severity: int, seed: int, ladder: Mapping | None = None) -> FrameSequence:
    spec = DistortionSpec("stuttering", severity, seed)
    q = ladder_params(ladder or load_ladder(), "stuttering", spec.severity)["q"]
    frozen = stutter_mask(len(seq), q, seed)
    out = seq.frames.copy()
    for t in range(1, len(seq)):
        if frozen[t]:
            out[t] = out[t - 1]
    return FrameSequence(out, seq.fps)


def translate(frame: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Integer translation with edge replication (content moves by (dy, dx))."""
    h, w = frame.shape[:2]
    pad = max(abs(dy), abs(dx))
    if pad == 0:
        return frame.copy()
    padded = np.pad(frame, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    return padded[pad - dy:pad - dy + h, pad - dx:pad - dx + w]


def shake_offsets(n_frames: int, amplitude: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(-amplitude, amplitude + 1, size=(n_frames, 2))


def apply_camera_shake(seq: FrameSequence, severity: int, seed: int, ladder: Mapping | None = None) -> FrameSequence:
    spec = DistortionSpec("camera_shake", severity, seed)
    amp = int(ladder_params(ladder or load_ladder(), "camera_shake", spec.severity)["amplitude"])
    offsets = shake_offsets(len(seq), amp, seed)
    out = np.stack([translate(f, int(dy), int(dx)) for f, (dy, dx) in zip(seq.frames, offsets)])
    return FrameSequence(out, seq.fps)


def find_encoder(encoder: str | None = None) -> str:
    candidate = encoder or os.environ.get("ENCODER_BIN")
    if not candidate:
        raise CodecUnavailable("no encoder configured; set ENCODER_BIN to an ffmpeg binary")
    resolved = shutil.which(candidate)
    if resolved is None:
        raise CodecUnavailable(f"encoder binary not found: {candidate}")
    return resolved


def encode_command(binary: str, codec: str, crf: int, width: int, height: int, fps: float, out: Path) -> list[str]:
    lib, preset = CODECS[codec]
    return [
        binary, "-y", "-loglevel", "error",
        "-f", "rawvideo", "-pix_fmt", "rgb24", "-s", f"{width}x{height}", "-r", f"{fps:g}",
        "-i", "-",
        "-c:v", lib, "-preset", preset, "-crf", str(crf), "-pix_fmt", "yuv420p",
        str(out),
    ]


def decode_command(binary: str, src: Path) -> list[str]:
    return [binary, "-loglevel", "error", "-i", str(src), "-f", "rawvideo", "-pix_fmt", "rgb24", "-"]


def encode_video_external(
    seq: FrameSequence,
    codec: str,
    severity: int,
    workdir: str | Path | None = None,
    encoder: str | None = None,
    ladder: Mapping | None = None,
) -> FrameSequence:
    """Compress through the external encoder at the ladder CRF and decode back."""
    if codec not in CODECS:
        raise InvalidSpec(f"unknown codec {codec!r}")
    DistortionSpec(codec, severity)
    crf = int(ladder_params(ladder or load_ladder(), codec, severity)["crf"])
    binary = find_encoder(encoder)

    t, h, w = seq.frames.shape[:3]
    # yuv420p needs even dimensions
    ph, pw = h % 2, w % 2
    frames8 = np.round(seq.frames * 255).astype(np.uint8)
    if ph or pw:
        frames8 = np.pad(frames8, ((0, 0), (0, ph), (0, pw), (0, 0)), mode="edge")
    H, W = frames8.shape[1:3]

    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        out = Path(tmp) / f"encoded_{codec}_crf{crf}.mp4"
        enc = subprocess.run(encode_command(binary, codec, crf, W, H, seq.fps, out),
                             input=frames8.tobytes(), capture_output=True)
        if enc.returncode != 0:
            err = enc.stderr.decode(errors="replace")[-500:]
            raise EncodeFailed(f"encoder exited with {enc.returncode}", stderr=err)
        dec = subprocess.run(decode_command(binary, out), capture_output=True)
        if dec.returncode != 0:
            err = dec.stderr.decode(errors="replace")[-500:]
            raise EncodeFailed(f"decoder exited with {dec.returncode}", stderr=err)
    raw = np.frombuffer(dec.stdout, dtype=np.uint8)
    if raw.size != t * H * W * 3:
        raise EncodeFailed(f"decoded {raw.size // max(H * W * 3, 1)} frames, expected {t}")
    frames = raw.reshape(t, H, W, 3)[:, :h, :w].astype(float) / 255.0
    return FrameSequence(frames, seq.fps)


def apply_video_distortion(seq: FrameSequence, spec: DistortionSpec, workdir=None,
                           ladder: Mapping | None = None) -> FrameSequence:
    if spec.category == "stuttering":
        return apply_stutter(seq, spec.severity, spec.seed, ladder)
    if spec.category == "camera_shake":
        return apply_camera_shake(seq, spec.severity, spec.seed, ladder)
    if spec.category in CODECS:
        return encode_video_external(seq, spec.category, spec.severity, workdir, ladder=ladder)
    raise InvalidSpec(f"{spec.category} is not a video distortion")


def read_frames(directory: str | Path, fps: float = 25.0) -> FrameSequence:
    """Load a directory of frame images, ordered by file name."""
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not paths:
        raise InvalidImage(f"no frames in {directory}")
    frames = np.stack([np.asarray(Image.open(p).convert("RGB"), dtype=float) / 255.0 for p in paths])
    return FrameSequence(frames, fps)


def write_frames(seq: FrameSequence, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(seq.frames):
        p = directory / f"frame_{i:05d}.png"
        Image.fromarray(np.round(f * 255).astype(np.uint8)).save(p)
        paths.append(p)
    return paths
