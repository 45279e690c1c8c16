import numpy as np
import pytest

from conftest import FAKE_ENCODER
from vqualkit.distortions import DistortionSpec, psnr
from vqualkit.errors import CodecUnavailable, EncodeFailed, InvalidImage, InvalidSpec
from vqualkit.video import (
    FrameSequence,
    apply_camera_shake,
    apply_stutter,
    apply_video_distortion,
    encode_command,
    encode_video_external,
    find_encoder,
    read_frames,
    shake_offsets,
    stutter_mask,
    translate,
    write_frames,
)


@pytest.fixture
def clip(astronaut):
    # slow horizontal pan so consecutive frames differ
    frames = np.stack([np.roll(astronaut, 2 * t, axis=1) for t in range(12)])
    return FrameSequence(frames[:, :63, :], fps=25)


def test_frame_sequence_validation():
    with pytest.raises(InvalidImage):
        FrameSequence(np.zeros((1, 32, 32, 3)))
    with pytest.raises(InvalidImage):
        FrameSequence(np.zeros((4, 32, 32)))
    seq = FrameSequence(np.zeros((3, 32, 32, 3), dtype=np.uint8))
    assert len(seq) == 3 and seq.shape == (32, 32)


def test_stutter_mask_first_frame_kept():
    m = stutter_mask(1000, 0.25, seed=3)
    assert not m[0]
    assert 0.2 < m[1:].mean() < 0.3
    np.testing.assert_array_equal(m, stutter_mask(1000, 0.25, seed=3))


def test_stutter_repeats_previous_output(clip):
    out = apply_stutter(clip, 3, seed=5)
    mask = stutter_mask(len(clip), 0.5, 5)
    for t in range(1, len(clip)):
        expected = out.frames[t - 1] if mask[t] else clip.frames[t]
        np.testing.assert_array_equal(out.frames[t], expected)


def test_translate_and_offsets():
    f = np.arange(5 * 5 * 3, dtype=float).reshape(5, 5, 3)
    moved = translate(f, 1, 0)
    np.testing.assert_array_equal(moved[1:], f[:-1])
    np.testing.assert_array_equal(translate(f, 0, 0), f)
    off = shake_offsets(500, 5, seed=1)
    assert off.min() >= -5 and off.max() <= 5


def test_camera_shake_deterministic(clip):
    a = apply_camera_shake(clip, 2, seed=4)
    b = apply_camera_shake(clip, 2, seed=4)
    np.testing.assert_array_equal(a.frames, b.frames)
    assert len(a) == len(clip)


def test_find_encoder(monkeypatch):
    monkeypatch.delenv("ENCODER_BIN", raising=False)
    with pytest.raises(CodecUnavailable):
        find_encoder()
    with pytest.raises(CodecUnavailable):
        find_encoder("/nonexistent/ffmpeg")
    monkeypatch.setenv("ENCODER_BIN", str(FAKE_ENCODER))
    assert find_encoder() == str(FAKE_ENCODER)


def test_encode_command_shape(tmp_path):
    cmd = encode_command("ffmpeg", "h265", 36, 64, 48, 25.0, tmp_path / "o.mp4")
    assert cmd[cmd.index("-c:v") + 1] == "libx265"
    assert cmd[cmd.index("-crf") + 1] == "36"
    assert cmd[cmd.index("-s") + 1] == "64x48"
    assert cmd[cmd.index("-pix_fmt", cmd.index("-i")) + 1] == "yuv420p"


def test_codec_path_with_fake_encoder(clip, tmp_path):
    values = []
    for sev in (1, 2, 3):
        out = encode_video_external(clip, "h264", sev, workdir=tmp_path, encoder=str(FAKE_ENCODER))
        assert out.frames.shape == clip.frames.shape  # odd width padded and cropped back
        values.append(psnr(clip.frames, out.frames))
    assert values[0] > values[1] > values[2]


def test_codec_failures(clip, tmp_path, monkeypatch):
    monkeypatch.setenv("FAKE_ENCODER_FAIL", "1")
    with pytest.raises(EncodeFailed) as err:
        encode_video_external(clip, "h264", 1, workdir=tmp_path, encoder=str(FAKE_ENCODER))
    assert "forced failure" in err.value.stderr
    monkeypatch.delenv("FAKE_ENCODER_FAIL")
    monkeypatch.setenv("FAKE_ENCODER_DROP", "1")
    with pytest.raises(EncodeFailed):
        encode_video_external(clip, "h265", 1, workdir=tmp_path, encoder=str(FAKE_ENCODER))
    with pytest.raises(InvalidSpec):
        encode_video_external(clip, "vp9", 1, encoder=str(FAKE_ENCODER))


def test_apply_video_distortion_dispatch(clip):
    out = apply_video_distortion(clip, DistortionSpec("stuttering", 1, 2))
    assert len(out) == len(clip)
    with pytest.raises(InvalidSpec):
        apply_video_distortion(clip, DistortionSpec("jpeg", 1))


def test_frames_roundtrip(clip, tmp_path):
    write_frames(clip, tmp_path / "f")
    back = read_frames(tmp_path / "f")
    assert np.abs(back.frames - clip.frames).max() <= 0.5 / 255 + 1e-12
