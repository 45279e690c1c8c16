import io

import numpy as np
import pytest
from PIL import Image

from vqualkit.color import rgb_to_ycbcr, ycbcr_to_rgb
from vqualkit.distortions import (
    CATEGORIES,
    DISPLAY_NAMES,
    PSNR_MONOTONE,
    SPATIAL_CATEGORIES,
    STOCHASTIC,
    VIDEO_CATEGORIES,
    DistortionSpec,
    apply_spatial_distortion,
    check_image,
    derive_seed,
    disk_kernel,
    line_kernel,
    load_ladder,
    psnr,
)
from vqualkit.errors import InvalidImage, InvalidSpec
from vqualkit.jpeg import LUMA_TABLE, jpeg_roundtrip, scaled_table


def test_category_counts():
    assert len(SPATIAL_CATEGORIES) == 25
    assert len(VIDEO_CATEGORIES) == 4
    assert set(DISPLAY_NAMES) == set(CATEGORIES)


def test_spec_validation_and_label():
    assert DistortionSpec("gaussian_blur", 1).label == "mild–gaussian blur"
    assert DistortionSpec("impulse_noise", 5).label == "very severe–impulse noise"
    assert DistortionSpec("stuttering", 3).label == "severe–stuttering"
    with pytest.raises(InvalidSpec):
        DistortionSpec("stuttering", 4)
    with pytest.raises(InvalidSpec):
        DistortionSpec("gaussian_blur", 0)
    with pytest.raises(InvalidSpec):
        DistortionSpec("fog", 1)
    with pytest.raises(InvalidSpec):
        DistortionSpec("jpeg", 1, seed=-1)


def test_derive_seed_stable():
    a = derive_seed(7, "img01", "jpeg")
    assert a == derive_seed(7, "img01", "jpeg")
    assert a != derive_seed(7, "img02", "jpeg")
    assert a != derive_seed(8, "img01", "jpeg")
    assert 0 <= a < 2**64


def test_ladder_defaults_and_overrides(tmp_path):
    ladder = load_ladder()
    assert [lv["sigma"] for lv in ladder["gaussian_blur"]["levels"]] == [1, 2, 3, 5, 8]
    assert [lv["p"] for lv in ladder["impulse_noise"]["levels"]] == [0.01, 0.03, 0.07, 0.12, 0.2]
    assert [lv["quality"] for lv in ladder["jpeg"]["levels"]] == [45, 30, 20, 12, 7]
    assert [lv["q"] for lv in ladder["stuttering"]["levels"]] == [0.1, 0.25, 0.5]
    assert [lv["amplitude"] for lv in ladder["camera_shake"]["levels"]] == [2, 5, 10]
    assert [lv["crf"] for lv in ladder["h264"]["levels"]] == [24, 36, 48]

    custom = load_ladder(overrides={"gaussian_blur": {"levels": [{"sigma": s} for s in (0.5, 1, 2, 4, 6)]}})
    assert custom["gaussian_blur"]["levels"][0]["sigma"] == 0.5
    with pytest.raises(InvalidSpec):
        load_ladder(overrides={"gaussian_blur": {"levels": [{"sigma": s} for s in (1, 1, 2, 4, 6)]}})
    with pytest.raises(InvalidSpec):
        load_ladder(overrides={"jpeg": {"levels": [{"quality": 40}]}})


def test_check_image():
    out = check_image(np.zeros((16, 16, 3), dtype=np.uint8))
    assert out.dtype == float
    with pytest.raises(InvalidImage):
        check_image(np.zeros((8, 8, 3)))
    with pytest.raises(InvalidImage):
        check_image(np.zeros((16, 16)))
    with pytest.raises(InvalidImage):
        check_image(np.full((16, 16, 3), 1.5))


def test_kernels_normalized():
    assert disk_kernel(3).sum() == pytest.approx(1.0)
    assert line_kernel(9, 0.3).sum() == pytest.approx(1.0)


def test_ycbcr_roundtrip():
    rng = np.random.default_rng(0)
    img = rng.random((8, 8, 3))
    np.testing.assert_allclose(ycbcr_to_rgb(rgb_to_ycbcr(img)), img, atol=1e-12)
    gray = np.full((2, 2, 3), 0.3)
    np.testing.assert_allclose(rgb_to_ycbcr(gray)[..., 1:], 0.5, atol=1e-12)


def test_jpeg_tables_and_pillow_agreement(fixture_images):
    np.testing.assert_array_equal(scaled_table(LUMA_TABLE, 50), LUMA_TABLE)
    assert scaled_table(LUMA_TABLE, 100).max() == 1
    img = fixture_images["coffee"]
    for q in (45, 7):
        buf = io.BytesIO()
        Image.fromarray(np.round(img * 255).astype(np.uint8)).save(buf, "JPEG", quality=q, subsampling=2)
        ref = np.asarray(Image.open(buf), dtype=float) / 255
        assert abs(psnr(img, jpeg_roundtrip(img, q)) - psnr(img, ref)) < 2.0


@pytest.mark.parametrize("category", SPATIAL_CATEGORIES)
def test_every_category_runs_and_is_deterministic(category, astronaut):
    for sev in (1, 5):
        spec = DistortionSpec(category, sev, seed=123)
        a = apply_spatial_distortion(astronaut, spec)
        b = apply_spatial_distortion(astronaut, spec)
        assert a.shape == astronaut.shape
        assert a.min() >= 0 and a.max() <= 1
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, astronaut)


@pytest.mark.parametrize("category", sorted(set(STOCHASTIC) & set(SPATIAL_CATEGORIES)))
def test_stochastic_categories_depend_on_seed(category, astronaut):
    a = apply_spatial_distortion(astronaut, DistortionSpec(category, 3, seed=1))
    b = apply_spatial_distortion(astronaut, DistortionSpec(category, 3, seed=2))
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("category", PSNR_MONOTONE)
def test_psnr_monotone_on_astronaut(category, astronaut):
    vals = [psnr(astronaut, apply_spatial_distortion(astronaut, DistortionSpec(category, s, 9)))
            for s in range(1, 6)]
    assert all(a > b for a, b in zip(vals, vals[1:])), vals


def test_spatial_rejects_video_category(astronaut):
    with pytest.raises(InvalidSpec):
        apply_spatial_distortion(astronaut, DistortionSpec("stuttering", 1))


def test_psnr_identical_is_inf(astronaut):
    assert psnr(astronaut, astronaut) == float("inf")
