"""PSNR/SSIM oracles and PNG/PFM file round trips."""

import math

import numpy as np
import pytest
from PIL import Image

from splatcodec.errors import FormatError, ValidationError
from splatcodec.metrics import load_pfm, psnr, save_pfm, save_png, ssim


def test_psnr_identical_is_infinite(rng):
    img = rng.uniform(size=(16, 16, 3))
    assert psnr(img, img.copy()) == math.inf


def test_psnr_constant_offset_oracle():
    a = np.zeros((10, 10, 3))
    b = np.full((10, 10, 3), 0.1)
    assert abs(psnr(a, b) - 20.0) < 1e-12  # MSE 0.01 -> 20 dB
    c = np.full((10, 10, 3), 0.5)
    assert abs(psnr(a, c) - 10.0 * math.log10(4.0)) < 1e-12


def test_psnr_shape_mismatch():
    with pytest.raises(ValidationError, match="shapes"):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ssim_identical_is_one(rng):
    img = rng.uniform(size=(32, 32, 3))
    assert abs(ssim(img, img.copy()) - 1.0) < 1e-12


def test_ssim_decreases_with_noise(rng):
    base = rng.uniform(0.2, 0.8, size=(48, 48, 3))
    small = np.clip(base + rng.normal(scale=0.01, size=base.shape), 0, 1)
    big = np.clip(base + rng.normal(scale=0.2, size=base.shape), 0, 1)
    s_small, s_big = ssim(base, small), ssim(base, big)
    assert 1.0 > s_small > s_big
    assert s_big < 0.9


def test_ssim_handles_small_and_gray_images(rng):
    img = rng.uniform(size=(7, 9))
    assert abs(ssim(img, img) - 1.0) < 1e-12
    assert ssim(np.zeros((1, 1)), np.ones((1, 1))) < 1.0
    with pytest.raises(ValidationError):
        ssim(np.zeros((4, 4, 3, 1)), np.zeros((4, 4, 3, 1)))


def test_png_round_trip(tmp_path, rng):
    img = rng.uniform(size=(12, 20, 3))
    path = tmp_path / "img.png"
    save_png(img, path)
    back = np.asarray(Image.open(path), dtype=np.float64) / 255.0
    assert back.shape == (12, 20, 3)
    assert np.abs(back - img).max() <= 0.5 / 255.0 + 1e-12


def test_png_accepts_grayscale_and_clamps(tmp_path):
    img = np.array([[-0.5, 0.5], [1.5, 1.0]])
    path = tmp_path / "gray.png"
    save_png(img, path)
    back = np.asarray(Image.open(path))
    assert back.shape == (2, 2, 3)
    assert back[0, 0, 0] == 0 and back[1, 0, 0] == 255


def test_pfm_round_trip_color(tmp_path, rng):
    img = rng.normal(size=(9, 14, 3)).astype(np.float32)
    path = tmp_path / "img.pfm"
    save_pfm(img, path)
    assert np.array_equal(load_pfm(path), img)


def test_pfm_round_trip_gray(tmp_path, rng):
    img = rng.normal(size=(6, 8)).astype(np.float32)
    path = tmp_path / "gray.pfm"
    save_pfm(img, path)
    assert np.array_equal(load_pfm(path), img)


def test_pfm_errors(tmp_path):
    bad = tmp_path / "bad.pfm"
    bad.write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 12)
    with pytest.raises(FormatError, match="not a PFM"):
        load_pfm(bad)

    big_endian = tmp_path / "be.pfm"
    big_endian.write_bytes(b"Pf\n2 2\n1.0\n" + b"\x00" * 16)
    with pytest.raises(FormatError, match="big-endian"):
        load_pfm(big_endian)

    short = tmp_path / "short.pfm"
    short.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\x00" * 8)
    with pytest.raises(FormatError, match="truncated"):
        load_pfm(short)

    with pytest.raises(ValidationError, match="channels"):
        save_pfm(np.zeros((4, 4, 2)), tmp_path / "two.pfm")
