import json

import numpy as np
import pytest

from specdeblur import NoiseSpec, add_noise, mse, psnr, quality_report, similarity_loss, ssim


def test_psnr_identical_is_inf():
    X = np.random.default_rng(0).random((10, 10))
    assert psnr(X, X) == np.inf


def test_psnr_uniform_difference_closed_form():
    ref = np.random.default_rng(1).random((12, 12))
    for d in (0.1, 0.01):
        assert psnr(ref + d, ref) == pytest.approx(-20 * np.log10(d), abs=1e-10)


def test_psnr_matches_direct_mse_oracle():
    rng = np.random.default_rng(2)
    x, ref = rng.random((9, 7)), rng.random((9, 7))
    acc = 0.0
    for i in range(9):
        for j in range(7):
            acc += (x[i, j] - ref[i, j]) ** 2
    direct = 10 * np.log10(1.0 / (acc / 63))
    assert psnr(x, ref) == pytest.approx(direct, abs=1e-10)


def test_psnr_symmetric():
    rng = np.random.default_rng(3)
    x, ref = rng.random((8, 8)), rng.random((8, 8))
    assert psnr(x, ref) == psnr(ref, x)


def test_psnr_validation():
    with pytest.raises(ValueError):
        psnr(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        psnr(np.zeros((2, 2)), np.zeros((2, 2)), peak=0.0)


def test_psnr_decreases_with_noise():
    ref = np.random.default_rng(4).random((24, 24))
    values = []
    for eta in (0.01, 0.03, 0.1, 0.3):
        trials = [
            psnr(add_noise(ref, NoiseSpec(std=eta, seed=s))[0], ref) for s in range(5)
        ]
        values.append(np.mean(trials))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_ssim_identical_is_one():
    X = np.random.default_rng(5).random((16, 16))
    assert ssim(X, X) == pytest.approx(1.0, abs=1e-12)


def test_ssim_heavy_noise_on_constant():
    rng = np.random.default_rng(6)
    ref = np.full((32, 32), 0.5)
    vals = [ssim(ref + rng.normal(0, 0.5, (32, 32)), ref) for _ in range(5)]
    assert np.mean(vals) < 0.2


def test_ssim_brightness_shift_below_one():
    ref = np.random.default_rng(7).random((16, 16))
    assert ssim(ref + 0.1, ref) < 1.0


def test_ssim_window_validation():
    with pytest.raises(ValueError):
        ssim(np.zeros((4, 4)), np.zeros((4, 4)), window=8)


def test_similarity_loss_zero_for_identical():
    X = np.random.default_rng(8).random((12, 12))
    assert similarity_loss(X, X) == pytest.approx(0.0, abs=1e-12)


def test_similarity_loss_lambda_one_is_mad():
    rng = np.random.default_rng(9)
    x, ref = rng.random((10, 10)), rng.random((10, 10))
    assert similarity_loss(x, ref, lam=1.0) == pytest.approx(np.mean(np.abs(x - ref)), abs=1e-12)


def test_similarity_loss_weighted_sum_hand_computed():
    rng = np.random.default_rng(10)
    x, ref = rng.random((16, 16)), rng.random((16, 16))
    lam = 0.2
    expected = lam * np.mean(np.abs(x - ref)) + (1 - lam) * (1 - ssim(x, ref))
    assert similarity_loss(x, ref, lam=lam) == pytest.approx(expected, abs=1e-10)


def test_similarity_loss_validation():
    with pytest.raises(ValueError):
        similarity_loss(np.zeros((9, 9)), np.zeros((9, 9)), lam=1.5)


def test_quality_report_keys_and_json(tmp_path):
    rng = np.random.default_rng(11)
    x, ref = rng.random((16, 16)), rng.random((16, 16))
    report = quality_report(x, ref)
    payload = json.loads(report.to_json())
    assert set(payload) == {"mse", "psnr_db", "ssim", "similarity_loss", "per_channel"}
    assert len(payload["per_channel"]) == 1
    path = tmp_path / "q.json"
    report.to_json(path)
    assert json.loads(path.read_text()) == payload


def test_quality_report_three_channels():
    rng = np.random.default_rng(12)
    x, ref = rng.random((16, 16, 3)), rng.random((16, 16, 3))
    report = quality_report(x, ref)
    assert len(report.per_channel) == 3
    assert report.mse == pytest.approx(np.mean([c["mse"] for c in report.per_channel]))


def test_quality_report_identical_images_json_encodes_inf():
    X = np.random.default_rng(13).random((9, 9))
    payload = json.loads(quality_report(X, X).to_json())
    assert payload["psnr_db"] == "inf"
    assert payload["ssim"] == 1.0


def test_mse_basic():
    assert mse(np.ones((3, 3)), np.zeros((3, 3))) == 1.0
