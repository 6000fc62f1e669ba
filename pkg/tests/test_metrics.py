import math

import numpy as np
import pytest

from pnpct.errors import ValidationError
from pnpct.geometry import Image, ImageGrid
from pnpct.metrics import (
    average_nps,
    box4_lowpass,
    mse,
    nps_compute,
    nps_distance,
    psnr,
    write_nps_csv,
)


def image(values, pixel_size=1.0):
    arr = np.asarray(values, dtype=np.float64)
    return Image(ImageGrid(arr.shape[1], arr.shape[0], pixel_size), arr)


def test_mse_identical_is_zero():
    a = image(np.random.default_rng(0).random((8, 8)))
    assert mse(a, a) == 0.0


def test_mse_uniform_offset():
    a = image(np.zeros((16, 16)))
    b = image(np.full((16, 16), 0.1))
    assert mse(a, b) == pytest.approx(0.01, rel=1e-12)


def test_mse_matches_fsum_oracle():
    rng = np.random.default_rng(13)
    av, bv = rng.random((32, 32)), rng.random((32, 32))
    expected = math.fsum(
        (x - y) ** 2 for x, y in zip(av.ravel().tolist(), bv.ravel().tolist())
    ) / av.size
    assert mse(image(av), image(bv)) == pytest.approx(expected, rel=1e-12)


def test_mse_shape_mismatch():
    with pytest.raises(ValidationError):
        mse(image(np.zeros((4, 4))), image(np.zeros((4, 5))))


def test_psnr_twenty_db_case():
    a = image(np.zeros((8, 8)))
    b = image(np.full((8, 8), 0.1))
    assert psnr(a, b, data_range=1.0) == pytest.approx(20.0, abs=1e-9)


def test_psnr_identical_sentinel():
    a = image(np.random.default_rng(0).random((8, 8)))
    assert psnr(a, a, data_range=1.0) == math.inf


def test_psnr_from_mse_oracle():
    rng = np.random.default_rng(21)
    a, b = image(rng.random((16, 16))), image(rng.random((16, 16)))
    expected = 10.0 * math.log10(2.5**2 / mse(a, b))
    assert psnr(a, b, data_range=2.5) == pytest.approx(expected, abs=1e-9)


def test_psnr_strictly_decreases_with_error():
    base = image(np.zeros((16, 16)))
    values = [
        psnr(base, image(np.full((16, 16), eps)), data_range=1.0)
        for eps in (0.01, 0.02, 0.05, 0.1, 0.4)
    ]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_psnr_bad_range():
    a = image(np.zeros((4, 4)))
    with pytest.raises(ValidationError):
        psnr(a, a, data_range=0.0)


# --- NPS ----------------------------------------------------------------


def test_constant_image_has_zero_spectrum():
    res = nps_compute(image(np.full((32, 32), 7.0)))
    np.testing.assert_allclose(res.power, 0.0, atol=1e-20)
    assert res.hf_total == pytest.approx(0.0, abs=1e-18)


def test_parseval_identity_on_white_noise():
    rng = np.random.default_rng(6)
    img = image(rng.standard_normal((256, 256)))
    res = nps_compute(img)
    high = img.values - box4_lowpass(img.values)
    high = high - high.mean()
    spatial = float(np.sum(high * high))
    assert abs(res.hf_total - spatial) <= 1e-9 * spatial


def test_hf_total_equals_spectrum_sum():
    rng = np.random.default_rng(8)
    img = image(rng.standard_normal((64, 64)))
    res = nps_compute(img)
    # bin means times bin counts re-sum to the full spectrum
    fx = np.fft.fftfreq(64, 1.0)
    radial = np.sqrt(fx[np.newaxis, :] ** 2 + fx[:, np.newaxis] ** 2)
    idx = np.floor(radial / (1.0 / 64)).astype(int).ravel()
    counts = np.bincount(idx, minlength=len(res.power))
    total = float(np.sum(res.power * counts))
    assert abs(total - res.hf_total) <= 1e-6 * res.hf_total


def test_checkerboard_concentrates_in_top_bin():
    ii, jj = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
    img = image((-1.0) ** (ii + jj))
    res = nps_compute(img)
    assert res.power[-1] >= 0.99 * res.power.sum()


def test_radial_bins_strictly_increasing_and_power_nonnegative():
    rng = np.random.default_rng(3)
    res = nps_compute(image(rng.standard_normal((40, 56)), pixel_size=0.7))
    assert np.all(np.diff(res.radial_bins) > 0)
    assert np.all(res.power >= 0.0)


def test_lowpass_highpass_complementarity():
    rng = np.random.default_rng(5)
    values = rng.standard_normal((32, 32))
    low = box4_lowpass(values)
    high = values - low
    # the split loses no information: re-adding the residual recovers the
    # input exactly up to the final float addition (<= 1 ulp per pixel)
    recon = low + high
    ulp = np.spacing(np.maximum(np.abs(values), np.abs(low)))
    assert np.all(np.abs(recon - values) <= ulp)
    assert np.max(np.abs(recon - values)) <= 1e-15


def test_box4_anchor_convention():
    # output pixel (i, j) averages rows i-1..i+2, cols j-1..j+2
    values = np.zeros((12, 12))
    values[6, 6] = 16.0
    low = box4_lowpass(values)
    expected = np.zeros((12, 12))
    expected[5:9, 5:9] = 1.0
    np.testing.assert_allclose(low, expected, atol=1e-12)


def test_too_small_image_rejected():
    with pytest.raises(ValidationError):
        nps_compute(image(np.zeros((7, 32))))


def test_nps_distance_zero_and_symmetric():
    rng = np.random.default_rng(10)
    a = image(rng.standard_normal((64, 64)))
    b = image(rng.standard_normal((64, 64)))
    assert nps_distance(a, a) == 0.0
    assert nps_distance(a, b) == pytest.approx(nps_distance(b, a), rel=0)
    with pytest.raises(ValidationError):
        nps_distance(a, image(np.zeros((32, 32))))


def test_white_noise_profiles_translation_tolerant():
    # patient-style NPS: average the per-image profiles, compare bins
    # carrying enough spectral samples for stable statistics
    grid = ImageGrid(256, 256, 1.0)

    def averaged(seed, n=40):
        rng = np.random.default_rng(seed)
        return average_nps(
            nps_compute(Image(grid, rng.standard_normal((256, 256))))
            for _ in range(n)
        )

    p1, p2 = averaged(1), averaged(2)
    fx = np.fft.fftfreq(256, 1.0)
    radial = np.sqrt(fx[np.newaxis, :] ** 2 + fx[:, np.newaxis] ** 2)
    counts = np.bincount(np.floor(radial / (1.0 / 256)).astype(int).ravel())
    stable = counts >= 128
    stable[0] = False
    rel = np.abs(p1.power[stable] - p2.power[stable]) / (
        (p1.power[stable] + p2.power[stable]) / 2
    )
    assert rel.max() < 0.10


def test_average_nps_requires_matching_profiles():
    a = nps_compute(image(np.random.default_rng(0).random((32, 32))))
    b = nps_compute(image(np.random.default_rng(0).random((64, 64))))
    with pytest.raises(ValidationError):
        average_nps([a, b])
    with pytest.raises(ValidationError):
        average_nps([])


def test_csv_emission_format(tmp_path):
    rng = np.random.default_rng(2)
    res = nps_compute(image(rng.standard_normal((16, 16))))
    path = tmp_path / "profile.csv"
    write_nps_csv(res, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "freq_cycles_per_mm,power"
    assert len(lines) == 1 + len(res.radial_bins)
    freq, power = lines[1].split(",")
    assert float(freq) == pytest.approx(res.radial_bins[0], rel=1e-8)
    assert float(power) == pytest.approx(res.power[0], rel=1e-8)
    # 9 significant digits
    assert len(freq.replace(".", "").replace("-", "").lstrip("0")) <= 9
