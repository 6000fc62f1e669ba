import numpy as np
import pytest

from pnpct.dose import NoiseModel, simulate_low_dose, simulate_low_dose_with_stats
from pnpct.errors import ValidationError
from pnpct.fbp import fbp_reconstruct
from pnpct.geometry import ImageGrid, Sinogram, make_geometry
from pnpct.phantom import shepp_logan
from pnpct.projector import forward_project


def single_bin_geometry():
    return make_geometry(1, 1, 1.0, ImageGrid(1, 1, 1.0))


def test_near_infinite_dose_reproduces_input():
    grid = ImageGrid(64, 64, 1.0)
    geom = make_geometry(30, 91, 1.0, grid)
    clean = forward_project(shepp_logan(grid, 0.1, modified=True), geom)
    noisy = simulate_low_dose(clean, NoiseModel(i0_full=1e12, dose_fraction=1.0, seed=1))
    # delta method: post-log std is about sqrt(exp(l) / I0)
    assert np.abs(noisy.values - clean.values).max() < 1e-3


def test_same_seed_is_bitwise_identical():
    grid = ImageGrid(32, 32, 1.0)
    geom = make_geometry(12, 45, 1.0, grid)
    clean = forward_project(shepp_logan(grid, 0.1, modified=True), geom)
    model = NoiseModel(i0_full=1e4, dose_fraction=0.1, seed=12345)
    a = simulate_low_dose(clean, model)
    b = simulate_low_dose(clean, model)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_low_dose(clean, NoiseModel(i0_full=1e4, dose_fraction=0.1, seed=999))
    assert not np.array_equal(a.values, c.values)


def test_photon_starved_bin_clamps_to_count_floor():
    clean = Sinogram(single_bin_geometry(), np.array([[50.0]]))
    noisy, stats = simulate_low_dose_with_stats(
        clean, NoiseModel(i0_full=1e4, dose_fraction=0.1, seed=3)
    )
    # lambda = 1e3 * exp(-50) ~ 0: counts clamp to 1, integral = ln(1000)
    assert noisy.values[0, 0] == pytest.approx(np.log(1000.0), abs=1e-12)
    assert stats.starved_bins == 1


def test_negative_inputs_clamped_and_counted():
    geom = make_geometry(1, 3, 1.0, ImageGrid(1, 1, 1.0))
    clean = Sinogram(geom, np.array([[-0.5, 0.0, 1.0]]))
    noisy, stats = simulate_low_dose_with_stats(
        clean, NoiseModel(i0_full=1e9, dose_fraction=1.0, seed=0)
    )
    assert stats.negative_inputs_clamped == 1
    assert noisy.values[0, 0] == pytest.approx(0.0, abs=1e-3)


def test_variance_scales_inversely_with_dose():
    clean = Sinogram(single_bin_geometry(), np.array([[2.0]]))
    low, full = [], []
    for seed in range(2000):
        low.append(simulate_low_dose(
            clean, NoiseModel(i0_full=1e5, dose_fraction=0.1, seed=seed)).values[0, 0])
        full.append(simulate_low_dose(
            clean, NoiseModel(i0_full=1e5, dose_fraction=1.0, seed=seed)).values[0, 0])
    ratio = np.var(low) / np.var(full)
    assert ratio == pytest.approx(10.0, rel=0.15)


@pytest.mark.parametrize("lam", [25.0, 200.0, 2000.0])
def test_post_log_mean_unbiased_to_first_order(lam):
    l = 2.0
    geom = make_geometry(1, 400, 1.0, ImageGrid(1, 1, 1.0))
    clean = Sinogram(geom, np.full((1, 400), l))
    model = NoiseModel(i0_full=lam * np.exp(l) / 0.1, dose_fraction=0.1, seed=99)
    out = simulate_low_dose(clean, model).values.ravel()
    se = out.std(ddof=1) / np.sqrt(out.size)
    assert abs(out.mean() - l) < 3.0 * se


def test_low_dose_fbp_degrades_more_than_full_dose():
    grid = ImageGrid(128, 128, 1.0)
    geom = make_geometry(90, 183, 1.0, grid)
    phantom = shepp_logan(grid, 0.1, modified=True)
    clean = forward_project(phantom, geom)
    low = simulate_low_dose(clean, NoiseModel(i0_full=1e5, dose_fraction=0.1, seed=4))
    full = simulate_low_dose(clean, NoiseModel(i0_full=1e5, dose_fraction=1.0, seed=5))
    mse_low = np.mean((fbp_reconstruct(low).values - phantom.values) ** 2)
    mse_full = np.mean((fbp_reconstruct(full).values - phantom.values) ** 2)
    assert mse_low > mse_full


@pytest.mark.parametrize("kwargs", [
    dict(i0_full=0.0, dose_fraction=0.5),
    dict(i0_full=-1.0, dose_fraction=0.5),
    dict(i0_full=1e5, dose_fraction=0.0),
    dict(i0_full=1e5, dose_fraction=1.5),
    dict(i0_full=1e5, dose_fraction=0.5, count_floor=0.0),
])
def test_bad_noise_model_rejected(kwargs):
    with pytest.raises(ValidationError):
        NoiseModel(**kwargs)
