import numpy as np
import pytest

from pnpct.errors import ValidationError
from pnpct.fbp import fbp_reconstruct
from pnpct.geometry import ImageGrid, Sinogram, make_geometry
from pnpct.phantom import disk_phantom, disk_sinogram


def test_zero_sinogram_gives_zero_image():
    geom = make_geometry(16, 33, 1.0, ImageGrid(32, 32, 1.0))
    img = fbp_reconstruct(Sinogram(geom, np.zeros(geom.shape)))
    np.testing.assert_array_equal(img.values, 0.0)


def test_disk_center_value_within_two_percent():
    grid = ImageGrid(256, 256, 1.0)
    geom = make_geometry(512, 363, 1.0, grid)
    sino = disk_sinogram(geom, radius_mm=40.0, value=0.02)
    rec = fbp_reconstruct(sino, "ram-lak")
    assert rec.values[128, 128] == pytest.approx(0.02, rel=0.02)


def test_linearity():
    grid = ImageGrid(64, 64, 1.0)
    geom = make_geometry(32, 91, 1.0, grid)
    rng = np.random.default_rng(0)
    sino = Sinogram(geom, rng.standard_normal(geom.shape))
    double = Sinogram(geom, 2.0 * sino.values)
    np.testing.assert_allclose(
        fbp_reconstruct(double).values,
        2.0 * fbp_reconstruct(sino).values,
        rtol=0,
        atol=1e-12,
    )


def test_rmse_improves_with_views():
    grid = ImageGrid(128, 128, 1.0)
    disk = disk_phantom(grid, radius_mm=20.0, value=0.02)
    rmses = []
    for views in (45, 90, 180, 360):
        geom = make_geometry(views, 183, 1.0, grid)
        rec = fbp_reconstruct(disk_sinogram(geom, 20.0, 0.02), "ram-lak")
        rmses.append(np.sqrt(np.mean((rec.values - disk.values) ** 2)))
    assert all(b < a for a, b in zip(rmses, rmses[1:]))


def test_dc_fidelity_interior_mean():
    grid = ImageGrid(256, 256, 1.0)
    geom = make_geometry(720, 363, 1.0, grid)
    rec = fbp_reconstruct(disk_sinogram(geom, 40.0, 0.02), "ram-lak")
    xx, yy = np.meshgrid(grid.x_centers(), grid.y_centers())
    interior = xx**2 + yy**2 <= (0.8 * 40.0) ** 2
    assert rec.values[interior].mean() == pytest.approx(0.02, rel=0.02)


@pytest.mark.parametrize("name", ["ram-lak", "shepp-logan-filter", "hann"])
def test_all_filters_reconstruct_disk(name):
    grid = ImageGrid(64, 64, 1.0)
    geom = make_geometry(90, 91, 1.0, grid)
    rec = fbp_reconstruct(disk_sinogram(geom, 12.0, 0.02), name)
    assert rec.values[32, 32] == pytest.approx(0.02, rel=0.1)


def test_unknown_filter_rejected():
    geom = make_geometry(4, 9, 1.0, ImageGrid(8, 8, 1.0))
    sino = Sinogram(geom, np.zeros(geom.shape))
    with pytest.raises(ValidationError):
        fbp_reconstruct(sino, "ramp-o-matic")


def test_single_view_rejected():
    geom = make_geometry(1, 9, 1.0, ImageGrid(8, 8, 1.0))
    sino = Sinogram(geom, np.zeros(geom.shape))
    with pytest.raises(ValidationError):
        fbp_reconstruct(sino)
