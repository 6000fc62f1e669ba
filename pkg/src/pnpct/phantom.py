"""Synthetic test objects: the 10-ellipse Shepp-Logan head and a uniform disk.

A pixel's value is the sum of the intensities of every ellipse whose
interior contains the pixel center, times a caller-supplied attenuation
scale (mm^-1). No anti-aliasing is applied, so output is deterministic.
"""

import numpy as np

from .errors import ValidationError
from .geometry import Image, ImageGrid, ParallelGeometry, Sinogram

__all__ = ["shepp_logan", "disk_phantom", "disk_sinogram", "SHEPP_LOGAN_ELLIPSES"]

# (x0, y0, a, b, phi_deg, intensity) in units of the half field of view,
# +y up. Standard head: low-contrast interior features. The modified
# variant keeps the geometry and raises the feature contrast.
SHEPP_LOGAN_ELLIPSES = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.8740, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
]

_MODIFIED_INTENSITIES = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]


def _ellipse_table(modified):
    if not modified:
        return SHEPP_LOGAN_ELLIPSES
    return [
        (x0, y0, a, b, phi, inten)
        for (x0, y0, a, b, phi, _), inten in zip(
            SHEPP_LOGAN_ELLIPSES, _MODIFIED_INTENSITIES
        )
    ]


def shepp_logan(grid: ImageGrid, scale: float, modified: bool = False) -> Image:
    """Render the Shepp-Logan phantom onto ``grid``.

    Parameters
    ----------
    grid : ImageGrid
        Target lattice; the phantom's unit circle maps to the inscribed
        circle of the grid (half of ``min(width, height) * pixel_size``).
    scale : float
        Attenuation (mm^-1) corresponding to a summed ellipse intensity
        of 1.0.
    modified : bool
        Use the high-contrast intensity variant instead of the standard
        low-contrast one.
    """
    if not (scale > 0 and np.isfinite(scale)):
        raise ValidationError("scale must be positive and finite")
    half_fov = 0.5 * min(grid.width, grid.height) * grid.pixel_size
    x = grid.x_centers() / half_fov
    y = grid.y_centers() / half_fov
    xx, yy = np.meshgrid(x, y)

    values = np.zeros(grid.shape)
    for x0, y0, a, b, phi_deg, inten in _ellipse_table(modified):
        phi = np.deg2rad(phi_deg)
        dx = xx - x0
        dy = yy - y0
        major = (dx * np.cos(phi) + dy * np.sin(phi)) / a
        minor = (-dx * np.sin(phi) + dy * np.cos(phi)) / b
        values[major * major + minor * minor <= 1.0] += inten
    return Image(grid, values * scale)


def disk_phantom(grid: ImageGrid, radius_mm: float, value: float) -> Image:
    """Uniform centered disk of the given radius (mm) and attenuation."""
    if not (radius_mm > 0 and np.isfinite(radius_mm)):
        raise ValidationError("radius_mm must be positive and finite")
    xx, yy = np.meshgrid(grid.x_centers(), grid.y_centers())
    values = np.where(xx * xx + yy * yy <= radius_mm * radius_mm, float(value), 0.0)
    return Image(grid, values)


def disk_sinogram(geom: ParallelGeometry, radius_mm: float, value: float) -> Sinogram:
    """Exact line integrals of a centered uniform disk: 2 v sqrt(r^2 - s^2).

    Identical for every view, which makes this the analytic oracle for
    filtered back-projection checks.
    """
    s = geom.bin_centers()
    row = 2.0 * value * np.sqrt(np.maximum(radius_mm * radius_mm - s * s, 0.0))
    return Sinogram(geom, np.tile(row, (geom.n_views, 1)))
