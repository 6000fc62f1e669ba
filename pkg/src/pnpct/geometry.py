"""Image and sinogram containers plus the parallel-beam acquisition geometry.

Physical conventions used throughout the toolkit:

* the image grid is centered on the physical origin, +x right, +y up;
  pixel (row 0, col 0) sits in the top-left corner, so row index increases
  downward while y increases upward;
* the detector coordinate ``s`` is the signed distance (mm) of a ray from
  the parallel ray through the origin; the detector array is centered on
  the grid center;
* view angles are in radians; auto-generated angle sets cover [0, pi).

All containers are immutable after construction (arrays are copied and
marked read-only), so they are safe to share across threads.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["ImageGrid", "Image", "ParallelGeometry", "Sinogram", "make_geometry"]


def _frozen_array(values, shape, what):
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size != shape[0] * shape[1]:
        raise ValidationError(
            f"{what}: expected {shape[0] * shape[1]} values, got {arr.size}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: values must be finite")
    arr = arr.reshape(shape).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageGrid:
    """Square-pixel image lattice centered on the physical origin.

    Parameters
    ----------
    width, height : int
        Pixel counts along x (columns) and y (rows).
    pixel_size : float
        Edge length of a pixel in mm.
    """

    width: int
    height: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("grid dimensions must be >= 1")
        if not (self.pixel_size > 0 and np.isfinite(self.pixel_size)):
            raise ValidationError("pixel_size must be positive and finite")

    @property
    def shape(self):
        """(height, width) row-major array shape."""
        return (self.height, self.width)

    @property
    def n_pixels(self):
        return self.width * self.height

    def x_centers(self):
        """Physical x coordinate (mm) of each pixel column center."""
        return (np.arange(self.width) - (self.width - 1) / 2.0) * self.pixel_size

    def y_centers(self):
        """Physical y coordinate (mm) of each pixel row center (row 0 on top)."""
        return ((self.height - 1) / 2.0 - np.arange(self.height)) * self.pixel_size


@dataclass(frozen=True, eq=False)
class Image:
    """2D attenuation map (mm^-1) living on an :class:`ImageGrid`.

    ``values`` is stored as a read-only float64 array of shape
    (height, width); any array-like of matching size is accepted.
    """

    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen_array(self.values, self.grid.shape, "Image")
        )

    def with_values(self, values):
        """Same grid, new values."""
        return Image(self.grid, values)

    @property
    def shape(self):
        return self.grid.shape


@dataclass(frozen=True, eq=False)
class ParallelGeometry:
    """Parallel-beam acquisition geometry binding a detector to a grid.

    ``angles`` is one view angle per sinogram row; ``n_bins`` detector bins
    of width ``bin_width`` mm are centered on the grid center.
    """

    n_views: int
    angles: np.ndarray
    n_bins: int
    bin_width: float
    grid: ImageGrid

    def __eq__(self, other):
        if not isinstance(other, ParallelGeometry):
            return NotImplemented
        return (
            self.n_views == other.n_views
            and self.n_bins == other.n_bins
            and self.bin_width == other.bin_width
            and self.grid == other.grid
            and np.array_equal(self.angles, other.angles)
        )

    def __post_init__(self):
        if self.n_views < 1 or self.n_bins < 1:
            raise ValidationError("n_views and n_bins must be >= 1")
        if not (self.bin_width > 0 and np.isfinite(self.bin_width)):
            raise ValidationError("bin_width must be positive and finite")
        angles = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        if angles.size != self.n_views:
            raise ValidationError("angles length must equal n_views")
        if not np.all(np.isfinite(angles)):
            raise ValidationError("angles must be finite")
        angles = angles.copy()
        angles.flags.writeable = False
        object.__setattr__(self, "angles", angles)

    @property
    def shape(self):
        """(n_views, n_bins) row-major sinogram shape."""
        return (self.n_views, self.n_bins)

    def bin_centers(self):
        """Signed detector coordinate s (mm) of each bin center."""
        return (np.arange(self.n_bins) - (self.n_bins - 1) / 2.0) * self.bin_width


@dataclass(frozen=True, eq=False)
class Sinogram:
    """View-major array of post-log line integrals (mm^-1 * mm, unitless)."""

    geometry: ParallelGeometry
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self,
            "values",
            _frozen_array(self.values, self.geometry.shape, "Sinogram"),
        )

    def with_values(self, values):
        return Sinogram(self.geometry, values)

    @property
    def shape(self):
        return self.geometry.shape


def make_geometry(n_views, n_bins, bin_width, grid):
    """Build a parallel-beam geometry with equispaced views over [0, pi).

    Angles are ``k * pi / n_views`` for ``k = 0 .. n_views-1``; the detector
    array is centered on the grid center.
    """
    if n_views < 1:
        raise ValidationError("n_views must be >= 1")
    angles = np.arange(int(n_views)) * (np.pi / int(n_views))
    return ParallelGeometry(
        n_views=int(n_views),
        angles=angles,
        n_bins=int(n_bins),
        bin_width=float(bin_width),
        grid=grid,
    )
