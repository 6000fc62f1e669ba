"""Joseph-method system matrix: forward projection and its exact transpose.

Rays are traced by stepping along the major axis (the image axis most
aligned with the ray) and linearly interpolating between the two pixels
straddling each crossing. The backprojector scatters with the *same*
weights, so ``back_project`` is the literal matrix transpose of
``forward_project``; conjugate gradient on the normal equations relies on
this pairing.

Parallelism is organized so results are bitwise independent of the thread
count: the forward pass parallelizes over views (each view owns its
sinogram row), the backward pass over image rows for row-stepping views
and over image columns for column-stepping views (each thread owns the
pixels it writes, and the accumulation order within a pixel is fixed).
"""

import numpy as np
from numba import njit, prange

from .errors import SizeError, ValidationError
from .geometry import Image, ParallelGeometry, Sinogram

__all__ = [
    "forward_project",
    "back_project",
    "project_values",
    "backproject_values",
    "system_matrix_dense",
    "DENSE_ENTRY_CAP",
]

DENSE_ENTRY_CAP = 2**24


def _ray_tables(geom: ParallelGeometry):
    """Per-view trig and per-bin detector coordinates in pixel units."""
    angles = np.asarray(geom.angles)
    cos = np.cos(angles)
    sin = np.sin(angles)
    s = geom.bin_centers()
    return cos, sin, s


@njit(cache=True, parallel=True)
def _joseph_forward(img, cos, sin, s, px, out):
    n_views = cos.shape[0]
    n_bins = s.shape[0]
    height, width = img.shape
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    for vi in prange(n_views):
        c = cos[vi]
        sn = sin[vi]
        if abs(c) >= abs(sn):
            # step along image rows; interpolate between columns
            step = px / abs(c)
            tan = sn / c
            for b in range(n_bins):
                su = s[b] / (c * px) + cx
                acc = 0.0
                for r in range(height):
                    u = su + (r - cy) * tan
                    c0 = int(np.floor(u))
                    w = u - c0
                    if 0 <= c0 < width:
                        acc += (1.0 - w) * img[r, c0]
                    if 0 <= c0 + 1 < width:
                        acc += w * img[r, c0 + 1]
                out[vi, b] = acc * step
        else:
            # step along image columns; interpolate between rows
            step = px / abs(sn)
            cot = c / sn
            for b in range(n_bins):
                sv = cy - s[b] / (sn * px) + cx * cot
                acc = 0.0
                for col in range(width):
                    v = sv - col * cot
                    r0 = int(np.floor(v))
                    w = v - r0
                    if 0 <= r0 < height:
                        acc += (1.0 - w) * img[r0, col]
                    if 0 <= r0 + 1 < height:
                        acc += w * img[r0 + 1, col]
                out[vi, b] = acc * step


# The backward kernels take precomputed per-view tables and keep their
# prange bodies free of conditionally assigned locals: numba's parallel
# variable privatization miscompiles the obvious branchy formulation.


@njit(cache=True, parallel=True)
def _joseph_back_rows(sino, base, slope, step, out):
    """Transpose scatter for row-stepping (|cos| >= |sin|) views.

    Every contribution of such a view lands in the image row it samples,
    so parallelizing over image rows is race-free and the accumulation
    order per pixel is fixed (bitwise thread-count independent).
    ``base[vi, b] + slope[vi] * (r - cy)`` is the fractional column hit by
    ray (vi, b) in row r.
    """
    n_views, n_bins = sino.shape
    height, width = out.shape
    cy = (height - 1) / 2.0
    for r in prange(height):
        for vi in range(n_views):
            for b in range(n_bins):
                u = base[vi, b] + slope[vi] * (r - cy)
                c0 = int(np.floor(u))
                w = u - c0
                val = sino[vi, b] * step[vi]
                if 0 <= c0 < width:
                    out[r, c0] += (1.0 - w) * val
                if 0 <= c0 + 1 < width:
                    out[r, c0 + 1] += w * val


@njit(cache=True, parallel=True)
def _joseph_back_cols(sino, base, slope, step, out):
    """Transpose scatter for column-stepping views; parallel over columns.

    ``base[vi, b] + slope[vi] * col`` is the fractional row hit by ray
    (vi, b) in column col.
    """
    n_views, n_bins = sino.shape
    height, width = out.shape
    for col in prange(width):
        for vi in range(n_views):
            for b in range(n_bins):
                v = base[vi, b] + slope[vi] * col
                r0 = int(np.floor(v))
                w = v - r0
                val = sino[vi, b] * step[vi]
                if 0 <= r0 < height:
                    out[r0, col] += (1.0 - w) * val
                if 0 <= r0 + 1 < height:
                    out[r0 + 1, col] += w * val


@njit(cache=True)
def _joseph_dense(cos, sin, s, px, height, width, out):
    n_views = cos.shape[0]
    n_bins = s.shape[0]
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    for vi in range(n_views):
        c = cos[vi]
        sn = sin[vi]
        if abs(c) >= abs(sn):
            step = px / abs(c)
            tan = sn / c
            for b in range(n_bins):
                ray = vi * n_bins + b
                su = s[b] / (c * px) + cx
                for r in range(height):
                    u = su + (r - cy) * tan
                    c0 = int(np.floor(u))
                    w = u - c0
                    if 0 <= c0 < width:
                        out[ray, r * width + c0] += (1.0 - w) * step
                    if 0 <= c0 + 1 < width:
                        out[ray, r * width + c0 + 1] += w * step
        else:
            step = px / abs(sn)
            cot = c / sn
            for b in range(n_bins):
                ray = vi * n_bins + b
                sv = cy - s[b] / (sn * px) + cx * cot
                for col in range(width):
                    v = sv - col * cot
                    r0 = int(np.floor(v))
                    w = v - r0
                    if 0 <= r0 < height:
                        out[ray, r0 * width + col] += (1.0 - w) * step
                    if 0 <= r0 + 1 < height:
                        out[ray, (r0 + 1) * width + col] += w * step


def project_values(values: np.ndarray, geom: ParallelGeometry) -> np.ndarray:
    """Array-level forward projection (no container validation/copies).

    Inner loops of iterative solvers use this; everyone else should prefer
    :func:`forward_project`.
    """
    cos, sin, s = _ray_tables(geom)
    out = np.zeros(geom.shape)
    _joseph_forward(
        np.ascontiguousarray(values, dtype=np.float64), cos, sin, s,
        geom.grid.pixel_size, out,
    )
    return out


def backproject_values(values: np.ndarray, geom: ParallelGeometry) -> np.ndarray:
    """Array-level exact transpose of :func:`project_values`."""
    cos, sin, s = _ray_tables(geom)
    px = geom.grid.pixel_size
    grid = geom.grid
    cx = (grid.width - 1) / 2.0
    cy = (grid.height - 1) / 2.0
    row_major = np.abs(cos) >= np.abs(sin)
    out = np.zeros(grid.shape)
    sino = np.ascontiguousarray(values, dtype=np.float64)

    rm = np.flatnonzero(row_major)
    if rm.size:
        c = cos[rm]
        base = s[np.newaxis, :] / (c * px)[:, np.newaxis] + cx
        _joseph_back_rows(
            np.ascontiguousarray(sino[rm]), base, sin[rm] / c, px / np.abs(c), out
        )
    cm = np.flatnonzero(~row_major)
    if cm.size:
        sn = sin[cm]
        cot = cos[cm] / sn
        base = cy - s[np.newaxis, :] / (sn * px)[:, np.newaxis] + (cx * cot)[:, np.newaxis]
        _joseph_back_cols(
            np.ascontiguousarray(sino[cm]), base, -cot, px / np.abs(sn), out
        )
    return out


def forward_project(image: Image, geom: ParallelGeometry) -> Sinogram:
    """Apply the system matrix: weighted line integrals for every ray.

    Raises
    ------
    ValidationError
        If the image grid does not match the geometry's grid.
    """
    if image.grid != geom.grid:
        raise ValidationError("image grid does not match geometry grid")
    return Sinogram(geom, project_values(image.values, geom))


def back_project(sino: Sinogram) -> Image:
    """Apply the exact transpose of :func:`forward_project`."""
    return Image(sino.geometry.grid, backproject_values(sino.values, sino.geometry))


def system_matrix_dense(geom: ParallelGeometry, entry_cap: int = DENSE_ENTRY_CAP):
    """Materialize the system matrix (rows = rays, cols = pixels).

    Intended as a test oracle on small problems; refuses to build more
    than ``entry_cap`` entries.
    """
    grid = geom.grid
    n_entries = geom.n_views * geom.n_bins * grid.n_pixels
    if n_entries > entry_cap:
        raise SizeError(
            f"dense system matrix would have {n_entries} entries (cap {entry_cap})"
        )
    cos, sin, s = _ray_tables(geom)
    out = np.zeros((geom.n_views * geom.n_bins, grid.n_pixels))
    _joseph_dense(cos, sin, s, grid.pixel_size, grid.height, grid.width, out)
    return out
