"""Flat binary persistence for images and sinograms.

A dataset is two files: ``<path>`` holds the raw float32 little-endian
row-major payload, ``<path>.meta`` is a UTF-8 ``key = value`` sidecar
descriptor with the dimensions, spacings, geometry, content kind, and
creation seed. Writes go through a temp file and an atomic rename.
"""

import os
import tempfile

import numpy as np

from .errors import ValidationError
from .geometry import Image, ImageGrid, ParallelGeometry, Sinogram

__all__ = [
    "write_image",
    "read_image",
    "write_sinogram",
    "read_sinogram",
    "meta_path",
]

FORMAT_VERSION = "pnpct/1"


def meta_path(path):
    return str(path) + ".meta"


def _atomic_write(path, data: bytes):
    path = str(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_meta(path, fields):
    lines = [f"format = {FORMAT_VERSION}"]
    for key, value in fields.items():
        if value is None:
            continue
        lines.append(f"{key} = {value}")
    _atomic_write(meta_path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def _read_meta(path):
    mp = meta_path(path)
    if not os.path.exists(mp):
        raise ValidationError(f"missing descriptor file {mp}")
    fields = {}
    with open(mp, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"malformed descriptor line {line!r} in {mp}")
            fields[key.strip()] = value.strip()
    if fields.get("format") != FORMAT_VERSION:
        raise ValidationError(
            f"unknown descriptor version {fields.get('format')!r} in {mp}"
        )
    return fields


def _read_payload(path, count):
    with open(path, "rb") as fh:
        data = fh.read()
    expected = count * 4
    if len(data) < expected:
        raise ValidationError(
            f"truncated payload {path}: {len(data)} bytes, expected {expected}"
        )
    if len(data) > expected:
        raise ValidationError(
            f"oversized payload {path}: {len(data)} bytes, expected {expected}"
        )
    return np.frombuffer(data, dtype="<f4").astype(np.float64)


def _dim(fields, key, mp):
    try:
        value = int(fields[key])
    except KeyError:
        raise ValidationError(f"descriptor {mp} is missing {key}") from None
    except ValueError:
        raise ValidationError(f"descriptor {mp}: {key} is not an integer") from None
    if value <= 0:
        raise ValidationError(f"descriptor {mp}: {key} must be positive")
    return value


def _spacing(fields, key, mp):
    try:
        value = float(fields[key])
    except KeyError:
        raise ValidationError(f"descriptor {mp} is missing {key}") from None
    except ValueError:
        raise ValidationError(f"descriptor {mp}: {key} is not a number") from None
    if value <= 0:
        raise ValidationError(f"descriptor {mp}: {key} must be positive")
    return value


def write_image(image: Image, path, content: str = "image", seed=None):
    """Write payload and sidecar descriptor; lossless for float32 data."""
    _atomic_write(path, image.values.astype("<f4").tobytes())
    _write_meta(
        path,
        {
            "kind": "image",
            "content": content,
            "width": image.grid.width,
            "height": image.grid.height,
            "pixel_size_mm": repr(image.grid.pixel_size),
            "seed": seed,
        },
    )


def read_image(path) -> Image:
    fields = _read_meta(path)
    mp = meta_path(path)
    if fields.get("kind") != "image":
        raise ValidationError(f"{mp} does not describe an image")
    grid = ImageGrid(
        width=_dim(fields, "width", mp),
        height=_dim(fields, "height", mp),
        pixel_size=_spacing(fields, "pixel_size_mm", mp),
    )
    return Image(grid, _read_payload(path, grid.n_pixels))


def _auto_angles(n_views):
    return np.arange(n_views) * (np.pi / n_views)


def write_sinogram(sino: Sinogram, path, content: str = "sinogram", seed=None):
    geom = sino.geometry
    angles = np.asarray(geom.angles)
    if np.array_equal(angles, _auto_angles(geom.n_views)):
        angle_field = "auto"
    else:
        angle_field = ",".join(f"{a:.17g}" for a in angles)
    _atomic_write(path, sino.values.astype("<f4").tobytes())
    _write_meta(
        path,
        {
            "kind": "sinogram",
            "content": content,
            "n_views": geom.n_views,
            "n_bins": geom.n_bins,
            "bin_width_mm": repr(geom.bin_width),
            "grid_width": geom.grid.width,
            "grid_height": geom.grid.height,
            "grid_pixel_size_mm": repr(geom.grid.pixel_size),
            "angles": angle_field,
            "seed": seed,
        },
    )


def read_sinogram(path) -> Sinogram:
    fields = _read_meta(path)
    mp = meta_path(path)
    if fields.get("kind") != "sinogram":
        raise ValidationError(f"{mp} does not describe a sinogram")
    grid = ImageGrid(
        width=_dim(fields, "grid_width", mp),
        height=_dim(fields, "grid_height", mp),
        pixel_size=_spacing(fields, "grid_pixel_size_mm", mp),
    )
    n_views = _dim(fields, "n_views", mp)
    n_bins = _dim(fields, "n_bins", mp)
    angle_field = fields.get("angles", "auto")
    if angle_field == "auto":
        angles = _auto_angles(n_views)
    else:
        angles = np.array([float(a) for a in angle_field.split(",")])
    geom = ParallelGeometry(
        n_views=n_views,
        angles=angles,
        n_bins=n_bins,
        bin_width=_spacing(fields, "bin_width_mm", mp),
        grid=grid,
    )
    return Sinogram(geom, _read_payload(path, n_views * n_bins))
