"""Image quality metrics: MSE, PSNR, and the noise power spectrum.

The NPS follows the split used for texture assessment of reconstructed
CT: a 4x4 box filter (symmetric boundary, anchored at the top-left pixel
of the window's central 2x2 block) extracts the low-frequency content,
the residual is the high-frequency component, and its mean-removed 2D
periodogram is radially averaged into bins one frequency sample wide.
``power`` is normalized so that the spectrum sums to the spatial-domain
sum of squares of the mean-removed residual (Parseval).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .geometry import Image

__all__ = [
    "mse",
    "psnr",
    "NpsResult",
    "nps_compute",
    "nps_distance",
    "average_nps",
    "write_nps_csv",
]


def _check_same_shape(a: Image, b: Image):
    if a.grid.shape != b.grid.shape:
        raise ValidationError(f"image shapes differ: {a.grid.shape} vs {b.grid.shape}")


def mse(a: Image, b: Image) -> float:
    """Mean squared difference between two images of equal shape."""
    _check_same_shape(a, b)
    diff = a.values - b.values
    return float(np.mean(diff * diff))


def psnr(a: Image, b: Image, data_range: float) -> float:
    """Peak signal-to-noise ratio in dB for the given data range.

    Identical images are reported as ``math.inf`` (an explicit sentinel,
    not the result of dividing by zero).
    """
    if not (data_range > 0):
        raise ValidationError("data_range must be positive")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range * data_range / err)


@dataclass(frozen=True)
class NpsResult:
    """Radially averaged noise power spectrum.

    ``radial_bins`` holds bin-center frequencies (cycles/mm),
    ``power`` the mean spectral power per bin, and ``hf_total`` the total
    power of the high-frequency component.
    """

    radial_bins: np.ndarray
    power: np.ndarray
    hf_total: float


def box4_lowpass(values: np.ndarray) -> np.ndarray:
    """4x4 averaging filter with symmetric boundary extension.

    The even-sized window has no center pixel; output pixel (i, j)
    averages rows i-1..i+2 and columns j-1..j+2, anchoring the result at
    the top-left pixel of the central 2x2 block.
    """
    return ndimage.uniform_filter(
        np.asarray(values, dtype=np.float64), size=4, mode="reflect"
    )


def nps_compute(img: Image) -> NpsResult:
    """Noise power spectrum of a single image.

    Requires at least an 8x8 image so the 4x4 split is meaningful.
    """
    h, w = img.grid.shape
    if h < 8 or w < 8:
        raise ValidationError("nps_compute requires width and height >= 8")
    high = img.values - box4_lowpass(img.values)
    high = high - high.mean()

    spectrum = np.abs(np.fft.fft2(high)) ** 2 / (h * w)
    fx = np.fft.fftfreq(w, d=img.grid.pixel_size)
    fy = np.fft.fftfreq(h, d=img.grid.pixel_size)
    radial = np.sqrt(fx[np.newaxis, :] ** 2 + fy[:, np.newaxis] ** 2)

    df = 1.0 / (max(h, w) * img.grid.pixel_size)
    idx = np.floor(radial / df).astype(np.int64).ravel()
    n_bins = int(idx.max()) + 1
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=spectrum.ravel(), minlength=n_bins)
    power = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    centers = (np.arange(n_bins) + 0.5) * df
    return NpsResult(radial_bins=centers, power=power, hf_total=float(spectrum.sum()))


def nps_distance(a: Image, reference: Image) -> float:
    """l2 distance between the radial NPS profiles of two images."""
    _check_same_shape(a, reference)
    pa = nps_compute(a).power
    pb = nps_compute(reference).power
    return float(np.linalg.norm(pa - pb))


def average_nps(results) -> NpsResult:
    """Average NPS profiles over several same-shape images' results."""
    results = list(results)
    if not results:
        raise ValidationError("average_nps needs at least one result")
    bins = results[0].radial_bins
    for r in results[1:]:
        if r.power.shape != results[0].power.shape:
            raise ValidationError("NPS profiles have different bin counts")
    power = np.mean([r.power for r in results], axis=0)
    hf = float(np.mean([r.hf_total for r in results]))
    return NpsResult(radial_bins=bins, power=power, hf_total=hf)


def write_nps_csv(result: NpsResult, path):
    """Emit a radial profile as CSV: one row per bin, 9 significant digits."""
    lines = ["freq_cycles_per_mm,power"]
    for f, p in zip(result.radial_bins, result.power):
        lines.append(f"{f:.9g},{p:.9g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
