"""Figure rendering for experiment reports and image previews.

Everything renders through the Agg backend straight to files; HU display
windows are an affine view of attenuation relative to a water value and
exist only here.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ValidationError
from .geometry import Image

__all__ = ["hu_window_to_attenuation", "save_image_png", "render_experiment_figures"]


def hu_window_to_attenuation(window_hu, mu_water):
    """Convert an (lo, hi) HU display window to attenuation bounds."""
    if not (mu_water > 0):
        raise ValidationError("mu_water must be positive")
    lo, hi = window_hu
    if not (hi > lo):
        raise ValidationError("HU window must have hi > lo")
    return (mu_water * (1.0 + lo / 1000.0), mu_water * (1.0 + hi / 1000.0))


def save_image_png(image: Image, path, window=None, window_hu=None, mu_water=0.02):
    """Write a grayscale PNG of an image.

    ``window`` is (vmin, vmax) in attenuation units; ``window_hu`` is an
    (lo, hi) Hounsfield window interpreted against ``mu_water``.
    """
    if window is not None and window_hu is not None:
        raise ValidationError("give either window or window_hu, not both")
    if window_hu is not None:
        window = hu_window_to_attenuation(window_hu, mu_water)
    vmin, vmax = window if window is not None else (None, None)
    fig, ax = plt.subplots(figsize=(4, 4), dpi=150)
    ax.imshow(image.values, cmap="gray", vmin=vmin, vmax=vmax, interpolation="nearest")
    ax.set_axis_off()
    fig.tight_layout(pad=0)
    fig.savefig(path)
    plt.close(fig)


def _grid_dims(n):
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    return rows, cols


def render_experiment_figures(outdir, named_images, nps_profiles, metric_rows):
    """Render the standard report figures next to the CSVs.

    Parameters
    ----------
    named_images : list of (name, Image)
        Shown as a grayscale grid (shared window from the first image).
    nps_profiles : list of (name, NpsResult)
        Radial profiles overlaid on one axis.
    metric_rows : list of (variant, mse, psnr, nps_distance)
        Bars for PSNR and NPS distance; missing metrics are skipped.
    """
    if named_images:
        first = named_images[0][1].values
        vmin, vmax = float(first.min()), float(first.max())
        rows, cols = _grid_dims(len(named_images))
        fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), dpi=130)
        axes = np.atleast_1d(axes).ravel()
        for ax in axes[len(named_images):]:
            ax.set_axis_off()
        for ax, (name, img) in zip(axes, named_images):
            ax.imshow(img.values, cmap="gray", vmin=vmin, vmax=vmax,
                      interpolation="nearest")
            ax.set_title(name, fontsize=9)
            ax.set_axis_off()
        fig.tight_layout()
        fig.savefig(f"{outdir}/images_grid.png")
        plt.close(fig)

    if nps_profiles:
        fig, ax = plt.subplots(figsize=(6, 4), dpi=130)
        for name, prof in nps_profiles:
            ax.plot(prof.radial_bins, prof.power, label=name, linewidth=1.2)
        ax.set_xlabel("spatial frequency (cycles/mm)")
        ax.set_ylabel("noise power")
        ax.set_title("radial noise power spectra")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(f"{outdir}/nps_profiles.png")
        plt.close(fig)

    rows = [r for r in metric_rows if r[2] is not None or r[3] is not None]
    if rows:
        names = [r[0] for r in rows]
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4), dpi=130)
        psnrs = [r[2] if r[2] is not None else np.nan for r in rows]
        ax1.bar(names, psnrs, color="tab:blue")
        ax1.set_ylabel("PSNR (dB)")
        ax1.tick_params(axis="x", rotation=30)
        dists = [r[3] if r[3] is not None else np.nan for r in rows]
        ax2.bar(names, dists, color="tab:orange")
        ax2.set_ylabel("NPS distance to reference")
        ax2.tick_params(axis="x", rotation=30)
        fig.tight_layout()
        fig.savefig(f"{outdir}/metrics_summary.png")
        plt.close(fig)
