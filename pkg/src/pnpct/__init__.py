"""pnpct: desk-scale low-dose CT reconstruction and evaluation toolkit.

Simulate Poisson low-dose sinograms of synthetic phantoms, reconstruct
them with FBP, TV-regularized iteration, or a Plug-and-Play cascade with
loop-specific denoiser plugins (built-in or external processes), and
evaluate with MSE, PSNR, and noise-power-spectrum analysis.
"""

from .dose import DoseStats, NoiseModel, simulate_low_dose, simulate_low_dose_with_stats
from .engine import (
    PluginSpec,
    PnpConfig,
    PnpTrace,
    apply_plugin,
    external_plugin_invoke,
    pnp_reconstruct,
    run_plugin_ablation,
    select_mu_sigma2,
)
from .errors import (
    NumericalError,
    PluginError,
    PluginTimeoutError,
    ProtocolError,
    SizeError,
    ToolkitError,
    ValidationError,
)
from .fbp import fbp_reconstruct
from .geometry import Image, ImageGrid, ParallelGeometry, Sinogram, make_geometry
from .io import read_image, read_sinogram, write_image, write_sinogram
from .metrics import NpsResult, average_nps, mse, nps_compute, nps_distance, psnr
from .phantom import disk_phantom, disk_sinogram, shepp_logan
from .projector import back_project, forward_project, system_matrix_dense
from .solvers import CgConfig, TvConfig, cg_x_update, tv_denoise, tv_reconstruct

__version__ = "0.1.0"

__all__ = [
    "CgConfig",
    "DoseStats",
    "Image",
    "ImageGrid",
    "NoiseModel",
    "NpsResult",
    "NumericalError",
    "ParallelGeometry",
    "PluginError",
    "PluginSpec",
    "PluginTimeoutError",
    "PnpConfig",
    "PnpTrace",
    "ProtocolError",
    "Sinogram",
    "SizeError",
    "ToolkitError",
    "TvConfig",
    "ValidationError",
    "apply_plugin",
    "average_nps",
    "back_project",
    "cg_x_update",
    "disk_phantom",
    "disk_sinogram",
    "external_plugin_invoke",
    "fbp_reconstruct",
    "forward_project",
    "make_geometry",
    "mse",
    "nps_compute",
    "nps_distance",
    "pnp_reconstruct",
    "psnr",
    "read_image",
    "read_sinogram",
    "run_plugin_ablation",
    "select_mu_sigma2",
    "shepp_logan",
    "simulate_low_dose",
    "simulate_low_dose_with_stats",
    "system_matrix_dense",
    "tv_denoise",
    "tv_reconstruct",
    "write_image",
    "write_sinogram",
]
