"""Cascaded Plug-and-Play reconstruction with loop-specific denoiser plugins.

Each loop applies the loop's denoiser to the current image (the prior
step, whose proximal slot a trained network would occupy) and then runs
the CG x-update against the measured sinogram with that loop's coupling
``mu_sigma2``, warm-starting from the previous iterate. Built-in
denoisers (identity, gaussian, tv, median) cover classical priors;
``external`` plugins are separate processes spoken to over a binary
stdin/stdout protocol (see :mod:`pnpct.wire`).
"""

import hashlib
import shlex
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import wire
from .errors import PluginError, ValidationError
from .fbp import fbp_reconstruct
from .geometry import Image, Sinogram
from .metrics import nps_distance
from .solvers import CgConfig, TvConfig, cg_x_update, cg_x_update_full, tv_denoise, tv_reconstruct

__all__ = [
    "PluginSpec",
    "PnpConfig",
    "PnpLoopRecord",
    "PnpTrace",
    "apply_plugin",
    "pnp_reconstruct",
    "select_mu_sigma2",
    "run_plugin_ablation",
    "external_plugin_invoke",
    "gaussian_denoise",
]

_KINDS = ("identity", "gaussian", "tv", "median", "external")


@dataclass(frozen=True)
class PluginSpec:
    """One denoiser slot of the cascade.

    ``kind`` selects among the built-ins and ``external``; only the
    parameters of the chosen kind are consulted.
    """

    kind: str
    sigma_px: float = 1.0
    weight: float = 0.05
    iters: int = 50
    radius_px: int = 1
    endpoint: str = ""
    label: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown plugin kind {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma_px > 0):
            raise ValidationError("gaussian plugin needs sigma_px > 0")
        if self.kind == "tv":
            if not (self.weight >= 0):
                raise ValidationError("tv plugin needs weight >= 0")
            if self.iters < 1:
                raise ValidationError("tv plugin needs iters >= 1")
        if self.kind == "median" and self.radius_px < 1:
            raise ValidationError("median plugin needs radius_px >= 1")
        if self.kind == "external" and not self.endpoint.strip():
            raise ValidationError("external plugin needs a non-empty endpoint")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self):
        if self.kind == "identity":
            return "identity"
        if self.kind == "gaussian":
            return f"gaussian({self.sigma_px:g})"
        if self.kind == "tv":
            return f"tv({self.weight:g})"
        if self.kind == "median":
            return f"median({self.radius_px})"
        return f"external({shlex.split(self.endpoint)[0]})"

    @classmethod
    def parse(cls, text: str) -> "PluginSpec":
        """Parse CLI syntax: ``identity``, ``gaussian:S``, ``tv:W[:ITERS]``,
        ``median:R``, ``external:COMMAND``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip()
        if kind == "identity":
            return cls(kind="identity")
        if kind == "gaussian":
            return cls(kind="gaussian", sigma_px=float(rest))
        if kind == "tv":
            parts = rest.split(":")
            weight = float(parts[0])
            iters = int(parts[1]) if len(parts) > 1 else 50
            return cls(kind="tv", weight=weight, iters=iters)
        if kind == "median":
            return cls(kind="median", radius_px=int(rest))
        if kind == "external":
            return cls(kind="external", endpoint=rest)
        raise ValidationError(f"unknown plugin kind {kind!r}")


@dataclass(frozen=True)
class PnpConfig:
    """Cascade description: per-loop coupling schedule and plugin slots.

    ``initializer`` is ``tv`` (the reference low-dose reconstruction that
    feeds loop 1), ``fbp`` (faster), or ``provided`` with ``init_image``.
    """

    loops: int
    mu_sigma2_schedule: tuple
    plugins: tuple
    cg: CgConfig = CgConfig()
    initializer: str = "tv"
    init_image: Image = None
    init_fbp_filter: str = "hann"
    init_tv: TvConfig = TvConfig(weight=1e-3, max_iters=50)
    init_tv_loops: int = 3
    plugin_timeout: float = 60.0
    plugin_persistent: bool = True

    def __post_init__(self):
        if self.loops < 0:
            raise ValidationError("loops must be >= 0")
        schedule = tuple(float(m) for m in self.mu_sigma2_schedule)
        plugins = tuple(self.plugins)
        if len(schedule) != self.loops or len(plugins) != self.loops:
            raise ValidationError(
                "mu_sigma2_schedule and plugins must each have one entry per loop"
            )
        if any(not (m > 0 and np.isfinite(m)) for m in schedule):
            raise ValidationError("all mu_sigma2 values must be positive")
        if self.initializer not in ("fbp", "tv", "provided"):
            raise ValidationError("initializer must be fbp, tv, or provided")
        if self.initializer == "provided" and self.init_image is None:
            raise ValidationError("initializer 'provided' requires init_image")
        object.__setattr__(self, "mu_sigma2_schedule", schedule)
        object.__setattr__(self, "plugins", plugins)


@dataclass(frozen=True)
class PnpLoopRecord:
    loop_index: int
    plugin_label: str
    mu_sigma2: float
    cg_iterations: int
    cg_residual: float
    v_checksum: str
    x_checksum: str


@dataclass
class PnpTrace:
    """Per-loop provenance of one cascade run (one record per executed loop)."""

    initializer: str = ""
    initializer_checksum: str = ""
    records: list = field(default_factory=list)
    error: str = ""

    def plugin_labels(self):
        return [r.plugin_label for r in self.records]

    def to_dict(self):
        return {
            "initializer": self.initializer,
            "initializer_checksum": self.initializer_checksum,
            "error": self.error,
            "loops": [
                {
                    "loop_index": r.loop_index,
                    "plugin_label": r.plugin_label,
                    "mu_sigma2": r.mu_sigma2,
                    "cg_iterations": r.cg_iterations,
                    "cg_residual": r.cg_residual,
                    "v_checksum": r.v_checksum,
                    "x_checksum": r.x_checksum,
                }
                for r in self.records
            ],
        }


def checksum(values: np.ndarray) -> str:
    """SHA-256 of the row-major float64 little-endian bytes."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    return hashlib.sha256(arr.tobytes()).hexdigest()


def gaussian_denoise(values: np.ndarray, sigma_px: float) -> np.ndarray:
    """Separable sampled-Gaussian blur, kernel radius round(4 sigma),
    symmetric (reflect) boundary. External reference plugins mirror this
    convention bit for bit up to float32 payload rounding."""
    radius = int(4.0 * sigma_px + 0.5)
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma_px) ** 2)
    k /= k.sum()
    out = ndimage.correlate1d(np.asarray(values, dtype=np.float64), k, axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def apply_plugin(
    v_in: Image,
    spec: PluginSpec,
    loop_index: int,
    strength_hint: float = 0.0,
    client: "wire.ExternalPlugin" = None,
) -> Image:
    """Run one denoiser slot on an image.

    The identity kind returns its input object unchanged (bitwise).
    External plugins are invoked through ``client`` when given (persistent
    mode), else through a one-shot process.
    """
    if spec.kind == "identity":
        return v_in
    if spec.kind == "gaussian":
        return Image(v_in.grid, gaussian_denoise(v_in.values, spec.sigma_px))
    if spec.kind == "tv":
        return tv_denoise(v_in, TvConfig(weight=spec.weight, max_iters=spec.iters))
    if spec.kind == "median":
        size = 2 * spec.radius_px + 1
        return Image(
            v_in.grid, ndimage.median_filter(v_in.values, size=size, mode="reflect")
        )
    # external
    try:
        if client is not None:
            out = client.invoke(
                v_in.values, loop_index, strength_hint, v_in.grid.pixel_size
            )
            return Image(v_in.grid, out)
        return external_plugin_invoke(spec.endpoint, v_in, loop_index, strength_hint)
    except PluginError as err:
        err.args = (f"plugin {spec.label!r} failed in loop {loop_index}: {err.args[0]}",)
        raise


def external_plugin_invoke(
    endpoint: str,
    image: Image,
    loop_index: int,
    strength_hint: float,
    timeout: float = 60.0,
) -> Image:
    """One-shot invocation of an external plugin process.

    Spawns ``endpoint``, sends a single request, reads the response, and
    closes the process. Raises :class:`~pnpct.errors.PluginError`
    subclasses on handshake, protocol, or timeout failures.
    """
    client = wire.ExternalPlugin(endpoint, timeout=timeout, persistent=False)
    try:
        out = client.invoke(image.values, loop_index, strength_hint, image.grid.pixel_size)
    finally:
        client.close()
    return Image(image.grid, out)


def _initializer_image(y_low: Sinogram, cfg: PnpConfig) -> Image:
    if cfg.initializer == "provided":
        if cfg.init_image.grid != y_low.geometry.grid:
            raise ValidationError("provided initializer grid does not match sinogram")
        return cfg.init_image
    if cfg.initializer == "fbp":
        return fbp_reconstruct(y_low, cfg.init_fbp_filter)
    return tv_reconstruct(y_low, cfg.init_tv, cfg.cg, cfg.init_tv_loops)


def pnp_reconstruct(y_low: Sinogram, cfg: PnpConfig):
    """Run the full cascade; returns the final image and its trace.

    A failing external plugin aborts the run with the partial trace
    attached to the raised :class:`~pnpct.errors.PluginError`.
    """
    x = _initializer_image(y_low, cfg)
    trace = PnpTrace(initializer=cfg.initializer, initializer_checksum=checksum(x.values))

    clients = {}
    try:
        for n in range(cfg.loops):
            spec = cfg.plugins[n]
            mu_sigma2 = cfg.mu_sigma2_schedule[n]
            client = None
            if spec.kind == "external" and cfg.plugin_persistent:
                if spec.endpoint not in clients:
                    clients[spec.endpoint] = wire.ExternalPlugin(
                        spec.endpoint, timeout=cfg.plugin_timeout, persistent=True
                    )
                client = clients[spec.endpoint]
            try:
                v = apply_plugin(x, spec, n, strength_hint=mu_sigma2, client=client)
            except PluginError as err:
                trace.error = str(err)
                err.trace = trace
                raise
            if v.grid.shape != x.grid.shape:
                err = PluginError(
                    f"plugin {spec.label!r} changed image shape in loop {n}"
                )
                trace.error = str(err)
                err.trace = trace
                raise err
            x, info = cg_x_update_full(y_low, v, mu_sigma2, x, cfg.cg)
            trace.records.append(
                PnpLoopRecord(
                    loop_index=n,
                    plugin_label=spec.label,
                    mu_sigma2=mu_sigma2,
                    cg_iterations=info.iterations,
                    cg_residual=info.rel_residual,
                    v_checksum=checksum(v.values),
                    x_checksum=checksum(x.values),
                )
            )
    finally:
        for c in clients.values():
            c.close()
    return x, trace


def select_mu_sigma2(
    y_low: Sinogram,
    v: Image,
    reference_fulldose: Image,
    candidates,
    cfg: CgConfig = CgConfig(),
) -> float:
    """Offline coupling calibration: pick the candidate whose x-update has
    the noise power spectrum closest to the full-dose reference.

    Each candidate's x-update starts from ``v``. Ties go to the larger
    candidate.
    """
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ValidationError("candidates must be non-empty")
    if any(c <= 0 for c in candidates):
        raise ValidationError("candidates must be positive")
    best = None
    best_d = None
    for c in candidates:
        x = cg_x_update(y_low, v, c, v, cfg)
        d = nps_distance(x, reference_fulldose)
        if best is None or d < best_d or (d == best_d and c > best):
            best, best_d = c, d
    return best


def run_plugin_ablation(y_low: Sinogram, cfg: PnpConfig):
    """Compare the proposed loop-specific plugin schedule against reusing
    the first loop's plugin everywhere.

    Returns ``(proposed_image, fixed_first_image, proposed_trace,
    fixed_first_trace)``; the traces' plugin labels prove the
    substitution.
    """
    if cfg.loops < 2:
        raise ValidationError("plugin ablation needs at least 2 loops")
    fixed_cfg = replace(cfg, plugins=tuple(cfg.plugins[0] for _ in range(cfg.loops)))
    proposed_img, proposed_trace = pnp_reconstruct(y_low, cfg)
    fixed_img, fixed_trace = pnp_reconstruct(y_low, fixed_cfg)
    return proposed_img, fixed_img, proposed_trace, fixed_trace
