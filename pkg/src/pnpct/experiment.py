"""Manifest-driven experiment runner.

One run goes phantom -> clean sinogram -> full- and low-dose simulated
sinograms -> a TV-regularized full-dose reference -> one reconstruction
per variant -> metrics CSV, per-variant NPS profile CSVs, and report
figures, all inside a fresh output directory. Fixed seeds make the whole
run byte-reproducible.

Manifest (JSON)::

    {
      "phantom":  {"kind": "shepp-logan|shepp-logan-modified|disk",
                   "size": 256, "pixel_size_mm": 1.0, "scale": 0.1,
                   "radius_mm": 40.0},
      "geometry": {"views": 360, "bins": 363, "bin_width_mm": 1.0},
      "noise":    {"i0_full": 1e5, "dose_fraction": 0.1,
                   "seed_low": 12, "seed_full": 11},
      "reference": {"tv_weight": 1e-3, "tv_iters": 50, "outer_loops": 3},
      "cg":       {"max_iters": 30, "rel_tolerance": 1e-6},
      "metrics_against": "reference" | "phantom",
      "psnr_range": null | float,
      "variants": [
        {"name": "fbp-low", "method": "fbp", "filter": "ram-lak",
         "dose": "low", "post_gaussian_sigma_px": null},
        {"name": "tv-low", "method": "tv", "weight": 1e-3,
         "tv_iters": 50, "outer_loops": 3},
        {"name": "pnp", "method": "pnp", "loops": 3,
         "mu_sigma2": [5e3, 7e3, 8e3],
         "plugins": ["tv:0.002:60", "tv:0.002:60", "tv:0.002:60"],
         "init": "tv", "init_tv_weight": 1e-3, "init_tv_iters": 50,
         "init_tv_loops": 3}
      ]
    }
"""

import json
import math
import os
import shlex
import shutil
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import io as pio
from .dose import NoiseModel, simulate_low_dose
from .engine import PluginSpec, PnpConfig, pnp_reconstruct, gaussian_denoise
from .errors import ValidationError
from .fbp import fbp_reconstruct
from .geometry import Image, ImageGrid, make_geometry
from .metrics import mse, nps_compute, nps_distance, psnr, write_nps_csv
from .phantom import disk_phantom, shepp_logan
from .projector import forward_project
from .report import render_experiment_figures
from .solvers import CgConfig, TvConfig, tv_reconstruct
from .threads import kernels_reentrant, thread_cap

__all__ = ["ExperimentManifest", "run_experiment", "METRICS_HEADER"]

METRICS_HEADER = "variant,mse,psnr,nps_distance"


def _require(mapping, key, where):
    if key not in mapping:
        raise ValidationError(f"manifest {where} is missing {key!r}")
    return mapping[key]


@dataclass(frozen=True)
class ExperimentManifest:
    """Validated manifest; construct via :meth:`from_dict` or :meth:`from_file`."""

    raw: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentManifest":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as err:
            raise ValidationError(f"cannot read manifest {path}: {err}") from err
        except json.JSONDecodeError as err:
            raise ValidationError(f"manifest {path} is not valid JSON: {err}") from err
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentManifest":
        manifest = cls(raw=raw)
        manifest.validate()
        return manifest

    def validate(self):
        raw = self.raw
        phantom = _require(raw, "phantom", "root")
        kind = _require(phantom, "kind", "phantom")
        if kind not in ("shepp-logan", "shepp-logan-modified", "disk"):
            raise ValidationError(f"unknown phantom kind {kind!r}")
        if int(_require(phantom, "size", "phantom")) < 8:
            raise ValidationError("phantom size must be >= 8")
        geometry = _require(raw, "geometry", "root")
        for key in ("views", "bins"):
            if int(_require(geometry, key, "geometry")) < 1:
                raise ValidationError(f"geometry {key} must be >= 1")
        noise = _require(raw, "noise", "root")
        _require(noise, "i0_full", "noise")
        _require(noise, "dose_fraction", "noise")
        names = set()
        for variant in raw.get("variants", []):
            name = _require(variant, "name", "variant")
            if name in names:
                raise ValidationError(f"duplicate variant name {name!r}")
            names.add(name)
            method = _require(variant, "method", f"variant {name!r}")
            if method not in ("fbp", "tv", "pnp"):
                raise ValidationError(f"variant {name!r}: unknown method {method!r}")
            if method == "pnp":
                plugins = _require(variant, "plugins", f"variant {name!r}")
                schedule = _require(variant, "mu_sigma2", f"variant {name!r}")
                if len(plugins) != len(schedule):
                    raise ValidationError(
                        f"variant {name!r}: plugins and mu_sigma2 lengths differ"
                    )
                for text in plugins:
                    spec = PluginSpec.parse(text)
                    if spec.kind == "external":
                        self._check_endpoint(spec.endpoint, name)

    @staticmethod
    def _check_endpoint(endpoint, variant_name):
        argv0 = shlex.split(endpoint)[0]
        if shutil.which(argv0) is None and not os.path.exists(argv0):
            raise ValidationError(
                f"variant {variant_name!r}: plugin endpoint {argv0!r} not found"
            )

    # convenience accessors with defaults -------------------------------

    def grid(self) -> ImageGrid:
        phantom = self.raw["phantom"]
        size = int(phantom["size"])
        return ImageGrid(size, size, float(phantom.get("pixel_size_mm", 1.0)))

    def phantom_image(self) -> Image:
        phantom = self.raw["phantom"]
        grid = self.grid()
        scale = float(phantom.get("scale", 0.02))
        kind = phantom["kind"]
        if kind == "disk":
            radius = float(phantom.get("radius_mm",
                                       0.4 * grid.width * grid.pixel_size / 2))
            return disk_phantom(grid, radius, scale)
        return shepp_logan(grid, scale, modified=(kind == "shepp-logan-modified"))

    def geometry(self):
        geometry = self.raw["geometry"]
        grid = self.grid()
        return make_geometry(
            int(geometry["views"]),
            int(geometry["bins"]),
            float(geometry.get("bin_width_mm", grid.pixel_size)),
            grid,
        )

    def cg(self) -> CgConfig:
        cg = self.raw.get("cg", {})
        return CgConfig(
            max_iters=int(cg.get("max_iters", 30)),
            rel_tolerance=float(cg.get("rel_tolerance", 1e-6)),
        )

    def noise_models(self):
        noise = self.raw["noise"]
        seed_low = int(noise.get("seed_low", noise.get("seed", 0)))
        seed_full = int(noise.get("seed_full", seed_low + 1))
        i0 = float(noise["i0_full"])
        floor = float(noise.get("count_floor", 1.0))
        low = NoiseModel(i0, float(noise["dose_fraction"]), seed=seed_low,
                         count_floor=floor)
        full = NoiseModel(i0, 1.0, seed=seed_full, count_floor=floor)
        return full, low


def _reference_image(manifest, y_full, cg):
    ref = manifest.raw.get("reference", {})
    return tv_reconstruct(
        y_full,
        TvConfig(weight=float(ref.get("tv_weight", 1e-3)),
                 max_iters=int(ref.get("tv_iters", 50))),
        cg,
        outer_loops=int(ref.get("outer_loops", 3)),
        mu_sigma2_start=float(ref.get("mu_sigma2_start", 5e3)),
    )


def _variant_image(variant, sinos, manifest, cg):
    y = sinos[variant.get("dose", "low")]
    method = variant["method"]
    if method == "fbp":
        image = fbp_reconstruct(y, variant.get("filter", "ram-lak"))
    elif method == "tv":
        image = tv_reconstruct(
            y,
            TvConfig(weight=float(variant.get("weight", 1e-3)),
                     max_iters=int(variant.get("tv_iters", 50))),
            cg,
            outer_loops=int(variant.get("outer_loops", 3)),
            mu_sigma2_start=float(variant.get("mu_sigma2_start", 5e3)),
        )
    else:
        plugins = tuple(PluginSpec.parse(t) for t in variant["plugins"])
        cfg = PnpConfig(
            loops=len(plugins),
            mu_sigma2_schedule=tuple(float(m) for m in variant["mu_sigma2"]),
            plugins=plugins,
            cg=cg,
            initializer=variant.get("init", "tv"),
            init_fbp_filter=variant.get("init_fbp_filter", "hann"),
            init_tv=TvConfig(weight=float(variant.get("init_tv_weight", 1e-3)),
                             max_iters=int(variant.get("init_tv_iters", 50))),
            init_tv_loops=int(variant.get("init_tv_loops", 3)),
        )
        image, trace = pnp_reconstruct(y, cfg)
        return image, trace
    sigma = variant.get("post_gaussian_sigma_px")
    if sigma:
        image = Image(image.grid, gaussian_denoise(image.values, float(sigma)))
    return image, None


def _format_metric(value):
    if value is None:
        return ""
    if math.isinf(value):
        return "inf"
    return f"{value:.9g}"


def run_experiment(manifest: ExperimentManifest, outdir, force: bool = False):
    """Execute a manifest; returns a summary dict (also serialized to disk).

    Existing non-empty output directories are refused unless ``force``.
    Variant failures are recorded (``<name>.error.txt`` plus an empty
    metrics row) without stopping the other variants.
    """
    outdir = str(outdir)
    if os.path.exists(outdir) and os.listdir(outdir) and not force:
        raise ValidationError(
            f"output directory {outdir} is not empty (use force to overwrite)"
        )
    os.makedirs(outdir, exist_ok=True)

    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest.raw, fh, indent=2, sort_keys=True)
        fh.write("\n")

    grid = manifest.grid()
    phantom = manifest.phantom_image()
    geom = manifest.geometry()
    cg = manifest.cg()
    full_model, low_model = manifest.noise_models()

    clean = forward_project(phantom, geom)
    y_full = simulate_low_dose(clean, full_model)
    y_low = simulate_low_dose(clean, low_model)
    pio.write_image(phantom, os.path.join(outdir, "phantom.img"), content="phantom")
    pio.write_sinogram(clean, os.path.join(outdir, "sino_clean.img"), content="clean")
    pio.write_sinogram(y_full, os.path.join(outdir, "sino_full.img"),
                       content="full-dose", seed=full_model.seed)
    pio.write_sinogram(y_low, os.path.join(outdir, "sino_low.img"),
                       content="low-dose", seed=low_model.seed)

    reference = _reference_image(manifest, y_full, cg)
    pio.write_image(reference, os.path.join(outdir, "reference.img"),
                    content="full-dose TV reference")
    write_nps_csv(nps_compute(reference), os.path.join(outdir, "nps_reference.csv"))

    against = manifest.raw.get("metrics_against", "reference")
    target = reference if against == "reference" else phantom
    psnr_range = manifest.raw.get("psnr_range")
    if psnr_range is None:
        psnr_range = float(target.values.max() - target.values.min())
    selected = manifest.raw.get("metrics", ["mse", "psnr", "nps_distance"])

    sinos = {"low": y_low, "full": y_full}
    variants = manifest.raw.get("variants", [])

    def run_variant(variant):
        name = variant["name"]
        try:
            image, trace = _variant_image(variant, sinos, manifest, cg)
            pio.write_image(image, os.path.join(outdir, f"{name}.img"), content=name)
            if trace is not None:
                with open(os.path.join(outdir, f"{name}.trace.json"), "w",
                          encoding="utf-8") as fh:
                    json.dump(trace.to_dict(), fh, indent=2)
                    fh.write("\n")
            write_nps_csv(nps_compute(image), os.path.join(outdir, f"nps_{name}.csv"))
            row = {
                "mse": mse(image, target) if "mse" in selected else None,
                "psnr": psnr(image, target, psnr_range) if "psnr" in selected else None,
                "nps_distance": nps_distance(image, reference)
                if "nps_distance" in selected else None,
            }
            return name, image, row, None
        except Exception as err:  # noqa: BLE001 - failures are per-variant data
            with open(os.path.join(outdir, f"{name}.error.txt"), "w",
                      encoding="utf-8") as fh:
                fh.write(traceback.format_exc())
            return name, None, None, f"{type(err).__name__}: {err}"

    cap = thread_cap()
    if cap > 1 and len(variants) > 1 and kernels_reentrant():
        with ThreadPoolExecutor(max_workers=cap) as pool:
            results = list(pool.map(run_variant, variants))
    else:
        results = [run_variant(v) for v in variants]

    rows = []
    lines = [METRICS_HEADER]
    for name, _, row, error in results:
        if error is not None:
            lines.append(f"{name},,,")
            rows.append((name, None, None, None))
        else:
            lines.append(
                f"{name},{_format_metric(row['mse'])},{_format_metric(row['psnr'])},"
                f"{_format_metric(row['nps_distance'])}"
            )
            rows.append((name, row["mse"], row["psnr"], row["nps_distance"]))
    with open(os.path.join(outdir, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    named_images = [("phantom", phantom), ("reference", reference)]
    nps_profiles = [("reference", nps_compute(reference))]
    for name, image, _, error in results:
        if error is None:
            named_images.append((name, image))
            nps_profiles.append((name, nps_compute(image)))
    render_experiment_figures(outdir, named_images, nps_profiles, rows)

    summary = {
        "outdir": outdir,
        "psnr_range": psnr_range,
        "metrics_against": against,
        "variants": {
            name: ({"error": error} if error is not None else row)
            for name, _, row, error in results
        },
    }
    with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
