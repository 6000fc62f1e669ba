"""Command-line surface of the toolkit.

Exit codes: 0 success, 2 validation/usage error, 3 numerical failure,
4 plugin or protocol error.
"""

import argparse
import json
import math
import sys

from . import io as pio
from .dose import NoiseModel, simulate_low_dose_with_stats
from .engine import PluginSpec, PnpConfig, pnp_reconstruct
from .errors import NumericalError, PluginError, ValidationError
from .experiment import ExperimentManifest, run_experiment
from .fbp import FILTERS, fbp_reconstruct
from .geometry import ImageGrid, make_geometry
from .metrics import mse, nps_compute, psnr, write_nps_csv
from .phantom import disk_phantom, shepp_logan
from .projector import forward_project
from .solvers import CgConfig, TvConfig, tv_reconstruct
from .threads import apply_thread_cap

__all__ = ["main"]


def _cmd_phantom(args):
    grid = ImageGrid(args.size, args.size, args.pixel_size)
    if args.kind == "disk":
        radius = args.radius if args.radius else 0.4 * args.size * args.pixel_size / 2
        image = disk_phantom(grid, radius, args.scale)
    else:
        image = shepp_logan(grid, args.scale,
                            modified=(args.kind == "shepp-logan-modified"))
    pio.write_image(image, args.output, content=f"phantom:{args.kind}")
    return 0


def _cmd_project(args):
    image = pio.read_image(args.input)
    geom = make_geometry(args.views, args.bins, args.bin_width, image.grid)
    sino = forward_project(image, geom)
    pio.write_sinogram(sino, args.output, content="projection")
    return 0


def _cmd_simulate(args):
    sino = pio.read_sinogram(args.input)
    model = NoiseModel(i0_full=args.i0, dose_fraction=args.fraction,
                       seed=args.seed, count_floor=args.count_floor)
    noisy, stats = simulate_low_dose_with_stats(sino, model)
    if stats.negative_inputs_clamped:
        print(f"warning: clamped {stats.negative_inputs_clamped} negative "
              "input integrals to zero", file=sys.stderr)
    if stats.starved_bins:
        print(f"warning: {stats.starved_bins} photon-starved bins clamped to "
              f"count_floor={model.count_floor}", file=sys.stderr)
    pio.write_sinogram(noisy, args.output, content="simulated", seed=args.seed)
    return 0


def _cmd_fbp(args):
    sino = pio.read_sinogram(args.input)
    image = fbp_reconstruct(sino, args.filter)
    pio.write_image(image, args.output, content=f"fbp:{args.filter}")
    return 0


def _cmd_tv(args):
    sino = pio.read_sinogram(args.input)
    image = tv_reconstruct(
        sino,
        TvConfig(weight=args.weight, max_iters=args.tv_iters),
        CgConfig(max_iters=args.cg_iters, rel_tolerance=args.cg_tol),
        outer_loops=args.loops,
        mu_sigma2_start=args.mu_sigma2_start,
    )
    pio.write_image(image, args.output, content="tv")
    return 0


def _write_trace(trace, path):
    if trace is None or path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trace.to_dict(), fh, indent=2)
        fh.write("\n")


def _cmd_pnp(args):
    sino = pio.read_sinogram(args.input)
    schedule = tuple(float(tok) for tok in args.mu_sigma2.split(","))
    plugins = tuple(PluginSpec.parse(tok) for tok in args.plugin)
    if args.loops != len(schedule) or args.loops != len(plugins):
        raise ValidationError(
            f"--loops {args.loops} needs {args.loops} --mu-sigma2 entries and "
            f"--plugin flags (got {len(schedule)} and {len(plugins)})"
        )
    cfg = PnpConfig(
        loops=args.loops,
        mu_sigma2_schedule=schedule,
        plugins=plugins,
        cg=CgConfig(max_iters=args.cg_iters, rel_tolerance=args.cg_tol),
        initializer=args.init,
        init_tv=TvConfig(weight=args.init_tv_weight, max_iters=args.init_tv_iters),
        init_tv_loops=args.init_tv_loops,
        plugin_timeout=args.plugin_timeout,
    )
    try:
        image, trace = pnp_reconstruct(sino, cfg)
    except PluginError as err:
        _write_trace(err.trace, args.trace)
        raise
    _write_trace(trace, args.trace)
    pio.write_image(image, args.output, content="pnp")
    return 0


def _cmd_metrics(args):
    a = pio.read_image(args.image_a)
    b = pio.read_image(args.image_b)
    err = mse(a, b)
    ratio = psnr(a, b, args.range)
    print(f"mse,{err:.9g}")
    print("psnr,identical" if math.isinf(ratio) else f"psnr,{ratio:.9g}")
    return 0


def _cmd_nps(args):
    image = pio.read_image(args.input)
    write_nps_csv(nps_compute(image), args.output)
    return 0


def _cmd_experiment(args):
    manifest = ExperimentManifest.from_file(args.manifest)
    run_experiment(manifest, args.output, force=args.force)
    return 0


def _cmd_preview(args):
    from .report import save_image_png

    image = pio.read_image(args.input)
    if args.window_hu:
        save_image_png(image, args.output, window_hu=tuple(args.window_hu),
                       mu_water=args.mu_water)
    elif args.window:
        save_image_png(image, args.output, window=tuple(args.window))
    else:
        save_image_png(image, args.output)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pnpct",
        description="Low-dose CT toolkit: simulate, reconstruct (FBP/TV/PnP), evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="render a synthetic phantom image")
    p.add_argument("--size", type=int, required=True, help="grid size N (NxN pixels)")
    p.add_argument("--kind", default="shepp-logan",
                   choices=["shepp-logan", "shepp-logan-modified", "disk"])
    p.add_argument("--scale", type=float, required=True,
                   help="attenuation scale in 1/mm")
    p.add_argument("--pixel-size", type=float, default=1.0, help="pixel size in mm")
    p.add_argument("--radius", type=float, default=None,
                   help="disk radius in mm (disk kind)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("project", help="forward-project an image to a sinogram")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--views", type=int, required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--bin-width", type=float, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("simulate", help="add Poisson dose noise to a sinogram")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--i0", type=float, required=True,
                   help="full-dose photons per bin")
    p.add_argument("--fraction", type=float, required=True, help="dose fraction (0,1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count-floor", type=float, default=1.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fbp", help="filtered back-projection reconstruction")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--filter", default="ram-lak", choices=list(FILTERS))
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_fbp)

    p = sub.add_parser("tv", help="TV-regularized iterative reconstruction")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--weight", type=float, required=True)
    p.add_argument("--loops", type=int, required=True, help="outer HQS loops")
    p.add_argument("--tv-iters", type=int, default=50)
    p.add_argument("--cg-iters", type=int, default=30)
    p.add_argument("--cg-tol", type=float, default=1e-6)
    p.add_argument("--mu-sigma2-start", type=float, default=5e3)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_tv)

    p = sub.add_parser("pnp", help="Plug-and-Play cascade reconstruction")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--loops", type=int, required=True)
    p.add_argument("--mu-sigma2", required=True,
                   help="comma-separated per-loop coupling, e.g. 5e3,7e3,8e3")
    p.add_argument("--plugin", action="append", required=True,
                   help="per-loop denoiser: identity | gaussian:S | tv:W[:ITERS] | "
                        "median:R | external:COMMAND (repeat per loop)")
    p.add_argument("--init", default="tv", choices=["tv", "fbp"])
    p.add_argument("--init-tv-weight", type=float, default=1e-3)
    p.add_argument("--init-tv-iters", type=int, default=50)
    p.add_argument("--init-tv-loops", type=int, default=3)
    p.add_argument("--cg-iters", type=int, default=30)
    p.add_argument("--cg-tol", type=float, default=1e-6)
    p.add_argument("--plugin-timeout", type=float, default=60.0)
    p.add_argument("--trace", default=None, help="write the loop trace JSON here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_pnp)

    p = sub.add_parser("metrics", help="MSE and PSNR between two images")
    p.add_argument("-a", dest="image_a", required=True)
    p.add_argument("-b", dest="image_b", required=True)
    p.add_argument("--range", type=float, required=True, help="PSNR data range")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("nps", help="radial noise power spectrum to CSV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_nps)

    p = sub.add_parser("experiment", help="run a manifest-driven comparison")
    p.add_argument("-m", "--manifest", required=True)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--force", action="store_true",
                   help="allow writing into a non-empty directory")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("preview", help="export a grayscale PNG preview")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--window", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"), help="attenuation display window")
    p.add_argument("--window-hu", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"), help="Hounsfield display window")
    p.add_argument("--mu-water", type=float, default=0.02,
                   help="water attenuation (1/mm) anchoring the HU scale")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_preview)

    return parser


def main(argv=None) -> int:
    apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except PluginError as err:
        print(f"plugin error: {err}", file=sys.stderr)
        return 4
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
