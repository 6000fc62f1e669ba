"""Quadratic data-fidelity update via conjugate gradient, plus TV machinery.

The x-update solves the stationarity condition of the coupled quadratic

    (A^T A + mu_sigma2 * I) x = A^T y + mu_sigma2 * v

by CG on the normal equations; the user-facing parameter is the single
product ``mu_sigma2`` (the objective has been rescaled so the noise level
never appears on its own). ``tv_denoise`` is Chambolle's dual projection
for the ROF problem and doubles as the built-in denoiser plugin;
``tv_reconstruct`` chains the two into the classical TV-regularized
reference reconstruction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .geometry import Image, Sinogram
from .projector import backproject_values, project_values

__all__ = [
    "CgConfig",
    "CgInfo",
    "TvConfig",
    "cg_x_update",
    "cg_x_update_full",
    "tv_denoise",
    "tv_reconstruct",
    "total_variation",
]


@dataclass(frozen=True)
class CgConfig:
    """Stopping rule for the conjugate-gradient x-update.

    ``rel_tolerance`` is on the residual norm relative to the right-hand
    side norm.
    """

    max_iters: int = 50
    rel_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not (self.rel_tolerance > 0):
            raise ValidationError("rel_tolerance must be positive")


@dataclass(frozen=True)
class CgInfo:
    """Outcome of one CG solve."""

    iterations: int
    rel_residual: float
    converged: bool
    objective: tuple = None


@dataclass(frozen=True)
class TvConfig:
    """Total-variation strength and inner-iteration budget.

    ``step`` is the dual ascent step of Chambolle's projection algorithm.
    """

    weight: float = 1e-3
    max_iters: int = 50
    step: float = 0.25

    def __post_init__(self):
        if not (self.weight >= 0 and np.isfinite(self.weight)):
            raise ValidationError("weight must be >= 0 and finite")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not (0 < self.step):
            raise ValidationError("step must be positive")


def _check_consistent(y: Sinogram, v: Image, x0: Image):
    if v.grid != y.geometry.grid or x0.grid != y.geometry.grid:
        raise ValidationError("sinogram, prior image, and start image grids differ")


def cg_x_update_full(
    y: Sinogram,
    v: Image,
    mu_sigma2: float,
    x0: Image,
    cfg: CgConfig = CgConfig(),
    track_objective: bool = False,
):
    """Run the CG x-update and report solver diagnostics.

    Returns
    -------
    (Image, CgInfo)
        The iterate and, when ``track_objective`` is set, the coupled
        quadratic objective evaluated at x0 and after every iteration.
    """
    _check_consistent(y, v, x0)
    if not (np.isfinite(mu_sigma2) and mu_sigma2 >= 0):
        raise ValidationError("mu_sigma2 must be finite and >= 0")
    geom = y.geometry

    def op(x):
        return backproject_values(project_values(x, geom), geom) + mu_sigma2 * x

    def objective(x):
        resid = project_values(x, geom) - y.values
        return 0.5 * np.sum(resid * resid) + 0.5 * mu_sigma2 * np.sum((x - v.values) ** 2)

    b = backproject_values(y.values, geom) + mu_sigma2 * v.values
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        b_norm = 1.0

    x = x0.values.copy()
    r = b - op(x)
    p = r.copy()
    rs = float(np.dot(r.ravel(), r.ravel()))
    r0_norm = np.sqrt(rs)
    history = [objective(x)] if track_objective else None

    iterations = 0
    rel = np.sqrt(rs) / b_norm
    while iterations < cfg.max_iters and rel > cfg.rel_tolerance:
        ap = op(p)
        denom = float(np.dot(p.ravel(), ap.ravel()))
        if denom <= 0.0:
            # operator is PSD; a nonpositive curvature direction means we
            # have hit numerical null space, keep the current iterate
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.dot(r.ravel(), r.ravel()))
        iterations += 1
        if track_objective:
            history.append(objective(x))
        if np.sqrt(rs_new) > 10.0 * (r0_norm + 1e-300):
            raise NumericalError(
                f"CG residual grew more than 10x after {iterations} iterations"
            )
        p = r + (rs_new / rs) * p
        rs = rs_new
        rel = np.sqrt(rs) / b_norm

    info = CgInfo(
        iterations=iterations,
        rel_residual=float(rel),
        converged=bool(rel <= cfg.rel_tolerance),
        objective=tuple(history) if track_objective else None,
    )
    return Image(x0.grid, x), info


def cg_x_update(
    y: Sinogram, v: Image, mu_sigma2: float, x0: Image, cfg: CgConfig = CgConfig()
) -> Image:
    """Minimize ``0.5 ||Ax - y||^2 + 0.5 mu_sigma2 ||x - v||^2`` from x0."""
    image, _ = cg_x_update_full(y, v, mu_sigma2, x0, cfg)
    return image


def _gradient(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _divergence(px, py):
    div = np.zeros_like(px)
    div[:, 0] += px[:, 0]
    div[:, 1:] += px[:, 1:] - px[:, :-1]
    div[:, -1] -= px[:, -1]
    div[0, :] += py[0, :]
    div[1:, :] += py[1:, :] - py[:-1, :]
    div[-1, :] -= py[-1, :]
    return div


def total_variation(values: np.ndarray) -> float:
    """Isotropic discrete TV with forward differences, Neumann boundary."""
    gx, gy = _gradient(np.asarray(values, dtype=np.float64))
    return float(np.sum(np.sqrt(gx * gx + gy * gy)))


def tv_denoise(noisy: Image, cfg: TvConfig) -> Image:
    """Solve the ROF problem ``min_u 0.5||u - noisy||^2 + weight * TV(u)``.

    Chambolle's dual projection with a fixed iteration budget; the input
    is returned unchanged when ``weight`` is zero.
    """
    if cfg.weight == 0.0:
        return noisy
    f = noisy.values
    lam = cfg.weight
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    for _ in range(cfg.max_iters):
        gx, gy = _gradient(_divergence(px, py) - f / lam)
        norm = 1.0 + cfg.step * np.sqrt(gx * gx + gy * gy)
        px = (px + cfg.step * gx) / norm
        py = (py + cfg.step * gy) / norm
    return Image(noisy.grid, f - lam * _divergence(px, py))


def tv_reconstruct(
    y: Sinogram,
    tv: TvConfig,
    cg: CgConfig = CgConfig(),
    outer_loops: int = 3,
    mu_sigma2_start: float = 5e3,
    coupling_growth: float = 1.4,
) -> Image:
    """TV-regularized reconstruction via half-quadratic splitting.

    Alternates the TV proximal step and the CG x-update, warm-starting
    each x-update from the previous iterate. The coupling follows a
    geometric ramp ``mu_sigma2_start * coupling_growth**n``.
    """
    if outer_loops < 1:
        raise ValidationError("outer_loops must be >= 1")
    if not (mu_sigma2_start > 0):
        raise ValidationError("mu_sigma2_start must be positive")
    grid = y.geometry.grid
    x = Image(grid, np.zeros(grid.shape))
    for n in range(outer_loops):
        v = tv_denoise(x, tv)
        x = cg_x_update(y, v, mu_sigma2_start * coupling_growth**n, x, cg)
    return x
