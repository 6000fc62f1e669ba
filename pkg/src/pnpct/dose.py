"""Low-dose acquisition model: Poisson statistics on transmission counts.

For a clean line integral ``l`` the expected photon count behind the
object is ``i0_full * dose_fraction * exp(-l)``; a Poisson draw of that
mean, clamped below at ``count_floor`` so the log stays finite, is
re-logged into the output integral.

Randomness is counter-based (Philox): the stream for each view is keyed
by ``(seed, view)``, so simulation is reproducible bit for bit and views
may be simulated in any order or in parallel.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import Sinogram

__all__ = ["NoiseModel", "DoseStats", "simulate_low_dose", "simulate_low_dose_with_stats"]


@dataclass(frozen=True)
class NoiseModel:
    """Dose and detector statistics for :func:`simulate_low_dose`.

    Parameters
    ----------
    i0_full : float
        Unattenuated photons per detector bin at full dose.
    dose_fraction : float
        Tube-output fraction in (0, 1]; 0.1 models a 10% low-dose scan.
    seed : int
        64-bit reproducibility seed.
    count_floor : float
        Lower clamp on detected counts, preventing log(0) in
        photon-starved bins.
    """

    i0_full: float
    dose_fraction: float
    seed: int = 0
    count_floor: float = 1.0

    def __post_init__(self):
        if not (self.i0_full > 0 and np.isfinite(self.i0_full)):
            raise ValidationError("i0_full must be positive and finite")
        if not (0.0 < self.dose_fraction <= 1.0):
            raise ValidationError("dose_fraction must be in (0, 1]")
        if not (self.count_floor > 0):
            raise ValidationError("count_floor must be positive")


@dataclass(frozen=True)
class DoseStats:
    """Bookkeeping from one simulation run."""

    negative_inputs_clamped: int
    starved_bins: int


def _view_stream(seed: int, view: int) -> np.random.Generator:
    # Views are spaced 2**128 apart in Philox counter space, so their
    # streams never overlap regardless of row length.
    return np.random.Generator(
        np.random.Philox(key=np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF),
                         counter=int(view) << 128)
    )


def simulate_low_dose_with_stats(clean: Sinogram, model: NoiseModel):
    """Like :func:`simulate_low_dose`, but also returns clamp counters."""
    i0_eff = model.i0_full * model.dose_fraction
    integrals = np.asarray(clean.values)
    negatives = int(np.count_nonzero(integrals < 0))
    integrals = np.maximum(integrals, 0.0)

    counts = np.empty_like(integrals)
    for vi in range(clean.geometry.n_views):
        rng = _view_stream(model.seed, vi)
        lam = i0_eff * np.exp(-integrals[vi])
        counts[vi] = rng.poisson(lam)
    starved = int(np.count_nonzero(counts < model.count_floor))
    counts = np.maximum(counts, model.count_floor)
    noisy = -np.log(counts / i0_eff)
    return Sinogram(clean.geometry, noisy), DoseStats(negatives, starved)


def simulate_low_dose(clean: Sinogram, model: NoiseModel) -> Sinogram:
    """Simulate a reduced-dose acquisition of a clean sinogram.

    Negative input integrals are clamped to zero before sampling (counted
    in the stats variant). Output is deterministic for a fixed seed.
    """
    noisy, _ = simulate_low_dose_with_stats(clean, model)
    return noisy
