"""Synthetic wrapped interferograms from a known deformation truth.

The forward model per pixel is::

    phase = wrap(defo + topo + atm[slave] - atm[master] + noise)

with LOS displacement positive toward the satellite, so subsidence
(negative velocity) produces positive deformation phase.
"""
from __future__ import annotations

import datetime as dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .network import PairSpec
from .raster import Raster, SensorConstants

DAYS_PER_YEAR = 365.25
TWO_PI = 2.0 * math.pi


def wrap(phase):
    """Principal value of ``phase`` in (-pi, pi]; -pi maps to +pi.

    Accepts scalars or arrays (returned as float or ndarray respectively).
    """
    arr = np.asarray(phase, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("wrap() requires finite input")
    out = arr - TWO_PI * np.ceil((arr - math.pi) / TWO_PI)
    # float rounding can land a hair outside the half-open interval
    out = np.where(out <= -math.pi, out + TWO_PI, out)
    out = np.where(out > math.pi, out - TWO_PI, out)
    if out.ndim == 0:
        return float(out)
    return out


def make_velocity_bowl(peak, center, sigma, shape, dx=1.0, dy=1.0) -> Raster:
    """Gaussian subsidence/uplift bowl.

    ``center`` is ``(x, y)`` in pixel coordinates (column, row); ``shape``
    is ``(height, width)``.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    height, width = shape
    cx, cy = center
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    r2 = (x - cx) ** 2 + (y - cy) ** 2
    return Raster(peak * np.exp(-r2 / (2.0 * sigma**2)), dx, dy)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def make_atmosphere(shape, correlation_length, sigma, seed, dx=1.0, dy=1.0) -> Raster:
    """Smooth zero-mean random phase screen with sample std ``sigma``.

    White noise is smoothed by a Gaussian kernel whose standard deviation is
    ``correlation_length`` pixels, then shifted and rescaled. ``seed`` may
    be an int or a sequence of ints.
    """
    if not correlation_length > 0:
        raise ValueError(f"correlation_length must be > 0, got {correlation_length}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return Raster(np.zeros(shape), dx, dy)
    white = _rng(seed).standard_normal(shape)
    smooth = ndimage.gaussian_filter(white, correlation_length, mode="wrap")
    smooth -= smooth.mean()
    std = smooth.std()
    if std == 0:
        return Raster(np.zeros(shape), dx, dy)
    return Raster(smooth * (sigma / std), dx, dy)


@dataclass(frozen=True)
class SceneTruth:
    """Ground truth of a simulated scene.

    ``atmosphere`` maps epoch date to a phase screen in radians; epochs
    missing from the mapping have no atmospheric delay.
    """

    velocity: Raster
    dem_error: Raster
    atmosphere: dict = field(default_factory=dict)
    noise_sigma: float = 0.0
    sensor: SensorConstants = field(default_factory=SensorConstants)
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        shapes = {self.velocity.shape, self.dem_error.shape}
        shapes.update(r.shape for r in self.atmosphere.values())
        if len(shapes) != 1:
            raise ValueError(f"scene rasters have mismatched dimensions: {sorted(shapes)}")

    @property
    def shape(self):
        return self.velocity.shape


@dataclass(frozen=True)
class WrappedInterferogram:
    pair: PairSpec
    phase: Raster
    coherence: Raster
    dates: tuple = ()


def make_scene(shape, epochs: Sequence[dt.date], peak=-13.5, center=None, sigma=16.0,
               dem_error=None, atm_sigma=0.0, atm_length=20.0, noise_sigma=0.0,
               sensor: Optional[SensorConstants] = None, seed=0) -> SceneTruth:
    """Convenience constructor: velocity bowl, optional DEM error, atmospheres.

    ``dem_error`` may be None (zero), a scalar, or an array of ``shape``.
    Each epoch's screen is seeded from ``(seed, date ordinal)``.
    """
    height, width = shape
    if center is None:
        center = (width / 2.0, height / 2.0)
    velocity = make_velocity_bowl(peak, center, sigma, shape)
    if dem_error is None:
        dem = np.zeros(shape)
    else:
        dem = np.broadcast_to(np.asarray(dem_error, dtype=float), shape)
    atmosphere = {}
    if atm_sigma > 0:
        for d in epochs:
            atmosphere[d] = make_atmosphere(shape, atm_length, atm_sigma, (seed, 1, d.toordinal()))
    return SceneTruth(velocity, Raster(dem), atmosphere, noise_sigma, sensor or SensorConstants(), seed)


def _pair_dates(pair: PairSpec, epochs):
    try:
        master, slave = epochs[pair.master_idx], epochs[pair.slave_idx]
    except IndexError:
        raise ValueError(f"pair ({pair.master_idx}, {pair.slave_idx}) references an epoch outside "
                         f"the {len(epochs)} given") from None
    if not master < slave:
        raise ValueError(f"pair master date {master} is not before slave date {slave}")
    return master, slave


def model_phase(truth: SceneTruth, pair: PairSpec, epochs: Sequence[dt.date], noise=True) -> np.ndarray:
    """Unwrapped model phase (radians) of one pair, before wrapping."""
    master, slave = _pair_dates(pair, epochs)
    sensor = truth.sensor
    years = (slave - master).days / DAYS_PER_YEAR
    phase = -sensor.phase_per_meter * (truth.velocity.values * 1e-3) * years
    phase = phase + sensor.topo_phase_per_meter(pair.bperp) * truth.dem_error.values
    if slave in truth.atmosphere:
        phase = phase + truth.atmosphere[slave].values
    if master in truth.atmosphere:
        phase = phase - truth.atmosphere[master].values
    if noise and truth.noise_sigma > 0:
        rng = _rng((truth.seed, 2, master.toordinal(), slave.toordinal()))
        # stream position == row-major pixel index
        phase = phase + truth.noise_sigma * rng.standard_normal(phase.size).reshape(phase.shape)
    return phase


def forward_interferogram(truth: SceneTruth, pair: PairSpec, epochs: Sequence[dt.date]) -> WrappedInterferogram:
    """Simulate one wrapped interferogram and its coherence proxy."""
    master, slave = _pair_dates(pair, epochs)
    phase = wrap(model_phase(truth, pair, epochs))
    v = truth.velocity
    coherence = np.full(truth.shape, math.exp(-truth.noise_sigma**2))
    return WrappedInterferogram(pair, Raster(phase, v.dx, v.dy), Raster(coherence, v.dx, v.dy), (master, slave))


def simulate_stack(truth: SceneTruth, pairs: Sequence[PairSpec], epochs: Sequence[dt.date],
                   threads: int = 1) -> list[WrappedInterferogram]:
    """Forward-model every pair; output order follows ``pairs``."""
    if threads <= 1:
        return [forward_interferogram(truth, p, epochs) for p in pairs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: forward_interferogram(truth, p, epochs), pairs))
