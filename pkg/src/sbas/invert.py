"""Per-pixel small-baseline time-series inversion.

Unknowns are the mean LOS velocities of the N-1 intervals between
consecutive epochs (optionally plus a DEM error). Each interferogram
observes the sum of interval velocities times interval durations over
its [master, slave) span. The system is solved per pixel by truncated SVD,
giving the minimum-norm solution when the network is disconnected.
"""
from __future__ import annotations

import datetime as dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_array, check_pixel
from .network import PairSpec, connected_components, format_date
from .raster import Raster, SensorConstants
from .scene_sim import DAYS_PER_YEAR
from .unwrap import reference_pixel

DEFAULT_RCOND = 1e-10
_CHUNK_ROWS = 32


class DisconnectedNetworkError(ValueError):
    """The pair network splits the epochs into several components."""

    def __init__(self, groups):
        self.groups = groups
        desc = "; ".join("[" + ", ".join(format_date(d) for d in g) + "]" for g in groups)
        super().__init__(f"network has {len(groups)} connected components: {desc}. "
                         "Pass allow_disconnected=True to accept the minimum-norm bridge.")


@dataclass(frozen=True)
class DesignMatrix:
    """SBAS system matrix.

    ``matrix[m, k]`` is the duration in years of interval k if it lies in
    pair m's span. With ``with_topo`` an extra last column holds the
    topographic phase per meter of DEM error, ``4*pi/lambda * B/(R sin(theta))``.
    """

    matrix: np.ndarray
    interval_years: np.ndarray
    with_topo: bool = False

    @property
    def n_intervals(self) -> int:
        return self.interval_years.size

    @property
    def shape(self):
        return self.matrix.shape

    def rank(self, rcond=DEFAULT_RCOND) -> int:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > rcond * s.max())) if s.size and s.max() > 0 else 0


@dataclass(frozen=True)
class TimeSeriesSolution:
    """Output of :func:`invert_stack`.

    Arrays are ``(height, width)`` rasters or ``(n, height, width)``
    stacks; invalid pixels are NaN. Displacement is in mm relative to the
    first epoch, velocities in mm/yr, DEM error in m, residual RMS in rad.
    """

    epochs: tuple
    displacement: np.ndarray
    mean_velocity: np.ndarray
    interval_velocity: np.ndarray
    residual_rms: np.ndarray
    dem_error: Optional[np.ndarray] = None
    ref_pixel: tuple = (0, 0)
    n_components: int = 1

    def displacement_rasters(self, dx=1.0, dy=1.0) -> list[Raster]:
        return [Raster.from_array(d, dx, dy) for d in self.displacement]

    def velocity_raster(self, dx=1.0, dy=1.0) -> Raster:
        return Raster.from_array(self.mean_velocity, dx, dy)

    def probe(self, pixel) -> np.ndarray:
        """Displacement time series (mm) at ``(row, col)``."""
        row, col = check_pixel(pixel, self.mean_velocity.shape)
        return self.displacement[:, row, col].copy()


def epoch_years(epochs) -> np.ndarray:
    """Times in years since the first epoch. Dates or numeric years accepted."""
    epochs = list(epochs)
    if epochs and isinstance(epochs[0], dt.date):
        return np.array([(d - epochs[0]).days / DAYS_PER_YEAR for d in epochs])
    t = np.asarray(epochs, dtype=float)
    return t - t[0] if t.size else t


def _check_epochs(epochs):
    t = epoch_years(epochs)
    if t.size < 2:
        raise ValueError(f"need at least 2 epochs, got {t.size}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("epochs must be strictly increasing")
    return t


def build_design_matrix(pairs: Sequence[PairSpec], epochs, with_topo=False,
                        sensor: Optional[SensorConstants] = None) -> DesignMatrix:
    t = _check_epochs(epochs)
    n = t.size
    dt_years = np.diff(t)
    sensor = sensor or SensorConstants()
    B = np.zeros((len(pairs), n - 1 + int(with_topo)))
    for m, p in enumerate(pairs):
        if not (0 <= p.master_idx < n and 0 <= p.slave_idx < n):
            raise ValueError(f"pair {m} ({p.master_idx}, {p.slave_idx}) references an unknown epoch")
        if p.master_idx >= p.slave_idx:
            raise ValueError(f"pair {m} master epoch is not before its slave epoch")
        B[m, p.master_idx:p.slave_idx] = dt_years[p.master_idx:p.slave_idx]
        if with_topo:
            B[m, -1] = sensor.topo_phase_per_meter(p.bperp)
    return DesignMatrix(B, dt_years, with_topo)


def phase_to_mm(phase, sensor: SensorConstants):
    """LOS displacement (mm, toward satellite positive) from phase (rad)."""
    return -np.asarray(phase) * (1000.0 / sensor.phase_per_meter)


def _displacement_system(B: DesignMatrix, sensor: SensorConstants) -> np.ndarray:
    """Design matrix in mm units: the DEM column becomes mm of LOS per m."""
    G = B.matrix.copy()
    if B.with_topo:
        G[:, -1] = phase_to_mm(G[:, -1], sensor)
    return G


class _SVDSolver:
    """Truncated-SVD pseudo-inverse of a fixed system matrix."""

    def __init__(self, G, rcond=DEFAULT_RCOND):
        U, s, Vt = np.linalg.svd(G, full_matrices=False)
        keep = s > rcond * s.max() if s.size and s.max() > 0 else np.zeros(s.shape, bool)
        self.G = G
        self.rank = int(keep.sum())
        self.pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T

    def solve(self, Y):
        """Minimum-norm solutions for the columns of ``Y``; returns (X, residual rms)."""
        X = self.pinv @ Y
        r = self.G @ X - Y
        return X, np.sqrt(np.mean(r * r, axis=0))


def solve_pixel(B: DesignMatrix, obs, sensor: Optional[SensorConstants] = None, rcond=DEFAULT_RCOND):
    """Invert one pixel's interferogram phases.

    Returns ``(interval_velocities_mm_yr, dem_error_m, residual_rms_rad)``;
    the DEM error is None when ``B`` has no topographic column. NaN
    observations are dropped; if all are NaN every output is NaN.
    """
    sensor = sensor or SensorConstants()
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (B.shape[0],):
        raise ValueError(f"expected {B.shape[0]} observations, got shape {obs.shape}")
    valid = ~np.isnan(obs)
    if not valid.any():
        v = np.full(B.n_intervals, np.nan)
        return v, (math.nan if B.with_topo else None), math.nan
    G = _displacement_system(B, sensor)[valid]
    x, rms = _SVDSolver(G, rcond).solve(phase_to_mm(obs[valid], sensor)[:, None])
    x = x[:, 0]
    rms_rad = float(rms[0]) * sensor.phase_per_meter / 1000.0
    if B.with_topo:
        return x[:-1], float(x[-1]), rms_rad
    return x, None, rms_rad


def integrate_displacement(interval_velocities, epochs) -> np.ndarray:
    """Cumulative displacement, zero at the first epoch.

    ``interval_velocities`` has N-1 leading entries (any trailing shape);
    ``epochs`` are dates or times in years.
    """
    v = np.asarray(interval_velocities, dtype=float)
    t = epoch_years(epochs)
    if v.shape[0] != t.size - 1:
        raise ValueError(f"{v.shape[0]} interval velocities for {t.size} epochs")
    steps = v * np.diff(t).reshape((-1,) + (1,) * (v.ndim - 1))
    zero = np.zeros((1,) + v.shape[1:])
    return np.concatenate([zero, np.cumsum(steps, axis=0)])


def fit_mean_velocity(displacement, epochs):
    """Least-squares slope (mm/yr) of displacement against time in years.

    Works on a single series or a ``(n, ...)`` stack; NaN samples are
    ignored and fewer than two valid samples give NaN.
    """
    d = np.asarray(displacement, dtype=float)
    t = epoch_years(epochs)
    if d.shape[0] != t.size:
        raise ValueError(f"{d.shape[0]} displacement samples for {t.size} epochs")
    t = t.reshape((-1,) + (1,) * (d.ndim - 1))
    valid = ~np.isnan(d)
    n = valid.sum(axis=0)
    tv = np.where(valid, t, 0.0)
    dv = np.where(valid, d, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        tm = tv.sum(axis=0) / n
        dm = dv.sum(axis=0) / n
        tc = np.where(valid, t - tm, 0.0)
        sxx = (tc * tc).sum(axis=0)
        slope = (tc * (dv - np.where(valid, dm, 0.0))).sum(axis=0) / sxx
    slope = np.where((n >= 2) & (sxx > 0), slope, np.nan)
    return float(slope) if np.ndim(slope) == 0 else slope


def _component_groups(pairs, epochs):
    n_comp, labels = connected_components(pairs, len(epochs))
    return n_comp, [[epochs[i] for i in np.flatnonzero(labels == c)] for c in range(n_comp)]


def invert_stack(stack, pairs: Sequence[PairSpec], epochs, with_topo=False, sensor=None,
                 allow_disconnected=False, ref_pixel=None, coherence=None, rcond=DEFAULT_RCOND,
                 threads=1) -> TimeSeriesSolution:
    """Invert a stack of unwrapped interferograms (radians) pixel by pixel.

    ``stack`` is ``(n_pairs, height, width)`` (or a list of rasters) in the
    order of ``pairs``. Every interferogram is first referenced to
    ``ref_pixel`` (``(row, col)``); by default that is the pixel of highest
    mean coherence, or the origin when no coherence is given.
    """
    sensor = sensor or SensorConstants()
    if isinstance(stack, (list, tuple)):
        stack = np.stack([as_array(s, "stack", ndim=2, allow_nan=True) for s in stack])
    phase = as_array(stack, "stack", ndim=3, allow_nan=True)
    if phase.shape[0] != len(pairs):
        raise ValueError(f"stack has {phase.shape[0]} interferograms for {len(pairs)} pairs")
    epochs = tuple(epochs)
    _check_epochs(epochs)
    n_comp, groups = _component_groups(pairs, epochs)
    if n_comp > 1 and not allow_disconnected:
        raise DisconnectedNetworkError(groups)

    _, h, w = phase.shape
    if ref_pixel is None:
        ref = (0, 0) if coherence is None else reference_pixel(coherence)
    else:
        ref = check_pixel(ref_pixel, (h, w))
    ref_values = phase[:, ref[0], ref[1]]
    if np.isnan(ref_values).any():
        raise ValueError(f"reference pixel {ref} has no valid phase in every interferogram")
    obs = phase_to_mm(phase - ref_values[:, None, None], sensor).reshape(len(pairs), -1)

    B = build_design_matrix(pairs, epochs, with_topo, sensor)
    G = _displacement_system(B, sensor)
    solver = _SVDSolver(G, rcond)
    n_unknowns = G.shape[1]
    X = np.full((n_unknowns, h * w), np.nan)
    rms = np.full(h * w, np.nan)
    complete = ~np.isnan(obs).any(axis=0)

    # fixed chunking keeps floating-point results independent of thread count
    chunk = _CHUNK_ROWS * w
    starts = range(0, h * w, chunk)

    def run(start):
        sl = slice(start, min(start + chunk, h * w))
        cols = np.flatnonzero(complete[sl]) + start
        if cols.size:
            X[:, cols], rms[cols] = solver.solve(obs[:, cols])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)

    for col in np.flatnonzero(~complete):
        valid = ~np.isnan(obs[:, col])
        if not valid.any():
            continue
        x, r = _SVDSolver(G[valid], rcond).solve(obs[valid, col][:, None])
        X[:, col], rms[col] = x[:, 0], r[0]

    X = X.reshape(n_unknowns, h, w)
    interval_v = X[:B.n_intervals]
    dem = X[-1] if with_topo else None
    displacement = integrate_displacement(interval_v, epochs)
    mean_v = fit_mean_velocity(displacement, epochs)
    return TimeSeriesSolution(
        epochs=epochs,
        displacement=displacement,
        mean_velocity=mean_v,
        interval_velocity=interval_v,
        residual_rms=rms.reshape(h, w) * sensor.phase_per_meter / 1000.0,
        dem_error=dem,
        ref_pixel=ref,
        n_components=n_comp,
    )


class SBASInversion(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`invert_stack`.

    ``fit(X, pairs=..., epochs=...)`` inverts the unwrapped stack ``X`` and
    stores the results as fitted attributes. ``transform`` maps another
    stack over the same network to cumulative displacement using the
    fitted reference pixel.

    Attributes
    ----------
    solution_ : TimeSeriesSolution
    mean_velocity_ : ndarray (height, width), mm/yr
    displacement_ : ndarray (n_epochs, height, width), mm
    dem_error_ : ndarray or None
    ref_pixel_ : tuple (row, col)
    """

    def __init__(self, with_topo=False, allow_disconnected=False, ref_pixel=None, rcond=DEFAULT_RCOND,
                 wavelength=0.05624, slant_range=850_000.0, incidence=23.0, n_jobs=1):
        self.with_topo = with_topo
        self.allow_disconnected = allow_disconnected
        self.ref_pixel = ref_pixel
        self.rcond = rcond
        self.wavelength = wavelength
        self.slant_range = slant_range
        self.incidence = incidence
        self.n_jobs = n_jobs

    @property
    def sensor(self) -> SensorConstants:
        return SensorConstants(self.wavelength, self.slant_range, self.incidence)

    def fit(self, X, y=None, *, pairs, epochs, coherence=None):
        sol = invert_stack(X, pairs, epochs, with_topo=self.with_topo, sensor=self.sensor,
                           allow_disconnected=self.allow_disconnected, ref_pixel=self.ref_pixel,
                           coherence=coherence, rcond=self.rcond, threads=self.n_jobs)
        self.pairs_ = list(pairs)
        self.solution_ = sol
        self.mean_velocity_ = sol.mean_velocity
        self.displacement_ = sol.displacement
        self.interval_velocity_ = sol.interval_velocity
        self.dem_error_ = sol.dem_error
        self.residual_rms_ = sol.residual_rms
        self.ref_pixel_ = sol.ref_pixel
        self.n_components_ = sol.n_components
        return self

    def transform(self, X):
        check_is_fitted(self, "solution_")
        sol = invert_stack(X, self.pairs_, self.solution_.epochs, with_topo=self.with_topo,
                           sensor=self.sensor, allow_disconnected=self.allow_disconnected,
                           ref_pixel=self.ref_pixel_, rcond=self.rcond, threads=self.n_jobs)
        return sol.displacement

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y, **fit_params).displacement_
