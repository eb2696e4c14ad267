"""Raster container and radar sensor constants."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class SensorConstants:
    """Geometry of the radar acquisition.

    Defaults describe Envisat ASAR (C-band) with a nominal mid-swath
    slant range and incidence angle.
    """

    wavelength: float = 0.05624
    slant_range: float = 850_000.0
    incidence: float = 23.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.slant_range > 0:
            raise ValueError(f"slant_range must be > 0, got {self.slant_range}")
        if not 0 < self.incidence < 90:
            raise ValueError(f"incidence must be in (0, 90) degrees, got {self.incidence}")

    @property
    def phase_per_meter(self) -> float:
        """Two-way phase (rad) per meter of LOS path change, 4*pi/lambda."""
        return 4.0 * math.pi / self.wavelength

    def topo_phase_per_meter(self, bperp: float) -> float:
        """Phase (rad) produced by one meter of DEM error at baseline ``bperp``."""
        return self.phase_per_meter * bperp / (self.slant_range * math.sin(math.radians(self.incidence)))


@dataclass(frozen=True, eq=False)
class Raster:
    """Regular grid of real values, row-major, top row first.

    ``values`` has shape ``(height, width)``; the array is copied and
    frozen on construction.
    """

    values: np.ndarray
    dx: float = 1.0
    dy: float = 1.0
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"raster values must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("raster must contain at least one pixel")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError(f"pixel spacing must be positive, got dx={self.dx}, dy={self.dy}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid_mask(self) -> np.ndarray:
        v = self.values
        if math.isnan(self.nodata):
            return ~np.isnan(v)
        return (v != self.nodata) & ~np.isnan(v)

    def to_masked(self) -> np.ndarray:
        """Writable float64 copy with nodata pixels replaced by NaN."""
        out = np.array(self.values, dtype=np.float64)
        out[~self.valid_mask()] = np.nan
        return out

    def with_values(self, values) -> "Raster":
        """New raster on the same grid. NaN in ``values`` becomes nodata."""
        arr = np.array(values, dtype=np.float64)
        if arr.shape != self.shape:
            raise ValueError(f"shape {arr.shape} does not match raster {self.shape}")
        arr[np.isnan(arr)] = self.nodata
        return Raster(arr, self.dx, self.dy, self.nodata)

    @classmethod
    def from_array(cls, values, dx=1.0, dy=1.0, nodata=DEFAULT_NODATA) -> "Raster":
        arr = np.array(values, dtype=np.float64)
        arr[np.isnan(arr)] = nodata
        return cls(arr, dx, dy, nodata)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.dx == other.dx
            and self.dy == other.dy
            and np.array_equal(self.values, other.values, equal_nan=True)
            and (self.nodata == other.nodata or (math.isnan(self.nodata) and math.isnan(other.nodata)))
        )

    __hash__ = None
