"""Input validation helpers shared by the estimators and functions."""
from __future__ import annotations

import numpy as np

from .raster import Raster


def as_array(x, name="X", ndim=None, allow_nan=False) -> np.ndarray:
    """Return ``x`` as a float64 array, unwrapping :class:`Raster` inputs.

    Raster nodata pixels become NaN. Raises ``ValueError`` on wrong
    dimensionality or (unless ``allow_nan``) non-finite values.
    """
    if isinstance(x, Raster):
        arr = x.to_masked()
    else:
        arr = np.asarray(x, dtype=np.float64)
    if ndim is not None:
        dims = (ndim,) if isinstance(ndim, int) else tuple(ndim)
        if arr.ndim not in dims:
            raise ValueError(f"{name} must have ndim in {dims}, got shape {arr.shape}")
    if allow_nan:
        if np.isinf(arr).any():
            raise ValueError(f"{name} contains infinite values")
    elif not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(*arrays, names=None):
    shapes = [np.shape(a) for a in arrays]
    if len(set(shapes)) > 1:
        label = ", ".join(names) if names else "inputs"
        raise ValueError(f"shape mismatch between {label}: {shapes}")


def check_pixel(pixel, shape) -> tuple[int, int]:
    """Validate a ``(row, col)`` index against a 2-D ``shape``."""
    row, col = (int(p) for p in pixel)
    if not (0 <= row < shape[0] and 0 <= col < shape[1]):
        raise ValueError(f"pixel {(row, col)} outside raster of shape {shape}")
    return row, col


def like_input(template, values):
    """Wrap ``values`` as a Raster if ``template`` was one."""
    if isinstance(template, Raster):
        return template.with_values(values)
    return values
