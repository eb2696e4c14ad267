"""SGRID raster files and SVG quicklook rendering.

SGRID layout: one ASCII header line ``SGRID 1 <width> <height> <dx> <dy>
<nodata>`` ended by ``\\n``, then ``width*height`` little-endian float32
values, row-major, top row first.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .raster import Raster

MAGIC = b"SGRID"
VERSION = 1
_MAX_HEADER = 4096


class SGRIDError(ValueError):
    """Malformed SGRID file; ``offset`` is the byte position of the problem."""

    def __init__(self, msg, offset):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


def _fmt(x: float) -> str:
    return repr(float(x))


def write_sgrid(raster: Raster, path):
    """Write ``raster`` as SGRID. Values are stored as float32."""
    header = f"SGRID {VERSION} {raster.width} {raster.height} {_fmt(raster.dx)} {_fmt(raster.dy)} {_fmt(raster.nodata)}\n"
    payload = np.ascontiguousarray(raster.values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)


def read_sgrid(path) -> Raster:
    data = Path(path).read_bytes()
    return parse_sgrid(data)


def parse_sgrid(data: bytes) -> Raster:
    if not data.startswith(MAGIC + b" "):
        raise SGRIDError("bad magic, expected 'SGRID '", 0)
    end = data.find(b"\n", 0, _MAX_HEADER)
    if end < 0:
        raise SGRIDError("header line not terminated", min(len(data), _MAX_HEADER))
    fields = data[:end].decode("ascii", errors="replace").split(" ")
    if len(fields) != 7:
        raise SGRIDError(f"header has {len(fields)} fields, expected 7", 0)
    offsets = np.cumsum([0] + [len(f) + 1 for f in fields[:-1]])
    try:
        version = int(fields[1])
    except ValueError:
        raise SGRIDError(f"bad version {fields[1]!r}", int(offsets[1])) from None
    if version != VERSION:
        raise SGRIDError(f"unsupported SGRID version {version}", int(offsets[1]))
    parsed = []
    for k, conv in zip(range(2, 7), (int, int, float, float, float)):
        try:
            parsed.append(conv(fields[k]))
        except ValueError:
            raise SGRIDError(f"bad header field {fields[k]!r}", int(offsets[k])) from None
    width, height, dx, dy, nodata = parsed
    if width <= 0 or height <= 0:
        raise SGRIDError(f"non-positive dimensions {width}x{height}", int(offsets[2]))
    start = end + 1
    expected = width * height * 4
    got = len(data) - start
    if got != expected:
        raise SGRIDError(
            f"payload is {got} bytes but header declares {width}x{height} float32 = {expected} bytes", start
        )
    values = np.frombuffer(data, dtype="<f4", offset=start).reshape(height, width)
    try:
        return Raster(values.astype(np.float64), dx, dy, nodata)
    except ValueError as exc:
        raise SGRIDError(str(exc), int(offsets[4])) from None


# -- quicklooks ----------------------------------------------------------------

COLOR_RAMPS = {
    # diverging: negative (subsidence) red, positive blue
    "rdbu": ["#b2182b", "#ef8a62", "#fddbc7", "#f7f7f7", "#d1e5f0", "#67a9cf", "#2166ac"],
    "viridis": ["#440154", "#3b528b", "#21918c", "#5ec962", "#fde725"],
    "gray": ["#000000", "#ffffff"],
}


def _hex_to_rgb(h):
    return tuple(int(h[i:i + 2], 16) for i in (1, 3, 5))


def ramp_color(t: float, ramp="rdbu") -> str:
    """Color at fraction ``t`` in [0, 1] along a piecewise-linear ramp."""
    stops = [_hex_to_rgb(c) for c in COLOR_RAMPS[ramp]]
    t = min(1.0, max(0.0, t)) * (len(stops) - 1)
    i = min(int(t), len(stops) - 2)
    f = t - i
    rgb = [round(a + (b - a) * f) for a, b in zip(stops[i], stops[i + 1])]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _block_reduce(values, block):
    h, w = values.shape
    H, W = math.ceil(h / block), math.ceil(w / block)
    padded = np.full((H * block, W * block), np.nan)
    padded[:h, :w] = values
    blocks = padded.reshape(H, block, W, block)
    valid = ~np.isnan(blocks)
    count = valid.sum(axis=(1, 3))
    total = np.where(valid, blocks, 0.0).sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / count, np.nan)


def render_quicklook(raster: Raster, path, color_ramp="rdbu", vmin=None, vmax=None, units="mm/yr",
                     title=None, max_cells=512):
    """Render ``raster`` to an SVG map with a color legend.

    One ``rect`` per pixel, or per block-averaged cell when either side
    exceeds ``max_cells``. Nodata pixels are transparent.
    """
    if color_ramp not in COLOR_RAMPS:
        raise ValueError(f"unknown color ramp {color_ramp!r}; choose from {sorted(COLOR_RAMPS)}")
    values = raster.to_masked()
    block = max(1, math.ceil(max(values.shape) / max_cells))
    if block > 1:
        values = _block_reduce(values, block)
    finite = values[~np.isnan(values)]
    if vmin is None:
        vmin = finite.min() if finite.size else 0.0
    if vmax is None:
        vmax = finite.max() if finite.size else 0.0
    lo, hi = float(vmin), float(vmax)
    h, w = values.shape
    cell = max(1, 512 // max(h, w))
    map_w, map_h = w * cell, h * cell
    legend_w = 110
    width, height = map_w + legend_w + 20, max(map_h, 220) + 40

    def color(v):
        t = 0.5 if hi == lo else (v - lo) / (hi - lo)
        return ramp_color(t, color_ramp)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
    ]
    if title:
        parts.append(f'<text x="10" y="16" font-size="13">{title}</text>')
    parts.append(f'<g class="map" transform="translate(10,26)" shape-rendering="crispEdges">')
    for i in range(h):
        row = values[i]
        for j in range(w):
            v = row[j]
            if np.isnan(v):
                parts.append(f'<rect class="nodata" x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" fill="none"/>')
            else:
                parts.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" fill="{color(v)}"/>')
    parts.append("</g>")

    lx, ly, bar_h = map_w + 30, 40, 160
    parts.append(f'<g class="legend" transform="translate({lx},{ly})">')
    parts.append('<defs><linearGradient id="ramp" x1="0" y1="1" x2="0" y2="0">')
    n_stops = len(COLOR_RAMPS[color_ramp])
    for k, c in enumerate(COLOR_RAMPS[color_ramp]):
        parts.append(f'<stop offset="{k / (n_stops - 1):.3f}" stop-color="{c}"/>')
    parts.append("</linearGradient></defs>")
    if hi == lo:
        parts.append(f'<rect width="20" height="{bar_h}" fill="{color(lo)}"/>')
    else:
        parts.append(f'<rect width="20" height="{bar_h}" fill="url(#ramp)"/>')
    parts.append(f'<text class="legend-max" x="26" y="10" font-size="11">{hi:.2f}</text>')
    parts.append(f'<text class="legend-min" x="26" y="{bar_h}" font-size="11">{lo:.2f}</text>')
    parts.append(f'<text class="legend-units" x="0" y="{bar_h + 20}" font-size="11">{units}</text>')
    parts.append("</g></svg>")
    Path(path).write_text("\n".join(parts) + "\n")
