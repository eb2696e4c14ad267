"""Flat ``key = value`` pipeline configuration.

Keys are prefixed with the stage they configure, e.g.::

    # demo scene
    scene.peak_mm_yr = -13.5
    network.pairs = builtin:table2_pairs.csv
    correlate.probe.78 = 60,64

Relative paths resolve against the config file's directory; the
``builtin:`` prefix points into the package's data directory.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .network import NetworkThresholds
from .raster import SensorConstants


class ConfigError(ValueError):
    exit_code = 2


def data_path(name: str) -> Path:
    return Path(str(resources.files("sbas") / "data" / name))


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _xy(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'x,y', got {text!r}")
    return int(parts[0]), int(parts[1])


def _xy_float(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'x,y', got {text!r}")
    return float(parts[0]), float(parts[1])


@dataclass
class PipelineConfig:
    # scene
    width: int = 128
    height: int = 128
    peak_mm_yr: float = -13.5
    center: Optional[tuple] = None  # (x, y); grid centre when unset
    sigma_px: float = 16.0
    dem_error_m: float = 0.0
    dem_center: Optional[tuple] = None
    dem_sigma_px: float = 4.0
    noise_sigma: float = 0.0
    atm_sigma: float = 0.0
    atm_length_px: float = 20.0
    seed: int = 42
    sensor: SensorConstants = field(default_factory=SensorConstants)
    # network
    pairs: Optional[Path] = None
    acquisitions: Optional[Path] = None
    thresholds: NetworkThresholds = field(default_factory=NetworkThresholds)
    # unwrap
    unwrap_method: str = "auto"
    coh_threshold: float = 0.3
    cg_tol: float = 1e-8
    cg_max_iter: int = 10_000
    # invert
    with_topo: bool = False
    allow_disconnected: bool = False
    ref_pixel: Optional[tuple] = None  # (x, y)
    rcond: float = 1e-10
    # correlate
    production: Optional[Path] = None
    max_lag: int = 2
    probes: dict = field(default_factory=dict)  # well id -> (x, y)
    # run
    out_dir: Path = Path("sbas_out")
    threads: int = 1

    def validate(self):
        """Check ranges and referenced files; raises ConfigError."""
        problems = []
        if self.width < 2 or self.height < 2:
            problems.append(f"scene size must be at least 2x2, got {self.width}x{self.height}")
        for name in ("sigma_px", "dem_sigma_px", "atm_length_px"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        for name in ("noise_sigma", "atm_sigma"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0")
        if self.unwrap_method not in ("auto", "itoh", "ls"):
            problems.append(f"unwrap.method must be auto, itoh or ls, got {self.unwrap_method!r}")
        if not 0 <= self.coh_threshold <= 1:
            problems.append("unwrap.coh_threshold must be in [0, 1]")
        if self.max_lag < 0:
            problems.append("correlate.max_lag must be >= 0")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        for label, (x, y) in list(self.probes.items()) + ([("ref_pixel", self.ref_pixel)] if self.ref_pixel else []):
            if not (0 <= x < self.width and 0 <= y < self.height):
                problems.append(f"{label} pixel {(x, y)} outside the {self.width}x{self.height} scene")
        for name in ("pairs", "acquisitions", "production"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                problems.append(f"{name} file not found: {p}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def pair_source(self) -> Optional[Path]:
        if self.pairs is None and self.acquisitions is None:
            return data_path("table2_pairs.csv")
        return self.pairs

    def production_source(self) -> Path:
        return self.production if self.production is not None else data_path("production_synthetic.csv")

    def resolved_probes(self) -> dict:
        if self.probes:
            return dict(self.probes)
        cx = int(self.center[0]) if self.center else self.width // 2
        cy = int(self.center[1]) if self.center else self.height // 2
        return {"78": (cx - 4, cy), "166": (cx + 6, cy - 6)}

    def describe(self) -> dict:
        """JSON-friendly view of the settings that determine pipeline outputs."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name in ("out_dir", "threads"):
                continue
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
            elif isinstance(v, Path):
                v = v.name
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


_SENSOR_KEYS = {"sensor.wavelength_m": "wavelength", "sensor.slant_range_m": "slant_range",
                "sensor.incidence_deg": "incidence"}
_THRESHOLD_KEYS = {"network.max_bperp_m": "max_bperp", "network.max_btemp_days": "max_btemp",
                   "network.max_doppler_hz": "max_doppler"}
_KEYS = {
    "scene.width": ("width", int),
    "scene.height": ("height", int),
    "scene.peak_mm_yr": ("peak_mm_yr", float),
    "scene.center": ("center", _xy_float),
    "scene.sigma_px": ("sigma_px", float),
    "scene.dem_error_m": ("dem_error_m", float),
    "scene.dem_center": ("dem_center", _xy_float),
    "scene.dem_sigma_px": ("dem_sigma_px", float),
    "scene.noise_sigma": ("noise_sigma", float),
    "scene.atm_sigma": ("atm_sigma", float),
    "scene.atm_length_px": ("atm_length_px", float),
    "scene.seed": ("seed", int),
    "network.pairs": ("pairs", "path"),
    "network.acquisitions": ("acquisitions", "path"),
    "unwrap.method": ("unwrap_method", str),
    "unwrap.coh_threshold": ("coh_threshold", float),
    "unwrap.cg_tol": ("cg_tol", float),
    "unwrap.cg_max_iter": ("cg_max_iter", int),
    "invert.with_topo": ("with_topo", _bool),
    "invert.allow_disconnected": ("allow_disconnected", _bool),
    "invert.ref_pixel": ("ref_pixel", _xy),
    "invert.rcond": ("rcond", float),
    "correlate.production": ("production", "path"),
    "correlate.max_lag": ("max_lag", int),
    "output.dir": ("out_dir", "path"),
    "run.threads": ("threads", int),
}


def parse_config_text(text: str, source="<config>") -> dict:
    """Parse ``key = value`` lines into a dict; later keys override earlier ones."""
    entries = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{n}: empty key")
        entries[key] = value
    return entries


def _resolve_path(value, base: Path) -> Path:
    if value.startswith("builtin:"):
        return data_path(value[len("builtin:"):])
    p = Path(value).expanduser()
    return p if p.is_absolute() else base / p


def config_from_mapping(entries: dict, base_dir=".") -> PipelineConfig:
    base = Path(base_dir)
    cfg = PipelineConfig()
    sensor, thresholds = {}, {}
    for key, value in entries.items():
        try:
            if key in _SENSOR_KEYS:
                sensor[_SENSOR_KEYS[key]] = float(value)
            elif key in _THRESHOLD_KEYS:
                thresholds[_THRESHOLD_KEYS[key]] = float(value)
            elif key.startswith("correlate.probe."):
                cfg.probes[key[len("correlate.probe."):]] = _xy(value)
            elif key in _KEYS:
                attr, conv = _KEYS[key]
                setattr(cfg, attr, _resolve_path(value, base) if conv == "path" else conv(value))
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    try:
        cfg.sensor = SensorConstants(**sensor)
        cfg.thresholds = NetworkThresholds(**thresholds)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path, overrides: Optional[dict] = None) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    entries = parse_config_text(text, str(path))
    entries.update(overrides or {})
    return config_from_mapping(entries, path.parent)
