"""End-to-end driver: simulate -> network -> unwrap -> invert -> correlate.

Every file a stage writes is registered with the :class:`Manifest`, which
is written last as ``manifest.json`` with a SHA-256 per artifact.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import correlate as corr
from .config import PipelineConfig
from .invert import invert_stack
from .io import render_quicklook, write_sgrid
from .network import (build_network, connected_components, format_date, load_acquisitions, load_pairs,
                      plot_network_svg, save_pairs)
from .raster import Raster
from .scene_sim import forward_interferogram, make_scene, make_velocity_bowl
from .unwrap import ItohUnwrapper, reference_pixel, unwrap_auto, unwrap_ls

log = logging.getLogger(__name__)

STAGES = ("simulate", "network", "unwrap", "invert", "correlate")


class StageError(RuntimeError):
    """A pipeline stage failed; ``exit_code`` is 3, or 4 for I/O failures."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = 4 if isinstance(cause, OSError) else 3
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class Manifest:
    root: Path
    artifacts: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, path, kind, stage):
        path = Path(path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        entry = {"path": path.relative_to(self.root).as_posix(), "kind": kind, "stage": stage,
                 "sha256": digest, "bytes": path.stat().st_size}
        with self._lock:
            self.artifacts.append(entry)

    def count(self, kind) -> int:
        return sum(1 for a in self.artifacts if a["kind"] == kind)

    def to_dict(self, metadata=None) -> dict:
        order = {s: i for i, s in enumerate(STAGES)}
        arts = sorted(self.artifacts, key=lambda a: (order.get(a["stage"], 99), a["path"]))
        return {"metadata": metadata or {}, "artifacts": arts}


@dataclass
class PipelineResult:
    manifest_path: Path
    manifest: dict
    solution: object = None
    reports: list = field(default_factory=list)

    def count(self, kind) -> int:
        return sum(1 for a in self.manifest["artifacts"] if a["kind"] == kind)


def _pair_tag(epochs, p):
    return f"{format_date(epochs[p.master_idx])}_{format_date(epochs[p.slave_idx])}"


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class _Run:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.manifest = Manifest(self.out)

    def stage_dir(self, stage):
        d = self.out / stage
        d.mkdir(parents=True, exist_ok=True)
        return d

    def write_raster(self, raster, stage, name, kind):
        path = self.stage_dir(stage) / name
        write_sgrid(raster, path)
        self.manifest.add(path, kind, stage)

    # -- stages ---------------------------------------------------------------

    def read_network(self):
        """Epochs and pairs, from a pair file or from acquisitions + thresholds."""
        cfg = self.cfg
        source = cfg.pair_source()
        if source is not None:
            self.epochs, self.pairs = load_pairs(source)
            self.bperp_ref = None
        else:
            acqs = sorted(load_acquisitions(cfg.acquisitions), key=lambda a: a.date)
            self.pairs = build_network(acqs, cfg.thresholds)
            self.epochs = [a.date for a in acqs]
            self.bperp_ref = [a.bperp_ref for a in acqs]
        if not self.pairs:
            raise ValueError("network has no pairs")

    def simulate(self):
        cfg = self.cfg
        # per-epoch atmospheres need the acquisition dates; failures there belong to the network stage
        try:
            self.read_network()
        except Exception as exc:
            raise StageError("network", exc) from exc
        shape = (cfg.height, cfg.width)
        dem = None
        if cfg.dem_error_m:
            center = cfg.dem_center or (cfg.width / 2.0, cfg.height / 2.0)
            dem = make_velocity_bowl(cfg.dem_error_m, center, cfg.dem_sigma_px, shape).values
        self.truth = make_scene(shape, self.epochs, peak=cfg.peak_mm_yr, center=cfg.center, sigma=cfg.sigma_px,
                                dem_error=dem, atm_sigma=cfg.atm_sigma, atm_length=cfg.atm_length_px,
                                noise_sigma=cfg.noise_sigma, sensor=cfg.sensor, seed=cfg.seed)
        self.write_raster(self.truth.velocity, "simulate", "truth_velocity.sgrid", "truth")
        self.write_raster(self.truth.dem_error, "simulate", "truth_dem_error.sgrid", "truth")
        for d, screen in sorted(self.truth.atmosphere.items()):
            self.write_raster(screen, "simulate", f"atmosphere_{format_date(d)}.sgrid", "atmosphere")

    def network(self):
        d = self.stage_dir("network")
        n_comp, _ = connected_components(self.pairs, len(self.epochs))
        log.info("network: %d pairs over %d epochs, %d component(s)", len(self.pairs), len(self.epochs), n_comp)
        save_pairs(self.pairs, self.epochs, d / "pairs.csv")
        self.manifest.add(d / "pairs.csv", "pairs", "network")
        plot_network_svg(self.epochs, self.pairs, d / "network.svg", bperp_ref=self.bperp_ref)
        self.manifest.add(d / "network.svg", "network_plot", "network")

        def form(p):
            ifg = forward_interferogram(self.truth, p, self.epochs)
            tag = _pair_tag(self.epochs, p)
            self.write_raster(ifg.phase, "network", f"ifg_{tag}.sgrid", "interferogram")
            self.write_raster(ifg.coherence, "network", f"coh_{tag}.sgrid", "coherence")
            return ifg

        self.ifgs = _map(form, self.pairs, self.cfg.threads)

    def unwrap(self):
        cfg = self.cfg
        coherence = np.stack([i.coherence.values for i in self.ifgs])
        if cfg.ref_pixel is not None:
            self.ref = (cfg.ref_pixel[1], cfg.ref_pixel[0])
        else:
            self.ref = reference_pixel(coherence)

        def run(ifg):
            if cfg.unwrap_method == "itoh":
                out = ItohUnwrapper().transform(ifg.phase.values)
                out = out - (out[self.ref] - ifg.phase.values[self.ref])
            elif cfg.unwrap_method == "ls":
                out = unwrap_ls(ifg.phase, ifg.coherence, cfg.coh_threshold, self.ref, cfg.cg_tol, cfg.cg_max_iter)
            else:
                out = unwrap_auto(ifg.phase, ifg.coherence, cfg.coh_threshold, self.ref,
                                  tol=cfg.cg_tol, max_iter=cfg.cg_max_iter)
            out = Raster.from_array(out.to_masked() if isinstance(out, Raster) else out)
            self.write_raster(out, "unwrap", f"unw_{_pair_tag(self.epochs, ifg.pair)}.sgrid", "unwrapped")
            return out

        self.unwrapped = _map(run, self.ifgs, cfg.threads)

    def invert(self):
        cfg = self.cfg
        sol = invert_stack(self.unwrapped, self.pairs, self.epochs, with_topo=cfg.with_topo, sensor=cfg.sensor,
                           allow_disconnected=cfg.allow_disconnected, ref_pixel=self.ref, rcond=cfg.rcond,
                           threads=cfg.threads)
        self.solution = sol
        for d, disp in zip(sol.epochs, sol.displacement):
            self.write_raster(Raster.from_array(disp), "invert", f"displacement_{format_date(d)}.sgrid", "displacement")
        velocity = sol.velocity_raster()
        self.write_raster(velocity, "invert", "mean_velocity.sgrid", "velocity")
        self.write_raster(Raster.from_array(sol.residual_rms), "invert", "residual_rms.sgrid", "residual")
        if sol.dem_error is not None:
            self.write_raster(Raster.from_array(sol.dem_error), "invert", "dem_error.sgrid", "dem_error")
        d = self.stage_dir("invert")
        render_quicklook(velocity, d / "mean_velocity.svg", units="mm/yr (LOS)", title="Mean LOS velocity")
        self.manifest.add(d / "mean_velocity.svg", "quicklook", "invert")
        for well, (x, y) in sorted(cfg.resolved_probes().items()):
            path = d / f"probe_{well}.csv"
            corr.save_series(sol.epochs, sol.probe((y, x)), path)
            self.manifest.add(path, "timeseries", "invert")

    def correlate(self):
        cfg = self.cfg
        records = corr.load_production(cfg.production_source())
        reports = []
        for well, (x, y) in sorted(cfg.resolved_probes().items()):
            production = corr.production_per_interval(records, self.epochs, well)
            rate = corr.displacement_rate(self.solution.probe((y, x)), self.epochs)
            reports.extend(corr.lagged_correlation(production, rate, cfg.max_lag, well))
        path = self.stage_dir("correlate") / "correlation_report.csv"
        corr.save_report(reports, path)
        self.manifest.add(path, "correlation_report", "correlate")
        self.reports = reports


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Run all stages and write ``manifest.json`` into ``cfg.out_dir``.

    Raises :class:`StageError` naming the failing stage.
    """
    cfg.validate()
    run = _Run(cfg)
    try:
        run.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StageError("setup", exc) from exc
    for stage in STAGES:
        log.info("stage %s", stage)
        try:
            getattr(run, stage)()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, exc) from exc

    metadata = {
        "sensor": {"wavelength_m": cfg.sensor.wavelength, "slant_range_m": cfg.sensor.slant_range,
                   "incidence_deg": cfg.sensor.incidence},
        "los_convention": "positive toward satellite",
        "reference_pixel_xy": [run.ref[1], run.ref[0]],
        "epochs": [format_date(d) for d in run.epochs],
        "config": cfg.describe(),
    }
    manifest = run.manifest.to_dict(metadata)
    path = run.out / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise StageError("manifest", exc) from exc
    return PipelineResult(path, manifest, run.solution, run.reports)
