"""Command line entry point: ``sbas <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 stage failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import correlate as corr
from .config import ConfigError, PipelineConfig, data_path, load_config
from .invert import DisconnectedNetworkError, invert_stack
from .io import SGRIDError, read_sgrid, render_quicklook, write_sgrid
from .network import (NetworkThresholds, build_network, connected_components, format_date, load_acquisitions,
                      load_pairs, plot_network_svg, save_pairs)
from .pipeline import StageError, run_pipeline
from .raster import Raster
from .unwrap import UnwrapError, unwrap_auto, unwrap_itoh, unwrap_ls

log = logging.getLogger("sbas")

EXIT_OK, EXIT_CONFIG, EXIT_STAGE, EXIT_IO = 0, 2, 3, 4


def _xy(text):
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y pixel coordinates, got {text!r}") from None
    return x, y


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.out_dir is not None:
        cfg.out_dir = Path(args.out_dir)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg.validate()


def _out_dir(args, default="sbas_out") -> Path:
    out = Path(args.out_dir or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_pipeline(args):
    result = run_pipeline(_config(args))
    print(f"manifest: {result.manifest_path}")
    for kind in ("interferogram", "displacement", "velocity", "correlation_report"):
        print(f"  {kind}: {result.count(kind)}")
    return EXIT_OK


def cmd_simulate(args):
    from .pipeline import _Run

    cfg = _config(args)
    run = _Run(cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    run.simulate()
    run.network()
    print(f"wrote {len(run.ifgs)} interferograms to {run.out / 'network'}")
    return EXIT_OK


def cmd_network(args):
    out = _out_dir(args)
    if args.pairs:
        epochs, pairs = load_pairs(args.pairs)
        bperp_ref = None
    else:
        source = args.acquisitions or data_path("table1_acquisitions.csv")
        acqs = sorted(load_acquisitions(source), key=lambda a: a.date)
        thr = NetworkThresholds(args.max_bperp, args.max_btemp, args.max_doppler)
        pairs = build_network(acqs, thr)
        epochs, bperp_ref = [a.date for a in acqs], [a.bperp_ref for a in acqs]
    n_comp, labels = connected_components(pairs, len(epochs))
    save_pairs(pairs, epochs, out / "pairs.csv")
    plot_network_svg(epochs, pairs, out / "network.svg", bperp_ref=bperp_ref)
    print(f"{len(pairs)} pairs over {len(epochs)} epochs, {n_comp} connected component(s)")
    if n_comp > 1:
        for c in range(n_comp):
            print(f"  component {c}: " + " ".join(format_date(epochs[i]) for i in np.flatnonzero(labels == c)))
    return EXIT_OK


_IFG_RE = re.compile(r"^(?:ifg_)?(\d{8}_\d{8})\.sgrid$")


def cmd_unwrap(args):
    out = _out_dir(args)
    for path in map(Path, args.inputs):
        m = _IFG_RE.match(path.name)
        tag = m.group(1) if m else path.stem
        phase = read_sgrid(path)
        coh_path = path.with_name(f"coh_{tag}.sgrid")
        coherence = read_sgrid(coh_path) if coh_path.exists() else None
        ref = None if args.ref_pixel is None else (args.ref_pixel[1], args.ref_pixel[0])
        if args.method == "itoh":
            result = unwrap_itoh(phase)
        elif args.method == "ls":
            result = unwrap_ls(phase, coherence, args.coh_threshold, ref)
        else:
            result = unwrap_auto(phase, coherence, args.coh_threshold, ref)
        write_sgrid(result, out / f"unw_{tag}.sgrid")
    print(f"unwrapped {len(args.inputs)} interferogram(s) into {out}")
    return EXIT_OK


def cmd_invert(args):
    out = _out_dir(args)
    epochs, pairs = load_pairs(args.pairs)
    unw_dir = Path(args.unw_dir)
    stack, coherence = [], []
    for p in pairs:
        tag = f"{format_date(epochs[p.master_idx])}_{format_date(epochs[p.slave_idx])}"
        stack.append(read_sgrid(unw_dir / f"unw_{tag}.sgrid"))
        coh = Path(args.coh_dir or unw_dir) / f"coh_{tag}.sgrid"
        if coh.exists():
            coherence.append(read_sgrid(coh).to_masked())
    cfg = load_config(args.config) if args.config else PipelineConfig()
    ref = None if args.ref_pixel is None else (args.ref_pixel[1], args.ref_pixel[0])
    sol = invert_stack(stack, pairs, epochs, with_topo=args.with_topo, sensor=cfg.sensor,
                       allow_disconnected=args.allow_disconnected, ref_pixel=ref,
                       coherence=np.stack(coherence) if len(coherence) == len(pairs) else None,
                       rcond=cfg.rcond, threads=args.threads or 1)
    dx, dy = stack[0].dx, stack[0].dy
    velocity = sol.velocity_raster(dx, dy)
    write_sgrid(velocity, out / "mean_velocity.sgrid")
    render_quicklook(velocity, out / "mean_velocity.svg", units="mm/yr (LOS)", title="Mean LOS velocity")
    for d, r in zip(epochs, sol.displacement_rasters(dx, dy)):
        write_sgrid(r, out / f"displacement_{format_date(d)}.sgrid")
    if sol.dem_error is not None:
        write_sgrid(Raster.from_array(sol.dem_error, dx, dy), out / "dem_error.sgrid")
    for x, y in args.probe or []:
        corr.save_series(epochs, sol.probe((y, x)), out / f"probe_{x}_{y}.csv")
    print(f"reference pixel (x,y) = {sol.ref_pixel[1]},{sol.ref_pixel[0]}; "
          f"velocity range {np.nanmin(sol.mean_velocity):.3f} .. {np.nanmax(sol.mean_velocity):.3f} mm/yr")
    return EXIT_OK


def cmd_correlate(args):
    records = corr.load_production(args.production)
    epochs, displacement = corr.load_series(args.series)
    rate = corr.displacement_rate(displacement, epochs)
    wells = [args.well] if args.well else sorted({r.well_id for r in records})
    reports = []
    for well in wells:
        production = corr.production_per_interval(records, epochs, well)
        reports.extend(corr.lagged_correlation(production, rate, args.max_lag, well))
    output = Path(args.output) if args.output else _out_dir(args) / "correlation_report.csv"
    corr.save_report(reports, output)
    for rep in reports:
        print(f"{rep.well_id:>6} lag {rep.lag_months:+d}  r = {rep.pearson_r:+.4f}  n = {rep.n}")
    return EXIT_OK


def _global_flags(default):
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--config", default=default, help="key = value configuration file")
    flags.add_argument("--out-dir", default=default, help="output directory")
    flags.add_argument("--seed", type=int, default=default, help="override scene.seed")
    flags.add_argument("--threads", type=int, default=default, help="worker threads")
    flags.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return flags


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = _global_flags(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="sbas", description="Small-baseline InSAR time-series toolkit",
                                     parents=[_global_flags(None)])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("pipeline", parents=[common], help="run every stage from a config")
    sub.add_parser("simulate", parents=[common], help="simulate truth and wrapped interferograms")

    p = sub.add_parser("network", parents=[common], help="build or load the pair network")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--pairs", help="pair CSV (master,slave,bperp_m)")
    src.add_argument("--acquisitions", help="acquisition CSV (date,orbit,bperp_m[,doppler_hz])")
    p.add_argument("--max-bperp", type=float, default=400.0, help="meters (default 400)")
    p.add_argument("--max-btemp", type=float, default=750.0, help="days (default 750)")
    p.add_argument("--max-doppler", type=float, default=None, help="Hz")

    p = sub.add_parser("unwrap", parents=[common], help="unwrap SGRID interferograms")
    p.add_argument("inputs", nargs="+", help="wrapped SGRID files (coh_<tag>.sgrid picked up alongside)")
    p.add_argument("--coh-threshold", type=float, default=0.3)
    p.add_argument("--method", choices=("auto", "itoh", "ls"), default="auto")
    p.add_argument("--ref-pixel", type=_xy, help="x,y")

    p = sub.add_parser("invert", parents=[common], help="invert unwrapped interferograms")
    p.add_argument("--pairs", required=True, help="pair CSV matching the unwrapped files")
    p.add_argument("--unw-dir", required=True, help="directory of unw_<master>_<slave>.sgrid files")
    p.add_argument("--coh-dir", help="directory of coh_<master>_<slave>.sgrid files (default: --unw-dir)")
    p.add_argument("--with-topo", action="store_true", help="also estimate DEM error")
    p.add_argument("--allow-disconnected", action="store_true", help="accept a minimum-norm bridge")
    p.add_argument("--ref-pixel", type=_xy, help="x,y; default is the highest-coherence pixel")
    p.add_argument("--probe", type=_xy, action="append", help="x,y pixel to export as a time series CSV")

    p = sub.add_parser("correlate", parents=[common], help="lagged production/displacement-rate correlation")
    p.add_argument("--production", required=True, help="CSV well_id,month,barrels")
    p.add_argument("--series", required=True, help="CSV epoch,displacement_mm")
    p.add_argument("--max-lag", type=int, default=2)
    p.add_argument("--well", help="only this well id")
    p.add_argument("--output", help="report CSV path")
    return parser


COMMANDS = {
    "pipeline": cmd_pipeline,
    "simulate": cmd_simulate,
    "network": cmd_network,
    "unwrap": cmd_unwrap,
    "invert": cmd_invert,
    "correlate": cmd_correlate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, SGRIDError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, UnwrapError, DisconnectedNetworkError) as exc:
        print(f"error in {args.command}: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
