"""Well production versus surface displacement rate."""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ._csv import data_rows
from .invert import epoch_years
from .network import parse_date

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProductionRecord:
    well_id: str
    month: dt.date  # first day of the month
    barrels: float

    def __post_init__(self):
        if not (self.barrels >= 0 and math.isfinite(self.barrels)):
            raise ValueError(f"barrels must be a finite non-negative number, got {self.barrels}")
        if self.month.day != 1:
            object.__setattr__(self, "month", self.month.replace(day=1))


@dataclass(frozen=True)
class CorrelationReport:
    well_id: str
    lag_months: int  # lag in intervals; named after the report column
    pearson_r: float
    n: int


def parse_month(text) -> dt.date:
    if isinstance(text, dt.date):
        return text.replace(day=1)
    try:
        year, month = str(text).strip().split("-")
        return dt.date(int(year), int(month), 1)
    except ValueError:
        raise ValueError(f"invalid month {text!r}, expected YYYY-MM") from None


def _next_month(d: dt.date) -> dt.date:
    return dt.date(d.year + d.month // 12, d.month % 12 + 1, 1)


def aggregate_production(records: Iterable[ProductionRecord], start, end, well_id=None) -> float:
    """Barrels produced in ``[start, end)``, prorating months by day overlap."""
    start, end = parse_date(start), parse_date(end)
    if end < start:
        raise ValueError(f"interval end {end} precedes start {start}")
    total = 0.0
    for rec in records:
        if well_id is not None and rec.well_id != well_id:
            continue
        m0, m1 = rec.month, _next_month(rec.month)
        overlap = (min(end, m1) - max(start, m0)).days
        if overlap > 0:
            total += rec.barrels * overlap / (m1 - m0).days
    return total


def production_per_interval(records, epochs: Sequence[dt.date], well_id=None) -> np.ndarray:
    """Production over each consecutive-epoch interval."""
    records = list(records)
    return np.array([aggregate_production(records, a, b, well_id) for a, b in zip(epochs[:-1], epochs[1:])])


def displacement_rate(displacement, epochs) -> np.ndarray:
    """Interval rate (mm/yr): change in displacement over interval length."""
    d = np.asarray(displacement, dtype=float)
    t = epoch_years(epochs)
    if d.shape[0] != t.size:
        raise ValueError(f"{d.shape[0]} displacement samples for {t.size} epochs")
    return np.diff(d) / np.diff(t)


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"series must be 1-D with equal length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance series")
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def lagged_correlation(production, rate, max_lag: int, well_id: str = "") -> list[CorrelationReport]:
    """Pearson r between production and displacement rate at each lag.

    At lag ``L`` production in interval ``t`` is paired with rate in
    interval ``t + L``, so a positive lag means the surface responds
    later. Lags with fewer than two overlapping samples, or with a
    constant window, are left out.
    """
    p = np.asarray(production, dtype=float)
    r = np.asarray(rate, dtype=float)
    if p.shape != r.shape or p.ndim != 1:
        raise ValueError(f"series must be aligned 1-D arrays, got {p.shape} and {r.shape}")
    if max_lag < 0:
        raise ValueError(f"max_lag must be >= 0, got {max_lag}")
    n = p.size
    reports = []
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            x, y = p[: n - lag], r[lag:]
        else:
            x, y = p[-lag:], r[: n + lag]
        if x.size < 2:
            continue
        try:
            reports.append(CorrelationReport(well_id, lag, pearson(x, y), int(x.size)))
        except ValueError as exc:
            log.warning("lag %d omitted for well %r: %s", lag, well_id, exc)
    return reports


def best_lag(reports: Sequence[CorrelationReport]) -> Optional[CorrelationReport]:
    return max(reports, key=lambda rep: abs(rep.pearson_r), default=None)


# -- files -------------------------------------------------------------------

def load_production(path) -> list[ProductionRecord]:
    rows = data_rows(path)
    n, header = next(rows)
    if header != ["well_id", "month", "barrels"]:
        raise ValueError(f"{path}:{n}: expected header 'well_id,month,barrels'")
    records, seen = [], set()
    for n, row in rows:
        try:
            if len(row) != 3:
                raise ValueError(f"expected 3 columns, got {len(row)}")
            rec = ProductionRecord(row[0], parse_month(row[1]), float(row[2]))
            if (rec.well_id, rec.month) in seen:
                raise ValueError(f"duplicate record for well {rec.well_id} month {row[1]}")
        except ValueError as exc:
            raise ValueError(f"{path}: line {n}: {exc}") from None
        seen.add((rec.well_id, rec.month))
        records.append(rec)
    return records


def save_production(records: Iterable[ProductionRecord], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["well_id", "month", "barrels"])
        for rec in records:
            w.writerow([rec.well_id, rec.month.strftime("%Y-%m"), repr(float(rec.barrels))])


def save_report(reports: Iterable[CorrelationReport], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["well_id", "lag", "r", "n"])
        for rep in reports:
            w.writerow([rep.well_id, rep.lag_months, f"{rep.pearson_r:.6f}", rep.n])


def load_report(path) -> list[CorrelationReport]:
    rows = data_rows(path)
    next(rows)
    return [CorrelationReport(r[0], int(r[1]), float(r[2]), int(r[3])) for _, r in rows]


def save_series(epochs: Sequence[dt.date], displacement, path):
    """Write a probe time series as ``epoch,displacement_mm``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "displacement_mm"])
        for d, v in zip(epochs, displacement):
            w.writerow([d.strftime("%Y%m%d"), f"{float(v):.6f}"])


def load_series(path) -> tuple[list[dt.date], np.ndarray]:
    rows = data_rows(path)
    n, header = next(rows)
    if header != ["epoch", "displacement_mm"]:
        raise ValueError(f"{path}:{n}: expected header 'epoch,displacement_mm'")
    epochs, values = [], []
    for n, row in rows:
        try:
            epochs.append(parse_date(row[0]))
            values.append(float(row[1]))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: line {n}: {exc}") from None
    return epochs, np.array(values)
