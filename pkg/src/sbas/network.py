"""Small-baseline interferogram network: acquisitions, pairs and thresholds."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ._csv import data_rows

DATE_FMT = "%Y%m%d"


@dataclass(frozen=True)
class Acquisition:
    date: dt.date
    orbit: int
    bperp_ref: float = 0.0
    doppler: Optional[float] = None


@dataclass(frozen=True)
class PairSpec:
    """One interferogram: epoch indices into a sorted date list plus baselines."""

    master_idx: int
    slave_idx: int
    bperp: float
    btemp: int

    def __post_init__(self):
        if self.btemp <= 0:
            raise ValueError(f"pair ({self.master_idx}, {self.slave_idx}) has non-positive btemp {self.btemp}")
        if self.master_idx == self.slave_idx:
            raise ValueError("master and slave must differ")


@dataclass(frozen=True)
class NetworkThresholds:
    max_bperp: float = 400.0
    max_btemp: float = 750.0
    max_doppler: Optional[float] = None

    def __post_init__(self):
        for name in ("max_bperp", "max_btemp", "max_doppler"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")


def parse_date(text) -> dt.date:
    if isinstance(text, dt.datetime):
        return text.date()
    if isinstance(text, dt.date):
        return text
    s = str(text).strip()
    try:
        if "-" in s:
            return dt.date.fromisoformat(s)
        return dt.datetime.strptime(s, DATE_FMT).date()
    except ValueError as exc:
        raise ValueError(f"invalid date {s!r}") from exc


def format_date(d: dt.date) -> str:
    return d.strftime(DATE_FMT)


def temporal_baseline(d1, d2) -> int:
    """Signed day count ``d2 - d1`` on the proleptic Gregorian calendar."""
    return (parse_date(d2) - parse_date(d1)).days


def build_network(acqs: Sequence[Acquisition], thr: NetworkThresholds) -> list[PairSpec]:
    """Select every pair (i < j) that satisfies all baseline thresholds.

    Acquisitions are sorted by date first, so epoch indices in the returned
    pairs refer to chronological order regardless of input order.
    """
    if len(acqs) < 2:
        raise ValueError(f"need at least 2 acquisitions, got {len(acqs)}")
    acqs = sorted(acqs, key=lambda a: a.date)
    _check_acquisitions(acqs)
    use_doppler = thr.max_doppler is not None and all(a.doppler is not None for a in acqs)

    pairs = []
    for i, a in enumerate(acqs):
        for j in range(i + 1, len(acqs)):
            b = acqs[j]
            bperp = b.bperp_ref - a.bperp_ref
            btemp = temporal_baseline(a.date, b.date)
            if abs(bperp) > thr.max_bperp or btemp > thr.max_btemp:
                continue
            if use_doppler and abs(b.doppler - a.doppler) > thr.max_doppler:
                continue
            pairs.append(PairSpec(i, j, bperp, btemp))
    return pairs


def _check_acquisitions(acqs):
    dates = [a.date for a in acqs]
    if len(set(dates)) != len(dates):
        raise ValueError("acquisition dates must be unique")
    orbits = [a.orbit for a in acqs]
    if len(set(orbits)) != len(orbits):
        raise ValueError("acquisition orbits must be unique")


def connected_components(pairs: Iterable[PairSpec], n_epochs: int) -> tuple[int, np.ndarray]:
    """Union-find labeling of epochs linked by ``pairs``.

    Returns ``(n_components, labels)`` with labels numbered 0.. in order of
    first appearance by epoch index.
    """
    parent = list(range(n_epochs))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for p in pairs:
        for idx in (p.master_idx, p.slave_idx):
            if not 0 <= idx < n_epochs:
                raise ValueError(f"epoch index {idx} out of range for {n_epochs} epochs")
        ra, rb = find(p.master_idx), find(p.slave_idx)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    labels = np.empty(n_epochs, dtype=int)
    seen = {}
    for i in range(n_epochs):
        labels[i] = seen.setdefault(find(i), len(seen))
    return len(seen), labels


# -- pair / acquisition files ----------------------------------------------

def load_pair_dates(path) -> list[tuple[dt.date, dt.date, float]]:
    """Read a ``master,slave,bperp_m`` CSV into ``(master, slave, bperp)`` tuples."""
    rows = data_rows(path)
    n, header = next(rows)
    if header != ["master", "slave", "bperp_m"]:
        raise ValueError(f"{path}:{n}: expected header 'master,slave,bperp_m', got {','.join(header)!r}")
    out = []
    for n, row in rows:
        try:
            if len(row) != 3:
                raise ValueError(f"expected 3 columns, got {len(row)}")
            master, slave, bperp = parse_date(row[0]), parse_date(row[1]), float(row[2])
            if not math.isfinite(bperp):
                raise ValueError(f"non-finite bperp {row[2]!r}")
            if master >= slave:
                raise ValueError(f"master date {row[0]} is not before slave date {row[1]}")
        except ValueError as exc:
            raise ValueError(f"{path}: line {n}: {exc}") from None
        out.append((master, slave, bperp))
    return out


def pairs_from_dates(rows) -> tuple[list[dt.date], list[PairSpec]]:
    """Index dated pairs against the sorted set of their dates."""
    epochs = sorted({d for m, s, _ in rows for d in (m, s)})
    index = {d: i for i, d in enumerate(epochs)}
    pairs = [PairSpec(index[m], index[s], b, temporal_baseline(m, s)) for m, s, b in rows]
    return epochs, sort_pairs(pairs)


def load_pairs(path) -> tuple[list[dt.date], list[PairSpec]]:
    """Load a pair CSV. Returns the sorted epoch dates and the pair list."""
    return pairs_from_dates(load_pair_dates(path))


def save_pairs(pairs: Sequence[PairSpec], epochs: Sequence[dt.date], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["master", "slave", "bperp_m"])
        for p in pairs:
            w.writerow([format_date(epochs[p.master_idx]), format_date(epochs[p.slave_idx]), repr(float(p.bperp))])


def sort_pairs(pairs: Iterable[PairSpec]) -> list[PairSpec]:
    return sorted(pairs, key=lambda p: (p.master_idx, p.slave_idx))


def load_acquisitions(path) -> list[Acquisition]:
    """Read a ``date,orbit,bperp_m[,doppler_hz]`` CSV."""
    rows = data_rows(path)
    n, header = next(rows)
    if header not in (["date", "orbit", "bperp_m"], ["date", "orbit", "bperp_m", "doppler_hz"]):
        raise ValueError(f"{path}:{n}: unexpected acquisition header {','.join(header)!r}")
    acqs = []
    for n, row in rows:
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} columns, got {len(row)}")
            doppler = float(row[3]) if len(row) == 4 and row[3] else None
            acqs.append(Acquisition(parse_date(row[0]), int(row[1]), float(row[2]), doppler))
        except ValueError as exc:
            raise ValueError(f"{path}: line {n}: {exc}") from None
    return acqs


def epoch_baselines(pairs: Sequence[PairSpec], n_epochs: int) -> np.ndarray:
    """Least-squares per-epoch baselines (first epoch of each component = 0).

    Per-pair baselines from real processing rarely close around loops, so
    this is only used to place epochs on the network plot.
    """
    A = np.zeros((len(pairs), n_epochs))
    b = np.array([p.bperp for p in pairs], dtype=float)
    for k, p in enumerate(pairs):
        A[k, p.master_idx] = -1.0
        A[k, p.slave_idx] = 1.0
    _, labels = connected_components(pairs, n_epochs)
    anchors = [int(np.flatnonzero(labels == c)[0]) for c in np.unique(labels)]
    free = [i for i in range(n_epochs) if i not in anchors]
    out = np.zeros(n_epochs)
    if free and len(pairs):
        out[free] = np.linalg.lstsq(A[:, free], b, rcond=None)[0]
    return out


def plot_network_svg(epochs: Sequence[dt.date], pairs: Sequence[PairSpec], path, bperp_ref=None,
                     width=720, height=420):
    """Write the network as an SVG: date on x, perpendicular baseline on y."""
    if bperp_ref is None:
        bperp_ref = epoch_baselines(pairs, len(epochs))
    bperp_ref = np.asarray(bperp_ref, dtype=float)
    days = np.array([(d - epochs[0]).days for d in epochs], dtype=float)
    margin = 60
    span_x = max(days.max() - days.min(), 1.0)
    lo, hi = float(bperp_ref.min()), float(bperp_ref.max())
    if hi - lo < 1e-9:
        lo, hi = lo - 1.0, hi + 1.0

    def xy(i):
        x = margin + (days[i] - days.min()) / span_x * (width - 2 * margin)
        y = height - margin - (bperp_ref[i] - lo) / (hi - lo) * (height - 2 * margin)
        return x, y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="13">Acquisition date</text>',
        f'<text x="18" y="{height / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {height / 2})">Perpendicular baseline (m)</text>',
        f'<text x="{margin - 5}" y="{margin + 4}" text-anchor="end" font-size="10">{hi:.0f}</text>',
        f'<text x="{margin - 5}" y="{height - margin + 4}" text-anchor="end" font-size="10">{lo:.0f}</text>',
    ]
    for p in pairs:
        (x1, y1), (x2, y2) = xy(p.master_idx), xy(p.slave_idx)
        parts.append(f'<line class="pair" x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="steelblue"/>')
    for i, d in enumerate(epochs):
        x, y = xy(i)
        parts.append(f'<circle class="epoch" cx="{x:.2f}" cy="{y:.2f}" r="4" fill="crimson"><title>{format_date(d)}</title></circle>')
        parts.append(f'<text x="{x:.2f}" y="{height - margin + 14}" text-anchor="middle" font-size="8">{format_date(d)}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
