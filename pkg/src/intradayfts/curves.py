"""Tick ingestion, daily curve panels, the CIDR transform and outlier flagging."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, time
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlreadyTransformed,
    EmptyDay,
    GridMismatch,
    MalformedLine,
    NonPositiveValue,
    ScaleError,
    TooFewCurves,
)

RAW_LEVEL = "raw_level"
CIDR = "cidr"


def _seconds(t: time) -> int:
    return t.hour * 3600 + t.minute * 60 + t.second


@dataclass(frozen=True)
class SessionSpec:
    """A fixed intraday trading session sampled every ``tick_seconds``."""

    open_time: time = time(9, 30, 0)
    close_time: time = time(16, 15, 0)
    tick_seconds: int = 15

    def __post_init__(self):
        if self.tick_seconds <= 0:
            raise ValueError("tick_seconds must be positive")
        span = _seconds(self.close_time) - _seconds(self.open_time)
        if span <= 0 or span % self.tick_seconds:
            raise ValueError("session length must be a positive multiple of tick_seconds")
        if self.grid_size < 2:
            raise ValueError("session must contain at least two grid points")

    @property
    def length_seconds(self) -> int:
        return _seconds(self.close_time) - _seconds(self.open_time)

    @property
    def grid_size(self) -> int:
        return self.length_seconds // self.tick_seconds + 1

    def grid(self) -> np.ndarray:
        return np.arange(self.grid_size, dtype=float) * self.tick_seconds

    def offset(self, t: time) -> int:
        return _seconds(t) - _seconds(self.open_time)

    def clock(self, offset: float) -> str:
        s = _seconds(self.open_time) + int(round(offset))
        return f"{s // 3600:02d}:{(s % 3600) // 60:02d}:{s % 60:02d}"


@dataclass(frozen=True, order=True)
class TickRecord:
    day_id: date
    time_of_day: float
    value: float


@dataclass(frozen=True)
class CurvePanel:
    """n daily curves on a common m-point grid.

    ``values`` is stored read-only; derive new panels instead of mutating.
    """

    grid: np.ndarray
    values: np.ndarray
    day_ids: tuple
    scale_tag: str = RAW_LEVEL

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != grid.size:
            raise ValueError(f"values shape {values.shape} does not match grid of size {grid.size}")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least two points")
        if len(self.day_ids) != values.shape[0]:
            raise ValueError("one day_id per row is required")
        if not np.all(np.isfinite(values)):
            raise ValueError("panel contains missing or non-finite entries")
        if self.scale_tag not in (RAW_LEVEL, CIDR):
            raise ValueError(f"unknown scale_tag {self.scale_tag!r}")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "day_ids", tuple(self.day_ids))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def subset(self, rows) -> "CurvePanel":
        rows = np.arange(self.n)[rows]
        return CurvePanel(self.grid, self.values[rows], [self.day_ids[i] for i in rows], self.scale_tag)

    def with_values(self, values, scale_tag=None) -> "CurvePanel":
        return CurvePanel(self.grid, values, self.day_ids, scale_tag or self.scale_tag)


@dataclass(frozen=True)
class OutlierReport:
    flagged: list = field(default_factory=list)  # (day_id, density_rank)
    proportion_target: float = 0.05
    densities: np.ndarray | None = None

    @property
    def days(self):
        return [d for d, _ in self.flagged]


def parse_ticks(stream: Iterable[str], session: SessionSpec | None = None) -> list[TickRecord]:
    """Parse ``date,time,value`` CSV lines into sorted tick records.

    A header line is skipped if its value field is not numeric. Ticks sharing a
    timestamp keep the last value seen.
    """
    session = session or SessionSpec()
    latest = {}
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise MalformedLine(line_no, "expected 3 fields")
        try:
            value = float(parts[2])
        except ValueError:
            if line_no == 1:
                continue
            raise MalformedLine(line_no, "value is not numeric") from None
        try:
            day = date.fromisoformat(parts[0])
            clock = time.fromisoformat(parts[1])
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from None
        if not math.isfinite(value):
            raise MalformedLine(line_no, "value is not finite")
        if value <= 0:
            raise NonPositiveValue(line_no)
        latest[(day, session.offset(clock))] = value
    return [TickRecord(d, float(s), v) for (d, s), v in sorted(latest.items())]


def build_panel(ticks: Sequence[TickRecord], spec: SessionSpec | None = None, days=None) -> CurvePanel:
    """Snap ticks to the session grid and complete every day.

    Interior gaps are linearly interpolated; leading and trailing gaps carry
    the nearest observed value. ``days`` lists days that must be present
    (an empty one raises :class:`EmptyDay`); by default the days seen in
    ``ticks`` are used.
    """
    spec = spec or SessionSpec()
    step = spec.tick_seconds
    m = spec.grid_size
    by_day: dict = {d: {} for d in (days or [])}
    for tk in sorted(ticks, key=lambda r: (r.day_id, r.time_of_day)):
        idx = int(round(tk.time_of_day / step))
        if abs(tk.time_of_day - idx * step) > step / 2 or not 0 <= idx < m:
            raise GridMismatch(f"tick at offset {tk.time_of_day}s on {tk.day_id} lies outside the session grid")
        by_day.setdefault(tk.day_id, {})[idx] = tk.value
    if not by_day:
        raise EmptyDay(None)
    grid_idx = np.arange(m)
    rows = []
    for day in sorted(by_day):
        obs = by_day[day]
        if not obs:
            raise EmptyDay(day)
        xp = np.array(sorted(obs))
        fp = np.array([obs[i] for i in xp])
        rows.append(np.interp(grid_idx, xp, fp))
    return CurvePanel(spec.grid(), np.vstack(rows), [d.isoformat() for d in sorted(by_day)], RAW_LEVEL)


def to_cidr(panel: CurvePanel) -> CurvePanel:
    """Cumulative intraday returns: ``100 * (ln P(t_j) - ln P(t_1))`` per day."""
    if panel.scale_tag == CIDR:
        raise AlreadyTransformed("panel is already on the cidr scale")
    if np.any(panel.values <= 0):
        raise ScaleError("raw levels must be strictly positive")
    logp = np.log(panel.values)
    return panel.with_values(100.0 * (logp - logp[:, :1]), CIDR)


def from_cidr(panel: CurvePanel, opening_levels) -> CurvePanel:
    """Invert :func:`to_cidr` given each day's opening level."""
    if panel.scale_tag != CIDR:
        raise ScaleError("panel is not on the cidr scale")
    p0 = np.asarray(opening_levels, dtype=float).reshape(-1, 1)
    return panel.with_values(p0 * np.exp(panel.values / 100.0), RAW_LEVEL)


def _kde_product(points: np.ndarray) -> np.ndarray:
    n, d = points.shape
    sd = points.std(axis=0, ddof=1)
    q75, q25 = np.percentile(points, [75, 25], axis=0)
    spread = np.where((q75 - q25) > 0, np.minimum(sd, (q75 - q25) / 1.349), sd)
    spread = np.where(spread > 0, spread, 1.0)
    h = spread * n ** (-1.0 / (d + 4))
    z = (points[:, None, :] - points[None, :, :]) / h
    kern = np.exp(-0.5 * z**2) / (np.sqrt(2 * np.pi) * h)
    return kern.prod(axis=2).mean(axis=1)


def detect_outliers(panel: CurvePanel, proportion: float = 0.05, cfg=None) -> OutlierReport:
    """Flag the lowest-density days in the plane of the first two robust scores.

    Diagnostic only: nothing is removed from the panel.
    """
    from .robust import RobustConfig, fit_robust_fpca

    if panel.scale_tag != CIDR:
        raise ScaleError("outlier detection expects a cidr panel")
    if panel.n < 10:
        raise TooFewCurves(f"need at least 10 curves, got {panel.n}")
    if not 0 < proportion < 0.5:
        raise ValueError("proportion must lie in (0, 0.5)")
    model = fit_robust_fpca(panel, cfg or RobustConfig(), n_components=2)
    dens = _kde_product(model.scores[:, :2])
    n_flag = math.ceil(proportion * panel.n - 1e-12)
    order = np.argsort(dens, kind="stable")[:n_flag]
    flagged = [(panel.day_ids[i], r + 1) for r, i in enumerate(order)]
    return OutlierReport(flagged, proportion, dens)


def read_ticks_csv(path, session=None) -> list[TickRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_ticks(fh, session)


def write_panel_csv(panel: CurvePanel, path_or_buf, session: SessionSpec | None = None) -> None:
    """Header row of grid times (clock strings when a session is given)."""
    if session is not None:
        header = [session.clock(g) for g in panel.grid]
    else:
        header = [repr(float(g)) for g in panel.grid]
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", encoding="utf-8", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"day_id:{panel.scale_tag}"] + header)
        for day, row in zip(panel.day_ids, panel.values):
            w.writerow([day] + [repr(float(v)) for v in row])
    finally:
        if own:
            fh.close()


def read_panel_csv(path_or_buf, session: SessionSpec | None = None) -> CurvePanel:
    if isinstance(path_or_buf, str) and "\n" in path_or_buf:
        fh = io.StringIO(path_or_buf)
    elif hasattr(path_or_buf, "read"):
        fh = path_or_buf
    else:
        fh = open(path_or_buf, encoding="utf-8")
    with fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    tag = head[0].split(":", 1)[1] if ":" in head[0] else RAW_LEVEL
    grid = []
    for g in head[1:]:
        if ":" in g:
            grid.append(session.offset(time.fromisoformat(g)) if session else
                        float(_seconds(time.fromisoformat(g))))
        else:
            grid.append(float(g))
    grid = np.array(grid)
    if session is None and ":" in head[1]:
        grid = grid - grid[0]
    days = [r[0] for r in rows[1:] if r]
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:] if r])
    return CurvePanel(grid, vals, days, tag)

