"""Visit-log ingestion, daily panels and period slicing.

A :class:`DailyPanel` holds, for every (focal, target) pair, three aligned
daily series on one gap-free calendar:

* ``x``   -- visits to the focal product page (the treatment series),
* ``y_r`` -- click-throughs from the focal page to the target (referred outcome),
* ``y_d`` -- visits to the target arriving by any other route (direct outcome).

Panels come either from raw visit events (:func:`ingest_events`) or from a
pre-aggregated panel CSV (:func:`read_panel_csv`).
"""
from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

EVENT_HEADER = ("date", "focal_id", "target_id", "channel", "group", "count")
PANEL_HEADER = ("date", "focal_id", "target_id", "x", "y_r", "y_d", "group")

DEFAULT_MIN_PEAK = 10.0
DEFAULT_TAU = 15


class DataError(ValueError):
    """Input data cannot be turned into a usable panel."""


class Channel(enum.Enum):
    REFERRED = "referred"
    DIRECT = "direct"


@dataclass(frozen=True)
class VisitEvent:
    """One (possibly pre-counted) visit to ``target_id``.

    For ``REFERRED`` events the visit is a click-through from ``focal_id``;
    for ``DIRECT`` events ``focal_id`` is ignored.
    """

    timestamp: dt.datetime | dt.date
    focal_id: str
    target_id: str
    channel: Channel
    group: str | None = None
    count: int = 1

    def __post_init__(self):
        if not isinstance(self.channel, Channel):
            object.__setattr__(self, "channel", Channel(str(self.channel).lower()))
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")
        if not self.target_id:
            raise ValueError("target_id is empty")
        if self.channel is Channel.REFERRED and not self.focal_id:
            raise ValueError("referred event without focal_id")

    @property
    def day(self) -> dt.date:
        ts = self.timestamp
        return ts.date() if isinstance(ts, dt.datetime) else ts


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DailyPanel:
    """Aligned daily X / Y_R / Y_D series for a set of (focal, target) pairs.

    Rows of ``x``, ``y_r`` and ``y_d`` follow ``pairs``; columns follow
    ``dates``, a contiguous run of calendar days.
    """

    dates: np.ndarray
    pairs: tuple[tuple[str, str], ...]
    x: np.ndarray
    y_r: np.ndarray
    y_d: np.ndarray
    focal_groups: Mapping[str, str] = field(default_factory=dict)
    target_groups: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "pairs", tuple((str(f), str(t)) for f, t in self.pairs))
        shape = (len(self.pairs), len(dates))
        for name in ("x", "y_r", "y_d"):
            arr = _readonly(getattr(self, name)).reshape(shape)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise DataError(f"{name} must be finite and nonnegative")
            object.__setattr__(self, name, arr)
        if len(dates) > 1 and np.any(np.diff(dates) != np.timedelta64(1, "D")):
            raise DataError("calendar index must be contiguous days")
        if len(set(self.pairs)) != len(self.pairs):
            raise DataError("duplicate (focal, target) pairs")
        object.__setattr__(self, "focal_groups", dict(self.focal_groups))
        object.__setattr__(self, "target_groups", dict(self.target_groups))

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def subset(self, mask) -> "DailyPanel":
        mask = np.asarray(mask, dtype=bool)
        pairs = tuple(p for p, keep in zip(self.pairs, mask) if keep)
        return DailyPanel(
            dates=self.dates,
            pairs=pairs,
            x=self.x[mask].reshape(len(pairs), self.n_days),
            y_r=self.y_r[mask].reshape(len(pairs), self.n_days),
            y_d=self.y_d[mask].reshape(len(pairs), self.n_days),
            focal_groups=self.focal_groups,
            target_groups=self.target_groups,
        )

    def equals(self, other: "DailyPanel") -> bool:
        """Bit-level equality of calendar, pairs, series and group labels."""
        return (
            np.array_equal(self.dates, other.dates)
            and self.pairs == other.pairs
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y_r, other.y_r)
            and np.array_equal(self.y_d, other.y_d)
            and dict(self.focal_groups) == dict(other.focal_groups)
            and dict(self.target_groups) == dict(other.target_groups)
        )


@dataclass(frozen=True, eq=False)
class PairPeriod:
    """One (focal, target, window) slice: the unit of independence testing."""

    focal_id: str
    target_id: str
    period_index: int
    start_date: dt.date
    tau: int
    x_window: np.ndarray
    y_r_window: np.ndarray
    y_d_window: np.ndarray

    def __post_init__(self):
        for name in ("x_window", "y_r_window", "y_d_window"):
            arr = _readonly(getattr(self, name))
            if arr.shape != (self.tau,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({self.tau},)")
            object.__setattr__(self, name, arr)

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.focal_id, self.target_id, self.period_index)

    @property
    def focal_key(self) -> tuple[str, int]:
        return (self.focal_id, self.period_index)


# ---------------------------------------------------------------- ingestion


def _pick_group(labels: set[str]) -> str | None:
    # several labels for one product: smallest wins so the result is order-free
    return min(labels) if labels else None


def ingest_events(events: Iterable[VisitEvent]) -> DailyPanel:
    """Aggregate visit events into a daily panel.

    Total visits to a product on a day are the sum of all events whose
    ``target_id`` is that product, whatever the channel. A pair exists for
    every (focal, target) with at least one referred event. ``x`` of a pair
    is the total visits to its focal product, ``y_r`` the referred counts from
    focal to target and ``y_d`` the direct visits to the target.
    """
    totals: dict[tuple[str, dt.date], int] = defaultdict(int)
    referred: dict[tuple[str, str, dt.date], int] = defaultdict(int)
    direct: dict[tuple[str, dt.date], int] = defaultdict(int)
    groups: dict[str, set[str]] = defaultdict(set)
    days: set[dt.date] = set()
    n = 0
    for ev in events:
        n += 1
        day = ev.day
        days.add(day)
        totals[(ev.target_id, day)] += ev.count
        if ev.channel is Channel.REFERRED:
            referred[(ev.focal_id, ev.target_id, day)] += ev.count
        else:
            direct[(ev.target_id, day)] += ev.count
        if ev.group:
            groups[ev.target_id].add(ev.group)
    if n == 0:
        raise DataError("no valid events")

    first, last = min(days), max(days)
    n_days = (last - first).days + 1
    dates = np.arange(np.datetime64(first, "D"), np.datetime64(last, "D") + 1)
    pairs = sorted({(f, t) for f, t, _ in referred})
    row = {p: i for i, p in enumerate(pairs)}
    x = np.zeros((len(pairs), n_days))
    y_r = np.zeros_like(x)
    y_d = np.zeros_like(x)

    by_product_total: dict[str, np.ndarray] = defaultdict(lambda: np.zeros(n_days))
    for (pid, day), c in totals.items():
        by_product_total[pid][(day - first).days] += c
    by_product_direct: dict[str, np.ndarray] = defaultdict(lambda: np.zeros(n_days))
    for (pid, day), c in direct.items():
        by_product_direct[pid][(day - first).days] += c
    for (f, t, day), c in referred.items():
        y_r[row[(f, t)], (day - first).days] += c
    zeros = np.zeros(n_days)
    for i, (f, t) in enumerate(pairs):
        x[i] = by_product_total.get(f, zeros)
        y_d[i] = by_product_direct.get(t, zeros)

    labelled = {pid: _pick_group(g) for pid, g in groups.items()}
    focals = {f for f, _ in pairs}
    targets = {t for _, t in pairs}
    return DailyPanel(
        dates=dates,
        pairs=tuple(pairs),
        x=x,
        y_r=y_r,
        y_d=y_d,
        focal_groups={k: v for k, v in labelled.items() if k in focals},
        target_groups={k: v for k, v in labelled.items() if k in targets},
    )


@dataclass
class RowRejection:
    line: int
    reason: str


def read_events_csv(path) -> tuple[list[VisitEvent], list[RowRejection]]:
    """Parse an event CSV; malformed rows are rejected individually."""
    events: list[VisitEvent] = []
    rejects: list[RowRejection] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "focal_id", "target_id", "channel"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: event CSV missing columns {sorted(missing)}")
        for rec in reader:
            line = reader.line_num
            try:
                count_s = (rec.get("count") or "").strip()
                events.append(
                    VisitEvent(
                        timestamp=dt.date.fromisoformat((rec["date"] or "").strip()),
                        focal_id=(rec["focal_id"] or "").strip(),
                        target_id=(rec["target_id"] or "").strip(),
                        channel=Channel((rec["channel"] or "").strip().lower()),
                        group=(rec.get("group") or "").strip() or None,
                        count=int(count_s) if count_s else 1,
                    )
                )
            except (ValueError, TypeError, KeyError) as exc:
                rejects.append(RowRejection(line, str(exc)))
                logger.warning("%s:%d: rejected row (%s)", path, line, exc)
    return events, rejects


def load_events(path) -> DailyPanel:
    events, rejects = read_events_csv(path)
    if not events:
        raise DataError(f"{path}: no valid events ({len(rejects)} rows rejected)")
    return ingest_events(events)


def read_panel_csv(path) -> DailyPanel:
    """Read a pre-aggregated panel CSV, zero-filling missing days.

    The ``group`` column labels the focal product.
    """
    cells: dict[tuple[str, str, dt.date], tuple[float, float, float]] = {}
    groups: dict[str, set[str]] = defaultdict(set)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(PANEL_HEADER[:-1]) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: panel CSV missing columns {sorted(missing)}")
        for rec in reader:
            line = reader.line_num
            try:
                day = dt.date.fromisoformat(rec["date"].strip())
                f, t = rec["focal_id"].strip(), rec["target_id"].strip()
                if not f or not t:
                    raise ValueError("empty focal_id or target_id")
                vals = tuple(float(rec[k]) for k in ("x", "y_r", "y_d"))
                if any(not np.isfinite(v) or v < 0 for v in vals):
                    raise ValueError(f"values must be finite and nonnegative: {vals}")
                if (f, t, day) in cells:
                    raise ValueError(f"duplicate row for {(f, t, day.isoformat())}")
            except (ValueError, TypeError, AttributeError) as exc:
                logger.warning("%s:%d: rejected row (%s)", path, line, exc)
                continue
            cells[(f, t, day)] = vals
            g = (rec.get("group") or "").strip()
            if g:
                groups[f].add(g)
    if not cells:
        raise DataError(f"{path}: no valid panel rows")
    days = {d for _, _, d in cells}
    first, last = min(days), max(days)
    n_days = (last - first).days + 1
    pairs = sorted({(f, t) for f, t, _ in cells})
    row = {p: i for i, p in enumerate(pairs)}
    arr = np.zeros((3, len(pairs), n_days))
    for (f, t, day), vals in cells.items():
        arr[:, row[(f, t)], (day - first).days] = vals
    return DailyPanel(
        dates=np.arange(np.datetime64(first, "D"), np.datetime64(last, "D") + 1),
        pairs=tuple(pairs),
        x=arr[0],
        y_r=arr[1],
        y_d=arr[2],
        focal_groups={f: _pick_group(g) for f, g in groups.items()},
    )


def write_panel_csv(panel: DailyPanel, path) -> None:
    """Write every (pair, day) cell; floats are written round-trip exact."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PANEL_HEADER)
        days = [str(d) for d in panel.dates]
        for i, (f, t) in enumerate(panel.pairs):
            g = panel.focal_groups.get(f, "")
            for j, day in enumerate(days):
                w.writerow([day, f, t, repr(float(panel.x[i, j])),
                            repr(float(panel.y_r[i, j])), repr(float(panel.y_d[i, j])), g])


def load_panel(path, fmt: str) -> DailyPanel:
    if fmt == "events":
        return load_events(path)
    if fmt == "panel":
        return read_panel_csv(path)
    raise ValueError(f"unknown input format {fmt!r} (expected 'events' or 'panel')")


# ------------------------------------------------------------------ filters


def apply_popularity_filter(panel: DailyPanel, min_peak: float = DEFAULT_MIN_PEAK) -> DailyPanel:
    """Keep pairs whose focal series reaches ``min_peak`` visits on some day."""
    if min_peak < 0:
        raise ValueError(f"min_peak must be >= 0, got {min_peak}")
    if panel.n_pairs == 0 or panel.n_days == 0:
        return panel
    return panel.subset(panel.x.max(axis=1) >= min_peak)


def slice_periods(panel: DailyPanel, tau: int = DEFAULT_TAU) -> list[PairPeriod]:
    """Cut every pair into consecutive, non-overlapping ``tau``-day windows.

    Windows start on the panel's first calendar day and are shared by all
    pairs; a trailing partial window is dropped.
    """
    if int(tau) != tau or tau < 2:
        raise ValueError(f"tau must be an integer >= 2, got {tau}")
    tau = int(tau)
    if panel.n_pairs == 0:
        raise DataError("panel has no pairs")
    n_periods = panel.n_days // tau
    out = []
    for i, (f, t) in enumerate(panel.pairs):
        for k in range(n_periods):
            sl = slice(k * tau, (k + 1) * tau)
            out.append(
                PairPeriod(
                    focal_id=f,
                    target_id=t,
                    period_index=k,
                    start_date=panel.dates[k * tau].astype(dt.date),
                    tau=tau,
                    x_window=panel.x[i, sl],
                    y_r_window=panel.y_r[i, sl],
                    y_d_window=panel.y_d[i, sl],
                )
            )
    return out


def is_constant(v: np.ndarray) -> bool:
    return bool(np.all(v == v[0]))


def filter_constant_direct(periods: Sequence[PairPeriod]) -> list[PairPeriod]:
    """Drop periods whose direct-outcome window is exactly constant."""
    kept = [pp for pp in periods if not is_constant(pp.y_d_window)]
    removed = len(periods) - len(kept)
    if removed:
        logger.info("removed %d periods with constant y_d", removed)
    return kept
