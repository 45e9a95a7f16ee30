"""Ingestion of interval meter/weather CSVs into clean daily tables.

The pipeline here is parse -> fill_gaps -> resample_daily -> align. Files are
single-channel CSVs with a ``timestamp,<channel>`` header, ISO-8601 timestamps
and one numeric column where an empty cell means missing. Missing stays an
explicit state end to end; NaN never survives ingestion.

Timestamps are stored internally as float64 epoch seconds plus the series
zone, which keeps multi-million-row series cheap. Day boundaries are always
computed in the series-local zone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from typing import Iterator, Optional
from zoneinfo import ZoneInfo

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyInputError,
    NoOverlapError,
    ParseError,
    SchemaError,
    UnfillableChannelError,
)

log = logging.getLogger(__name__)

ENERGY_CHANNEL = "kwh"
WEATHER_CHANNELS = (
    "drybulb_c",
    "solar_wm2",
    "rh_pct",
    "dewpoint_c",
    "windspeed_ms",
    "winddir_deg",
)

# Canonical unit per channel; schema declarations must agree.
CHANNEL_UNITS = {
    "kwh": "kWh",
    "drybulb_c": "degC",
    "solar_wm2": "W/m2",
    "rh_pct": "%",
    "dewpoint_c": "degC",
    "windspeed_ms": "m/s",
    "winddir_deg": "deg",
}

# A day keeps its aggregate only when at least this fraction of expected
# samples is present.
VALID_DAY_COVERAGE = 0.9

# Cadence declared by the schema must match observed median spacing this tight.
CADENCE_TOLERANCE = 0.01


def resolve_timezone(name: str):
    """Turn a zone name ('UTC', IANA name, or '+HH:MM' offset) into a tzinfo."""
    if name == "UTC":
        return timezone.utc
    if name and name[0] in "+-":
        try:
            sign = 1 if name[0] == "+" else -1
            hh, mm = name[1:].split(":")
            return timezone(sign * timedelta(hours=int(hh), minutes=int(mm)))
        except (ValueError, TypeError):
            raise ConfigError(f"unrecognized timezone offset {name!r}")
    try:
        return ZoneInfo(name)
    except Exception:
        raise ConfigError(f"unrecognized timezone {name!r}")


@dataclass(frozen=True)
class SeriesSchema:
    """Declared shape of one channel file."""

    channel: str
    unit: str
    timezone: str
    interval_seconds: int

    def __post_init__(self):
        if self.interval_seconds <= 0:
            raise ConfigError("interval_seconds must be positive")
        canonical = CHANNEL_UNITS.get(self.channel)
        if canonical is not None and self.unit != canonical:
            raise SchemaError(
                f"channel {self.channel!r} uses unit {canonical!r}, "
                f"schema declares {self.unit!r}"
            )


@dataclass
class RawSeries:
    """One channel of interval data, sorted, with explicit missingness.

    Attributes:
        channel: channel name, e.g. 'kwh' or 'drybulb_c'.
        unit: unit string matching the channel.
        interval_seconds: declared sample cadence.
        tz: zone name used for day bucketing.
        epochs: float64 epoch seconds, strictly increasing.
        values: float64 sample values; entries under ``missing`` are ignored.
        missing: bool mask, True where the value is absent.
        duplicates_collapsed: how many duplicate-timestamp rows were averaged
            away at parse time.
    """

    channel: str
    unit: str
    interval_seconds: int
    tz: str
    epochs: np.ndarray
    values: np.ndarray
    missing: np.ndarray
    duplicates_collapsed: int = 0

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.missing = np.asarray(self.missing, dtype=bool)
        if not (self.epochs.shape == self.values.shape == self.missing.shape):
            raise DataError("epochs, values and missing must have equal length")
        if self.epochs.size and np.any(np.diff(self.epochs) <= 0):
            raise DataError("timestamps must be strictly increasing")
        present = self.values[~self.missing]
        if present.size and not np.all(np.isfinite(present)):
            raise DataError("present values must be finite")

    def __len__(self):
        return self.epochs.size

    @property
    def tzinfo(self):
        return resolve_timezone(self.tz)

    def points(self) -> Iterator[tuple]:
        """Yield (aware datetime, value-or-None) pairs."""
        tz = self.tzinfo
        for e, v, m in zip(self.epochs, self.values, self.missing):
            yield datetime.fromtimestamp(e, tz), (None if m else float(v))


def _parse_timestamp(text: str, tz, line_number: int) -> float:
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise ParseError(f"unparseable timestamp {text.strip()!r}", line_number)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=tz)
    return dt.timestamp()


def parse_series(text: str, schema: SeriesSchema) -> RawSeries:
    """Parse one channel CSV into a RawSeries.

    Rows are sorted by timestamp; duplicate timestamps collapse to the mean of
    their present values (counted on the result). Empty, 'nan' or infinite
    value cells become explicit missing entries.

    Args:
        text: full CSV text including the ``timestamp,<channel>`` header.
        schema: declared channel/unit/timezone/cadence.

    Raises:
        EmptyInputError: no data rows.
        ParseError: malformed row, with its line number.
        SchemaError: header channel mismatch, or observed cadence inconsistent
            with the declared interval.
    """
    lines = text.splitlines()
    if not lines:
        raise EmptyInputError(f"{schema.channel}: input is empty")

    header = [h.strip() for h in lines[0].split(",")]
    if len(header) != 2 or header[0] != "timestamp":
        raise ParseError(f"expected header 'timestamp,<channel>', got {lines[0]!r}", 1)
    if header[1] != schema.channel:
        raise SchemaError(
            f"file carries channel {header[1]!r}, schema declares {schema.channel!r}"
        )

    tz = resolve_timezone(schema.timezone)
    epochs, values, missing = [], [], []
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", line_number)
        epochs.append(_parse_timestamp(parts[0], tz, line_number))
        raw = parts[1].strip()
        if raw == "":
            values.append(0.0)
            missing.append(True)
            continue
        try:
            v = float(raw)
        except ValueError:
            raise ParseError(f"unparseable value {raw!r}", line_number)
        if math.isfinite(v):
            values.append(v)
            missing.append(False)
        else:
            values.append(0.0)
            missing.append(True)

    if not epochs:
        raise EmptyInputError(f"{schema.channel}: no data rows")

    e = np.array(epochs)
    v = np.array(values)
    m = np.array(missing, dtype=bool)
    order = np.argsort(e, kind="stable")
    e, v, m = e[order], v[order], m[order]

    dupes = 0
    if e.size > 1 and np.any(np.diff(e) == 0):
        # Collapse runs of equal timestamps to the mean of present values.
        uniq, start = np.unique(e, return_index=True)
        out_v = np.zeros(uniq.size)
        out_m = np.zeros(uniq.size, dtype=bool)
        bounds = np.append(start, e.size)
        for i in range(uniq.size):
            seg = slice(bounds[i], bounds[i + 1])
            present = ~m[seg]
            if np.any(present):
                out_v[i] = float(np.mean(v[seg][present]))
            else:
                out_m[i] = True
        dupes = int(e.size - uniq.size)
        log.warning("%s: collapsed %d duplicate timestamp rows", schema.channel, dupes)
        e, v, m = uniq, out_v, out_m

    if e.size >= 3:
        spacing = float(np.median(np.diff(e)))
        if abs(spacing - schema.interval_seconds) > CADENCE_TOLERANCE * schema.interval_seconds:
            raise SchemaError(
                f"{schema.channel}: median spacing {spacing:.1f}s inconsistent "
                f"with declared interval {schema.interval_seconds}s"
            )

    return RawSeries(
        channel=schema.channel,
        unit=schema.unit,
        interval_seconds=schema.interval_seconds,
        tz=schema.timezone,
        epochs=e,
        values=v,
        missing=m,
        duplicates_collapsed=dupes,
    )


def serialize_series(series: RawSeries) -> str:
    """Render a RawSeries back to the CSV format parse_series reads."""
    tz = series.tzinfo
    out = [f"timestamp,{series.channel}"]
    # tolist() yields Python floats, whose repr round-trips exactly
    for e, v, m in zip(series.epochs.tolist(), series.values.tolist(), series.missing):
        ts = datetime.fromtimestamp(e, tz).isoformat()
        out.append(f"{ts}," if m else f"{ts},{v!r}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class GapFillPolicy:
    """Limits for how long a missing run may be and still get filled."""

    max_interior: int = 30
    max_edge: int = 5

    def __post_init__(self):
        if self.max_interior < 0 or self.max_edge < 0:
            raise ConfigError("gap limits must be non-negative")


@dataclass(frozen=True)
class GapRecord:
    channel: str
    start_index: int
    start: datetime
    length: int
    method: str  # 'interpolated', 'edge-hold', or 'left-unfilled'


@dataclass
class GapReport:
    """What fill_gaps did to each missing run."""

    records: list = field(default_factory=list)

    def count(self, method: Optional[str] = None) -> int:
        if method is None:
            return len(self.records)
        return sum(1 for r in self.records if r.method == method)


def _missing_runs(mask: np.ndarray):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.append(idx[0], idx[breaks + 1])
    ends = np.append(idx[breaks], idx[-1])
    return list(zip(starts, ends))


def fill_gaps(series: RawSeries, policy: GapFillPolicy = GapFillPolicy()):
    """Fill short missing runs; leave long ones missing.

    Interior runs of up to ``policy.max_interior`` samples are linearly
    interpolated in time between the bounding present values (a single missing
    sample becomes the mean of its neighbors at regular cadence). Leading and
    trailing runs of up to ``policy.max_edge`` samples hold the nearest
    present value. Longer runs stay missing and are reported as such.

    Returns:
        (filled copy of the series, GapReport). Applying the fill twice yields
        the first application's output.

    Raises:
        UnfillableChannelError: if the series has no present values at all.
    """
    n = len(series)
    if n == 0 or np.all(series.missing):
        raise UnfillableChannelError(f"{series.channel}: no present values to fill from")

    values = series.values.copy()
    missing = series.missing.copy()
    tz = series.tzinfo
    report = GapReport()

    for s, e in _missing_runs(series.missing):
        length = int(e - s + 1)
        start_dt = datetime.fromtimestamp(series.epochs[s], tz)

        if s == 0 or e == n - 1:  # touches an edge; only hold is safe
            if length <= policy.max_edge:
                anchor = values[e + 1] if s == 0 else values[s - 1]
                values[s : e + 1] = anchor
                missing[s : e + 1] = False
                method = "edge-hold"
            else:
                method = "left-unfilled"
        elif length <= policy.max_interior:
            t_l, t_r = series.epochs[s - 1], series.epochs[e + 1]
            v_l, v_r = values[s - 1], values[e + 1]
            frac = (series.epochs[s : e + 1] - t_l) / (t_r - t_l)
            values[s : e + 1] = v_l + (v_r - v_l) * frac
            missing[s : e + 1] = False
            method = "interpolated"
        else:
            method = "left-unfilled"

        report.records.append(GapRecord(series.channel, int(s), start_dt, length, method))

    filled = replace(series, epochs=series.epochs.copy(), values=values, missing=missing)
    return filled, report


@dataclass
class DailySeries:
    """One channel aggregated to local calendar days.

    ``coverage`` is the fraction of expected samples present per day, clamped
    to [0, 1]; days under VALID_DAY_COVERAGE carry no value.
    """

    channel: str
    dates: list
    values: np.ndarray
    missing: np.ndarray
    coverage: np.ndarray


def _day_slices(series: RawSeries):
    """Split sample indices by local calendar day.

    Returns (list of dates, boundary index array of length len(dates)+1).
    """
    tz = series.tzinfo
    first = datetime.fromtimestamp(series.epochs[0], tz).date()
    last = datetime.fromtimestamp(series.epochs[-1], tz).date()
    n_days = (last - first).days + 1
    dates = [first + timedelta(days=i) for i in range(n_days)]
    boundaries = np.empty(n_days + 1)
    for i in range(n_days + 1):
        midnight = datetime.combine(first + timedelta(days=i), time(0), tzinfo=tz)
        boundaries[i] = midnight.timestamp()
    return dates, np.searchsorted(series.epochs, boundaries, side="left")


def resample_daily(series: RawSeries, how: str) -> DailySeries:
    """Aggregate a RawSeries to daily values in its local zone.

    Args:
        series: gap-filled interval series.
        how: 'sum' for quantities like energy, 'mean' for weather states.

    Only present samples enter the aggregate. A day whose present-sample
    coverage falls below VALID_DAY_COVERAGE is marked missing (its coverage is
    still recorded).
    """
    if how not in ("sum", "mean"):
        raise ConfigError(f"unknown aggregation {how!r}")
    if len(series) == 0:
        raise EmptyInputError(f"{series.channel}: empty series")

    expected = 86400.0 / series.interval_seconds
    dates, bounds = _day_slices(series)
    n_days = len(dates)
    values = np.zeros(n_days)
    missing = np.ones(n_days, dtype=bool)
    coverage = np.zeros(n_days)

    for i in range(n_days):
        seg = slice(bounds[i], bounds[i + 1])
        present = series.values[seg][~series.missing[seg]]
        coverage[i] = min(1.0, present.size / expected)
        if coverage[i] < VALID_DAY_COVERAGE:
            continue
        missing[i] = False
        values[i] = float(np.sum(present)) if how == "sum" else float(np.mean(present))

    return DailySeries(series.channel, dates, values, missing, coverage)


@dataclass
class DailyTable:
    """Joined daily energy and weather, the modeling substrate.

    Rows where energy or any weather channel is missing are flagged
    ``excluded`` and skipped by feature construction downstream.
    """

    dates: list
    energy: np.ndarray
    weather: dict
    weather_missing: dict
    energy_missing: np.ndarray
    coverage: dict
    excluded: np.ndarray

    def __len__(self):
        return len(self.dates)

    @property
    def n_excluded(self) -> int:
        return int(np.sum(self.excluded))

    def date_mask(self, start: date, end: date) -> np.ndarray:
        """Boolean mask of rows with start <= date <= end."""
        return np.array([start <= d <= end for d in self.dates])


def align(
    energy: DailySeries,
    weather: dict,
    date_range: Optional[tuple] = None,
) -> DailyTable:
    """Inner-join daily energy with daily weather channels on date.

    Args:
        energy: daily energy series (sum-aggregated kWh).
        weather: mapping of channel name to its DailySeries.
        date_range: optional (first, last) dates to keep, inclusive.

    Raises:
        NoOverlapError: if the join is empty.
        DataError: if a present energy value is negative.
    """
    common = set(energy.dates)
    for w in weather.values():
        common &= set(w.dates)
    if date_range is not None:
        lo, hi = date_range
        common = {d for d in common if lo <= d <= hi}
    if not common:
        raise NoOverlapError("energy and weather share no dates in range")
    dates = sorted(common)

    def pick(ds: DailySeries):
        index = {d: i for i, d in enumerate(ds.dates)}
        rows = [index[d] for d in dates]
        return ds.values[rows].copy(), ds.missing[rows].copy(), ds.coverage[rows].copy()

    e_vals, e_miss, e_cov = pick(energy)
    if np.any(e_vals[~e_miss] < 0):
        raise DataError("negative daily energy after resampling")

    weather_vals, weather_miss = {}, {}
    coverage = {energy.channel: e_cov}
    excluded = e_miss.copy()
    for name in sorted(weather):
        vals, miss, cov = pick(weather[name])
        weather_vals[name] = vals
        weather_miss[name] = miss
        coverage[name] = cov
        excluded |= miss

    return DailyTable(
        dates=dates,
        energy=e_vals,
        weather=weather_vals,
        weather_missing=weather_miss,
        energy_missing=e_miss,
        coverage=coverage,
        excluded=excluded,
    )
