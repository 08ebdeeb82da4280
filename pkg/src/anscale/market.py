"""Intraday price ingestion and the market estimation pipeline.

A session matrix holds one close price per minute of the trading session
(rows are days).  Ingestion forward-fills missing minutes from the last
recorded price, backfills a day's leading gap from its first price, drops
days with no prices at all, drops days whose trailing gap exceeds the
half-day threshold, and keeps the most recent max_days days.

Minute returns are d_t = ln(P_t / P_{t-1}), so a 390-minute session gives
389 increments per day and days play the role of ensemble paths.
Detrending subtracts the ensemble-mean increment at each minute, which
removes the deterministic intraday drift and is idempotent.  Interval
extraction re-anchors a window of increments as a fresh ensemble starting
at X = 0.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .core import PathEnsemble, StatisticSeries, TimeGrid, make_time_grid
from .errors import (
    DomainError,
    IntervalError,
    MalformedRowError,
    NoDaysError,
    NonPositivePriceError,
    TooFewPathsError,
)
from .estimators import (
    EnsembleAnalysis,
    FitOptions,
    analyze_ensemble,
    mean_abs_increment_profile,
)

_DATE_FORMATS = ("%Y-%m-%d", "%m/%d/%Y", "%Y%m%d", "%d/%m/%Y")


@dataclass(frozen=True)
class SessionSpec:
    """Trading-session shape and ingestion policy."""

    open_time: str = "09:30"
    n_minutes: int = 390
    max_days: int = 2500
    max_trailing_gap: int = 60

    def __post_init__(self):
        if self.n_minutes < 2:
            raise DomainError(f"n_minutes must be >= 2, got {self.n_minutes}")
        if self.max_days < 1:
            raise DomainError(f"max_days must be >= 1, got {self.max_days}")
        if self.max_trailing_gap < 0:
            raise DomainError(
                f"max_trailing_gap must be >= 0, got {self.max_trailing_gap}"
            )
        if _parse_time_minutes(self.open_time) is None:
            raise DomainError(f"open_time must be HH:MM, got {self.open_time!r}")

    @property
    def open_minute(self) -> int:
        return _parse_time_minutes(self.open_time)  # validated above


@dataclass(frozen=True)
class BarFormat:
    """Column layout of a delimiter-separated minute-bar file.

    Only date, time and close are consumed.  has_header None sniffs the
    first row (an unparseable first row is treated as a header).
    """

    delimiter: str = ","
    date_col: int = 0
    time_col: int = 1
    close_col: int = 5
    has_header: bool | None = None

    def __post_init__(self):
        if min(self.date_col, self.time_col, self.close_col) < 0:
            raise DomainError("column indices must be >= 0")
        if not self.delimiter:
            raise DomainError("delimiter must be nonempty")


@dataclass
class SessionMatrix:
    """Gap-filled close prices, one row per retained day."""

    close: np.ndarray
    dates: list[str]
    symbol: str = ""
    open_time: str = "09:30"

    def __post_init__(self):
        arr = np.asarray(self.close, dtype=np.float64)
        if arr.ndim != 2:
            raise DomainError("close must be 2-D (days x minutes)")
        self.close = arr

    @property
    def n_days(self) -> int:
        return int(self.close.shape[0])

    @property
    def n_minutes(self) -> int:
        return int(self.close.shape[1])


@dataclass(frozen=True)
class IntervalSpec:
    """Half-open window [start, end) of increment indices within a day."""

    start: int
    end: int
    t_min: int = 10
    grid_count: int = 60

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise IntervalError(
                f"interval must satisfy 0 <= start < end, got [{self.start}, {self.end})"
            )
        if not 1 <= self.t_min < self.end - self.start:
            raise IntervalError(
                f"t_min must lie in [1, {self.end - self.start}), got {self.t_min}"
            )
        if self.grid_count < 1:
            raise IntervalError(f"grid_count must be >= 1, got {self.grid_count}")

    @property
    def n_steps(self) -> int:
        return self.end - self.start

    def grid(self) -> TimeGrid:
        return make_time_grid(self.t_min, self.n_steps, self.grid_count)


def _parse_time_minutes(text: str) -> int | None:
    parts = text.strip().split(":")
    if len(parts) not in (2, 3):
        return None
    try:
        hours = int(parts[0])
        minutes = int(parts[1])
    except ValueError:
        return None
    if not (0 <= hours < 24 and 0 <= minutes < 60):
        return None
    return hours * 60 + minutes


def _date_sort_key(dates: list[str]):
    """Chronological key when a known date format fits, else lexicographic."""
    sample = dates[0]
    for fmt in _DATE_FORMATS:
        try:
            datetime.strptime(sample, fmt)
        except ValueError:
            continue

        def key(d, fmt=fmt):
            try:
                return datetime.strptime(d, fmt)
            except ValueError as exc:
                raise MalformedRowError(0, f"inconsistent date {d!r}") from exc

        return key
    return lambda d: d


def ingest_prices(
    source,
    session: SessionSpec | None = None,
    fmt: BarFormat | None = None,
    symbol: str = "",
) -> SessionMatrix:
    """Parse minute bars into a gap-filled session matrix.

    source is a path or an open text file.  Rows outside the session
    window are ignored; unparseable rows raise MalformedRowError with
    their line number.

    Raises
    ------
    MalformedRowError
        On a row with missing columns, a bad time, or a non-positive or
        non-numeric close.
    NoDaysError
        If no day survives ingestion.
    """
    session = session or SessionSpec()
    fmt = fmt or BarFormat()
    if hasattr(source, "read"):
        lines = source
        name = getattr(source, "name", "")
    else:
        lines = open(source, "r", encoding="utf-8")
        name = str(source)
    if not symbol and name:
        symbol = Path(name).stem
    open_minute = session.open_minute
    n_min = session.n_minutes
    need = max(fmt.date_col, fmt.time_col, fmt.close_col) + 1
    days: dict[str, np.ndarray] = {}
    try:
        pending_header = fmt.has_header is not False
        explicit_header = fmt.has_header is True
        for line_no, raw in enumerate(lines, 1):
            line = raw.strip()
            if not line:
                continue
            if pending_header and explicit_header:
                pending_header = False
                continue
            fields = line.split(fmt.delimiter)
            if len(fields) < need:
                if pending_header:
                    pending_header = False
                    continue
                raise MalformedRowError(
                    line_no, f"expected >= {need} columns, got {len(fields)}"
                )
            minute = _parse_time_minutes(fields[fmt.time_col])
            try:
                close = float(fields[fmt.close_col])
            except ValueError:
                close = None
            if minute is None or close is None:
                if pending_header:
                    pending_header = False
                    continue
                reason = "bad time field" if minute is None else "bad close field"
                raise MalformedRowError(line_no, reason)
            pending_header = False
            if not np.isfinite(close) or close <= 0.0:
                raise MalformedRowError(line_no, f"non-positive close {close}")
            idx = minute - open_minute
            if not 0 <= idx < n_min:
                continue  # outside the session window
            date = fields[fmt.date_col].strip()
            row = days.get(date)
            if row is None:
                row = np.full(n_min, np.nan)
                days[date] = row
            row[idx] = close
    finally:
        if lines is not source:
            lines.close()

    if not days:
        raise NoDaysError("no rows inside the session window")
    ordered = sorted(days, key=_date_sort_key(list(days)))
    kept_dates: list[str] = []
    kept_rows: list[np.ndarray] = []
    for date in ordered:
        row = days[date]
        finite = np.isfinite(row)
        if not finite.any():
            warnings.warn(f"dropping {date}: no prices in session", stacklevel=2)
            continue
        last = int(np.flatnonzero(finite)[-1])
        if (n_min - 1) - last > session.max_trailing_gap:
            warnings.warn(
                f"dropping {date}: trailing gap of {(n_min - 1) - last} minutes "
                f"exceeds {session.max_trailing_gap} (half day?)",
                stacklevel=2,
            )
            continue
        first = int(np.flatnonzero(finite)[0])
        if first > 0:
            row[:first] = row[first]
            finite = np.isfinite(row)
        carry = np.maximum.accumulate(np.where(finite, np.arange(n_min), 0))
        kept_rows.append(row[carry])
        kept_dates.append(date)
    if not kept_rows:
        raise NoDaysError("no usable day survived ingestion")
    if len(kept_rows) > session.max_days:
        kept_rows = kept_rows[-session.max_days :]
        kept_dates = kept_dates[-session.max_days :]
    return SessionMatrix(
        close=np.vstack(kept_rows),
        dates=kept_dates,
        symbol=symbol,
        open_time=session.open_time,
    )


def to_return_ensemble(sessions: SessionMatrix) -> PathEnsemble:
    """Minute log-returns ln(P_t / P_{t-1}); days become ensemble paths."""
    close = sessions.close
    if close.shape[1] < 2:
        raise DomainError("need at least 2 minutes per day for returns")
    if np.any(~np.isfinite(close)) or np.any(close <= 0.0):
        raise NonPositivePriceError("session matrix contains non-positive prices")
    ratios = close[:, 1:] / close[:, :-1]
    descriptor = json.dumps(
        {
            "source": "market",
            "symbol": sessions.symbol,
            "n_days": sessions.n_days,
            "open_time": sessions.open_time,
        },
        sort_keys=True,
    )
    return PathEnsemble(increments=np.log(ratios), descriptor=descriptor)


def _descriptor_with(ensemble: PathEnsemble, **updates) -> str:
    try:
        record = json.loads(ensemble.descriptor)
        if not isinstance(record, dict):
            return ensemble.descriptor
    except (json.JSONDecodeError, TypeError):
        return ensemble.descriptor
    record.update(updates)
    return json.dumps(record, sort_keys=True)


def detrend(ensemble: PathEnsemble) -> PathEnsemble:
    """Subtract the per-time ensemble mean increment (idempotent)."""
    if ensemble.n_paths < 2:
        raise TooFewPathsError(
            f"detrending needs >= 2 paths, got {ensemble.n_paths}"
        )
    centered = ensemble.increments - ensemble.increments.mean(axis=0, keepdims=True)
    return PathEnsemble(
        increments=centered,
        descriptor=_descriptor_with(ensemble, detrended=True),
        master_seed=ensemble.master_seed,
    )


def extract_interval(ensemble: PathEnsemble, interval: IntervalSpec) -> PathEnsemble:
    """Re-anchor increments [start, end) as a fresh ensemble (X = 0 at start)."""
    if interval.end > ensemble.n_steps:
        raise IntervalError(
            f"interval [{interval.start}, {interval.end}) exceeds "
            f"{ensemble.n_steps} increments per path"
        )
    window = ensemble.increments[:, interval.start : interval.end].copy()
    return PathEnsemble(
        increments=window,
        descriptor=_descriptor_with(
            ensemble, interval=[interval.start, interval.end]
        ),
        master_seed=ensemble.master_seed,
    )


DEFAULT_INTERVALS = (IntervalSpec(30, 190), IntervalSpec(260, 380))


@dataclass
class IntervalResult:
    """Exponent analysis of one intraday window."""

    interval: IntervalSpec
    analysis: EnsembleAnalysis


@dataclass
class MarketAnalysis:
    """Full market pipeline output."""

    symbol: str
    n_days: int
    dates: list[str]
    profile: StatisticSeries
    intervals: list[IntervalResult] = field(default_factory=list)


def analyze_market(
    source,
    intervals: tuple[IntervalSpec, ...] | None = None,
    session: SessionSpec | None = None,
    fmt: BarFormat | None = None,
    options: FitOptions | None = None,
    symbol: str = "",
) -> MarketAnalysis:
    """ingest -> returns -> detrend -> per-interval exponent analysis.

    The mean-absolute-increment profile is computed on the full detrended
    day; each interval is then re-anchored and analyzed on its own
    log-spaced grid.
    """
    if intervals is None:
        intervals = DEFAULT_INTERVALS
    sessions = ingest_prices(source, session=session, fmt=fmt, symbol=symbol)
    returns = to_return_ensemble(sessions)
    detrended = detrend(returns)
    profile = mean_abs_increment_profile(detrended)
    results = []
    for spec in intervals:
        sub = extract_interval(detrended, spec)
        analysis = analyze_ensemble(sub, spec.grid(), options)
        results.append(IntervalResult(interval=spec, analysis=analysis))
    return MarketAnalysis(
        symbol=sessions.symbol,
        n_days=sessions.n_days,
        dates=sessions.dates,
        profile=profile,
        intervals=results,
    )
