"""Shared domain types, partial sums, quantiles and ensemble file I/O.

A path of length n is stored as its unit-time increments d_0 .. d_{n-1};
positions are anchored at X_0 = 0.  The three per-path partial sums at
integer time 1 <= t <= n are

    X_t = sum_{s<t} d_s        (position)
    Y_t = sum_{s<t} |d_s|      (total absolute displacement)
    Z_t = sum_{s<t} d_s^2      (integrated square displacement)

Statistic series are sampled on a log-spaced integer time grid whose i-th
point (i = 1..count) is round[t_min * (t_max/t_min)^(i/count)], deduplicated
and sorted, so the last point always equals t_max.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator

import numpy as np

from .errors import (
    DomainError,
    EmptyInputError,
    FileFormatError,
    InvalidRangeError,
)

#: Recognized statistic kinds for StatisticSeries.
STATISTIC_KINDS = (
    "rs_mean",
    "width_iqr",
    "median_y",
    "median_z",
    "mean_abs_increment",
)

_MAGIC = b"ANSC"
_VERSION = 1


def _as_int(value, name: str) -> int:
    """Coerce an integral number, rejecting fractional floats."""
    if isinstance(value, (bool, np.bool_)):
        raise InvalidRangeError(f"{name} must be an integer, got {value!r}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)) and float(value).is_integer():
        return int(value)
    raise InvalidRangeError(f"{name} must be an integer, got {value!r}")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Log-spaced integer observation times.

    count is the requested number of points; points holds the deduplicated
    sorted grid, which may be shorter.
    """

    t_min: int
    t_max: int
    count: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.ndim != 1 or pts.size == 0:
            raise InvalidRangeError("grid points must be a nonempty 1-D array")
        if np.any(np.diff(pts) <= 0):
            raise InvalidRangeError("grid points must be strictly increasing")
        if pts[0] < self.t_min or pts[-1] != self.t_max:
            raise InvalidRangeError(
                "grid points must lie in [t_min, t_max] and end at t_max"
            )
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return int(self.points.size)

    def __iter__(self) -> Iterator[int]:
        return iter(self.points.tolist())

    def to_dict(self) -> dict:
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "count": self.count,
            "points": self.points.tolist(),
        }


def make_time_grid(t_min, t_max, count) -> TimeGrid:
    """Build the log-spaced integer grid round[t_min*(t_max/t_min)^(i/count)].

    Parameters
    ----------
    t_min, t_max : int
        Inclusive time range, 1 <= t_min < t_max.
    count : int
        Number of points requested (i runs 1..count); duplicates arising
        from rounding are dropped.

    Raises
    ------
    InvalidRangeError
        If the range or count is unusable.
    """
    t_min = _as_int(t_min, "t_min")
    t_max = _as_int(t_max, "t_max")
    count = _as_int(count, "count")
    if t_min < 1:
        raise InvalidRangeError(f"t_min must be >= 1, got {t_min}")
    if t_max <= t_min:
        raise InvalidRangeError(f"t_max must exceed t_min, got [{t_min}, {t_max}]")
    if count < 1:
        raise InvalidRangeError(f"count must be >= 1, got {count}")
    i = np.arange(1, count + 1, dtype=np.float64)
    raw = t_min * (t_max / t_min) ** (i / count)
    # Nearest integer, half away from zero (values are positive here).
    pts = np.unique(np.floor(raw + 0.5).astype(np.int64))
    return TimeGrid(t_min=t_min, t_max=t_max, count=count, points=pts)


@dataclass
class PathEnsemble:
    """A set of equal-length paths stored as unit-time increments.

    Attributes
    ----------
    increments : ndarray, shape (n_paths, n_steps)
        Increment d_s of path p at step s, float64.
    descriptor : str
        Free-form provenance record (JSON for generated ensembles).
    master_seed : int
        Seed that keyed the per-path random streams (0 for external data).
    """

    increments: np.ndarray
    descriptor: str = ""
    master_seed: int = 0

    def __post_init__(self):
        arr = np.asarray(self.increments, dtype=np.float64)
        if arr.ndim != 2:
            raise DomainError(f"increments must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise EmptyInputError(f"ensemble must be nonempty, got shape {arr.shape}")
        self.increments = arr
        self.master_seed = int(self.master_seed)

    @property
    def n_paths(self) -> int:
        return int(self.increments.shape[0])

    @property
    def n_steps(self) -> int:
        return int(self.increments.shape[1])


@dataclass
class StatisticSeries:
    """One ensemble statistic sampled on a time grid.

    variances, when present, are per-point variances of the statistic
    (used as inverse fit weights).
    """

    grid: TimeGrid
    values: np.ndarray
    variances: np.ndarray | None
    statistic_kind: str

    def __post_init__(self):
        if self.statistic_kind not in STATISTIC_KINDS:
            raise DomainError(f"unknown statistic_kind {self.statistic_kind!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.grid),):
            raise DomainError(
                f"values shape {vals.shape} does not match grid length {len(self.grid)}"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("series values must be finite")
        if np.any(vals < 0.0):
            raise DomainError(f"{self.statistic_kind} values must be nonnegative")
        self.values = vals
        if self.variances is not None:
            var = np.asarray(self.variances, dtype=np.float64)
            if var.shape != vals.shape:
                raise DomainError("variances must match values in shape")
            if not np.all(np.isfinite(var)) or np.any(var < 0.0):
                raise DomainError("variances must be finite and nonnegative")
            self.variances = var


@dataclass(frozen=True)
class ExponentEstimate:
    """A fitted exponent with its bootstrap standard error and flags."""

    value: float
    stderr: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "flags": list(self.flags)}


@dataclass(frozen=True)
class ExponentReport:
    """The four scaling exponents and their internal consistency check.

    The sum check J + L + M - 1 and the consistency verdict are always
    recomputed from the stored exponents, never stored independently.
    """

    joseph: ExponentEstimate
    latent: ExponentEstimate
    moses: ExponentEstimate
    hurst: ExponentEstimate
    k_sigma: float = 3.0

    @property
    def sum_value(self) -> float:
        return self.joseph.value + self.latent.value + self.moses.value - 1.0

    @property
    def sum_stderr(self) -> float:
        return float(
            np.sqrt(
                self.joseph.stderr**2 + self.latent.stderr**2 + self.moses.stderr**2
            )
        )

    @property
    def consistent(self) -> bool:
        tol = self.k_sigma * float(
            np.sqrt(self.hurst.stderr**2 + self.sum_stderr**2)
        )
        return bool(abs(self.hurst.value - self.sum_value) <= tol)

    def to_dict(self) -> dict:
        return {
            "joseph": self.joseph.to_dict(),
            "latent": self.latent.to_dict(),
            "moses": self.moses.to_dict(),
            "hurst": self.hurst.to_dict(),
            "sum_check": {"value": self.sum_value, "stderr": self.sum_stderr},
            "k_sigma": self.k_sigma,
            "consistent": self.consistent,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def partial_sums_grid(
    ensemble: PathEnsemble, grid: TimeGrid
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-path (X_t, Y_t, Z_t) at every grid time, each (n_paths, len(grid)).

    Raises
    ------
    DomainError
        If any grid time exceeds the path length.
    """
    if grid.t_max > ensemble.n_steps:
        raise DomainError(
            f"grid extends to t={grid.t_max} but paths have {ensemble.n_steps} steps"
        )
    idx = grid.points - 1  # cumsum index of time t is t-1
    n_paths, n_steps = ensemble.increments.shape
    x = np.empty((n_paths, len(grid)))
    y = np.empty_like(x)
    z = np.empty_like(x)
    # Chunk rows so the cumsum scratch stays modest.
    chunk = max(1, (1 << 24) // n_steps)
    for lo in range(0, n_paths, chunk):
        hi = min(lo + chunk, n_paths)
        d = ensemble.increments[lo:hi]
        x[lo:hi] = np.cumsum(d, axis=1)[:, idx]
        y[lo:hi] = np.cumsum(np.abs(d), axis=1)[:, idx]
        z[lo:hi] = np.cumsum(d * d, axis=1)[:, idx]
    return x, y, z


def partial_sums(
    ensemble: PathEnsemble, t
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-path (X_t, Y_t, Z_t) at a single integer time 1 <= t <= n_steps."""
    t = _as_int(t, "t")
    if not 1 <= t <= ensemble.n_steps:
        raise DomainError(
            f"t must lie in [1, {ensemble.n_steps}], got {t}"
        )
    d = ensemble.increments[:, :t]
    return d.sum(axis=1), np.abs(d).sum(axis=1), (d * d).sum(axis=1)


def quantile(values, q) -> float:
    """Quantile with linear interpolation between order statistics.

    Sorting ties is harmless; the q-th quantile of v_(0) <= ... <= v_(n-1)
    interpolates at fractional rank (n - 1) * q.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise EmptyInputError("quantile of an empty sequence is undefined")
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(vals, q))


# ---------------------------------------------------------------------------
# Ensemble file formats
# ---------------------------------------------------------------------------
#
# Binary layout (little-endian throughout):
#   bytes 0-3    magic "ANSC"
#   uint32       format version (currently 1)
#   uint64       n_paths
#   uint64       n_steps
#   float64[]    increments, row-major, n_paths * n_steps values
#   uint32       metadata byte length
#   bytes        UTF-8 JSON {"descriptor": ..., "master_seed": ...}
#
# The CSV alternative holds one path per row with no header and carries no
# metadata (descriptor and master_seed are dropped).

_HEADER = struct.Struct("<4sIQQ")
_TRAILER_LEN = struct.Struct("<I")


def save_ensemble(ensemble: PathEnsemble, path, fmt: str | None = None) -> None:
    """Write an ensemble to disk; fmt is "binary", "csv" or inferred from suffix."""
    path = Path(path)
    fmt = _resolve_format(path, fmt)
    if fmt == "csv":
        np.savetxt(path, ensemble.increments, delimiter=",", fmt="%.17g")
        return
    meta = json.dumps(
        {"descriptor": ensemble.descriptor, "master_seed": ensemble.master_seed}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, ensemble.n_paths, ensemble.n_steps))
        fh.write(np.ascontiguousarray(ensemble.increments, dtype="<f8").tobytes())
        fh.write(_TRAILER_LEN.pack(len(meta)))
        fh.write(meta)


def load_ensemble(path, fmt: str | None = None) -> PathEnsemble:
    """Read an ensemble written by save_ensemble (format sniffed by default)."""
    path = Path(path)
    if fmt is None:
        with open(path, "rb") as fh:
            fmt = "binary" if fh.read(4) == _MAGIC else "csv"
    if fmt == "csv":
        arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        return PathEnsemble(increments=arr)
    if fmt != "binary":
        raise DomainError(f"unknown ensemble format {fmt!r}")
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FileFormatError(f"{path}: truncated header")
        magic, version, n_paths, n_steps = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise FileFormatError(f"{path}: unsupported format version {version}")
        n_values = n_paths * n_steps
        data = fh.read(8 * n_values)
        if len(data) < 8 * n_values:
            raise FileFormatError(f"{path}: truncated increment block")
        raw_len = fh.read(_TRAILER_LEN.size)
        if len(raw_len) < _TRAILER_LEN.size:
            raise FileFormatError(f"{path}: missing metadata length")
        (meta_len,) = _TRAILER_LEN.unpack(raw_len)
        meta_raw = fh.read(meta_len)
        if len(meta_raw) < meta_len:
            raise FileFormatError(f"{path}: truncated metadata block")
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: malformed metadata JSON") from exc
    arr = np.frombuffer(data, dtype="<f8").reshape(n_paths, n_steps)
    return PathEnsemble(
        increments=arr.astype(np.float64, copy=True),
        descriptor=str(meta.get("descriptor", "")),
        master_seed=int(meta.get("master_seed", 0)),
    )


def _resolve_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise DomainError(f"unknown ensemble format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "binary"


def series_to_csv(series: StatisticSeries, path_or_file) -> None:
    """Write a series as CSV columns t, value, variance (nan when absent)."""
    var = series.variances
    if var is None:
        var = np.full(len(series.grid), np.nan)
    rows = np.column_stack([series.grid.points.astype(np.float64), series.values, var])
    np.savetxt(
        path_or_file, rows, delimiter=",", fmt="%.17g", header="t,value,variance", comments=""
    )
