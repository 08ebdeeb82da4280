"""Ensemble statistic series over a time grid and the exponent report.

Per-path quantities at grid time t (increments d_0..d_{t-1}, X_0 = 0):

    bridge range   R_t = max_{1<=s<=t}[X_s - (s/t) X_t]
                       - min_{1<=s<=t}[X_s - (s/t) X_t]
    spread         S_t = sqrt(Z_t/t - (X_t/t)^2)

Series kinds and the exponents their leading power laws estimate:

    rs_mean    ensemble mean of R_t/S_t               ~ t^J
    width_iqr  interquartile range of X_t             ~ t^H
    median_y   ensemble median of Y_t                 ~ t^(M+1/2)
    median_z   ensemble median of Z_t                 ~ t^(2L+2M-1)

Paths with S_t = 0 are excluded from rs_mean at that t; a grid point with
fewer than two usable paths makes the statistic degenerate.  The exponent
report combines the four fitted leading exponents, propagates bootstrap
errors in quadrature, and checks |H - (J + L + M - 1)| against k combined
standard errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import (
    ExponentEstimate,
    ExponentReport,
    PathEnsemble,
    StatisticSeries,
    TimeGrid,
)
from .errors import (
    AnscaleError,
    DegenerateEnsembleError,
    DomainError,
    EstimationError,
    TooFewPathsError,
)
from .parallel import run_chunked

#: Statistic kind -> exponent stage it feeds.
STAGE_EXPONENT = {
    "rs_mean": "joseph",
    "median_y": "moses",
    "median_z": "latent",
    "width_iqr": "hurst",
}

_STAGE_ORDER = ("rs_mean", "median_y", "median_z", "width_iqr")


@dataclass
class PathGridStats:
    """Per-path statistics at every grid time, shape (n_paths, len(grid)).

    rs holds R_t/S_t with NaN where S_t = 0; x, y, z hold the partial
    sums X_t, Y_t, Z_t.
    """

    grid: TimeGrid
    rs: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray


def compute_path_stats(
    ensemble: PathEnsemble, grid: TimeGrid, threads: int | None = None
) -> PathGridStats:
    """One pass over each path: R/S ratios and partial sums at grid times."""
    if grid.t_max > ensemble.n_steps:
        raise DomainError(
            f"grid extends to t={grid.t_max} but paths have {ensemble.n_steps} steps"
        )
    n_paths = ensemble.n_paths
    n_grid = len(grid)
    rs = np.empty((n_paths, n_grid))
    x = np.empty_like(rs)
    y = np.empty_like(rs)
    z = np.empty_like(rs)
    inc = np.ascontiguousarray(ensemble.increments)
    pts = grid.points

    def worker(lo: int, hi: int) -> None:
        _kernels.grid_stats_block(inc[lo:hi], pts, rs[lo:hi], x[lo:hi], y[lo:hi], z[lo:hi])

    run_chunked(worker, n_paths, threads)
    return PathGridStats(grid=grid, rs=rs, x=x, y=y, z=z)


def series_from_stats(
    ensemble: PathEnsemble, kind: str, stats: PathGridStats
) -> StatisticSeries:
    """Reduce per-path statistics to one ensemble series."""
    if kind == "rs_mean":
        finite = np.isfinite(stats.rs)
        counts = finite.sum(axis=0)
        if np.any(counts < 2):
            worst = stats.grid.points[int(np.argmin(counts))]
            raise DegenerateEnsembleError(
                f"rescaled range undefined: fewer than 2 paths with S_t > 0 at t={worst}"
            )
        masked = np.where(finite, stats.rs, np.nan)
        values = np.nanmean(masked, axis=0)
        variances = np.nanvar(masked, axis=0, ddof=1) / counts
        return StatisticSeries(stats.grid, values, variances, "rs_mean")
    if kind == "width_iqr":
        if ensemble.n_paths < 4:
            raise TooFewPathsError(
                f"interquartile width needs >= 4 paths, got {ensemble.n_paths}"
            )
        hi, lo = np.quantile(stats.x, (0.75, 0.25), axis=0)
        return StatisticSeries(stats.grid, hi - lo, None, "width_iqr")
    if kind in ("median_y", "median_z"):
        if ensemble.n_paths < 2:
            raise TooFewPathsError(
                f"ensemble median needs >= 2 paths, got {ensemble.n_paths}"
            )
        source = stats.y if kind == "median_y" else stats.z
        return StatisticSeries(stats.grid, np.median(source, axis=0), None, kind)
    raise DomainError(f"unknown statistic kind {kind!r}")


def rs_series(
    ensemble: PathEnsemble,
    grid: TimeGrid,
    stats: PathGridStats | None = None,
    threads: int | None = None,
) -> StatisticSeries:
    """Ensemble mean of R_t/S_t over the grid (per-path var as variances)."""
    if stats is None:
        stats = compute_path_stats(ensemble, grid, threads)
    return series_from_stats(ensemble, "rs_mean", stats)


def width_series(
    ensemble: PathEnsemble,
    grid: TimeGrid,
    stats: PathGridStats | None = None,
    threads: int | None = None,
) -> StatisticSeries:
    """Interquartile range of positions X_t over the grid."""
    if stats is None:
        stats = compute_path_stats(ensemble, grid, threads)
    return series_from_stats(ensemble, "width_iqr", stats)


def median_y_series(
    ensemble: PathEnsemble,
    grid: TimeGrid,
    stats: PathGridStats | None = None,
    threads: int | None = None,
) -> StatisticSeries:
    """Ensemble median of Y_t over the grid."""
    if stats is None:
        stats = compute_path_stats(ensemble, grid, threads)
    return series_from_stats(ensemble, "median_y", stats)


def median_z_series(
    ensemble: PathEnsemble,
    grid: TimeGrid,
    stats: PathGridStats | None = None,
    threads: int | None = None,
) -> StatisticSeries:
    """Ensemble median of Z_t over the grid."""
    if stats is None:
        stats = compute_path_stats(ensemble, grid, threads)
    return series_from_stats(ensemble, "median_z", stats)


def mean_abs_increment_profile(
    ensemble: PathEnsemble, subtract_mean: bool = False
) -> StatisticSeries:
    """Ensemble mean of |d_k| labeled by time t = k + 1, for every step.

    With subtract_mean the per-time ensemble mean increment is removed
    first (a no-op on detrended data).  Nonstationary scaling shows up as
    a power law t^(M - 1/2) in this profile.
    """
    inc = ensemble.increments
    if subtract_mean:
        inc = inc - inc.mean(axis=0, keepdims=True)
    n_steps = ensemble.n_steps
    points = np.arange(1, n_steps + 1, dtype=np.int64)
    grid = TimeGrid(t_min=1, t_max=n_steps, count=n_steps, points=points)
    mags = np.abs(inc)
    values = mags.mean(axis=0)
    variances = None
    if ensemble.n_paths >= 2:
        variances = mags.var(axis=0, ddof=1) / ensemble.n_paths
    return StatisticSeries(grid, values, variances, "mean_abs_increment")


def autocorrelation(
    ensemble: PathEnsemble, max_lag: int, transform: str = "identity"
) -> np.ndarray:
    """Pooled Pearson autocorrelation of (transformed) increments.

    All lagged pairs from all paths are pooled; entry k of the result is
    the correlation at lag k + 1.  transform is "identity", "absolute",
    or "square".
    """
    max_lag = int(max_lag)
    if not 1 <= max_lag < ensemble.n_steps:
        raise DomainError(
            f"max_lag must lie in [1, {ensemble.n_steps - 1}], got {max_lag}"
        )
    if transform == "identity":
        f = ensemble.increments
    elif transform == "absolute":
        f = np.abs(ensemble.increments)
    elif transform == "square":
        f = np.square(ensemble.increments)
    else:
        raise DomainError(f"unknown transform {transform!r}")
    out = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        a = f[:, :-lag]
        b = f[:, lag:]
        n = a.size
        ma = a.mean()
        mb = b.mean()
        va = float((a * a).sum() / n - ma * ma)
        vb = float((b * b).sum() / n - mb * mb)
        if va <= 0.0 or vb <= 0.0:
            raise DegenerateEnsembleError(
                f"zero variance at lag {lag}; correlation undefined"
            )
        cov = float((a * b).sum() / n - ma * mb)
        out[lag - 1] = cov / math.sqrt(va * vb)
    return out


# ---------------------------------------------------------------------------
# Exponent pipeline
# ---------------------------------------------------------------------------


@dataclass
class FitOptions:
    """Knobs for the estimation pipeline."""

    n_replicates: int = 200
    seed: int | None = None
    k_sigma: float = 3.0
    restarts: int = 200
    threads: int | None = None


@dataclass
class EnsembleAnalysis:
    """Full estimation output: report plus per-statistic fits and series."""

    report: ExponentReport
    bootstrap: dict  # statistic kind -> fitting.BootstrapResult
    grid: TimeGrid
    options: FitOptions = field(default_factory=FitOptions)


def _descriptor_rs_unreliable(ensemble: PathEnsemble) -> bool:
    try:
        record = json.loads(ensemble.descriptor)
    except (json.JSONDecodeError, TypeError):
        return False
    if not isinstance(record, dict):
        return False
    if record.get("rs_unreliable"):
        return True
    joseph = record.get("joseph")
    return (
        record.get("family") in ("FLM", "SFLM")
        and isinstance(joseph, (int, float))
        and joseph < 0.5
    )


def analyze_ensemble(
    ensemble: PathEnsemble, grid: TimeGrid, options: FitOptions | None = None
) -> EnsembleAnalysis:
    """Run the four-statistic pipeline and assemble the exponent report.

    Stages run in the order rs_mean (J), median_y (M), median_z (L),
    width_iqr (H); a failure is re-raised as EstimationError naming the
    exponent whose stage broke.
    """
    from . import fitting  # runtime import; fitting also imports us

    if options is None:
        options = FitOptions()
    stats = compute_path_stats(ensemble, grid, options.threads)
    results = {}
    for kind in _STAGE_ORDER:
        try:
            results[kind] = fitting.bootstrap_many(
                ensemble,
                grid,
                (kind,),
                n_replicates=options.n_replicates,
                seed=options.seed,
                threads=options.threads,
                stats=stats,
                restarts=options.restarts,
            )[kind]
        except AnscaleError as exc:
            raise EstimationError(STAGE_EXPONENT[kind], str(exc)) from exc

    def err(kind: str, name: str = "omega") -> float:
        stderr = results[kind].fit.stderr or {}
        return float(stderr.get(name, math.nan))

    j_val = results["rs_mean"].fit.omega
    j_err = err("rs_mean")
    m_val = results["median_y"].fit.omega - 0.5
    m_err = err("median_y")
    z_omega = results["median_z"].fit.omega
    z_err = err("median_z")
    l_val = (z_omega - 2.0 * m_val + 1.0) / 2.0
    l_err = math.sqrt(z_err**2 + 4.0 * m_err**2) / 2.0
    h_val = results["width_iqr"].fit.omega
    h_err = err("width_iqr")

    j_flags = ("R/S-unreliable",) if _descriptor_rs_unreliable(ensemble) else ()
    report = ExponentReport(
        joseph=ExponentEstimate(j_val, j_err, j_flags),
        latent=ExponentEstimate(l_val, l_err),
        moses=ExponentEstimate(m_val, m_err),
        hurst=ExponentEstimate(h_val, h_err),
        k_sigma=options.k_sigma,
    )
    return EnsembleAnalysis(report=report, bootstrap=results, grid=grid, options=options)


def estimate_exponents(
    ensemble: PathEnsemble, grid: TimeGrid, options: FitOptions | None = None
) -> ExponentReport:
    """The four scaling exponents with bootstrap errors and sum check."""
    return analyze_ensemble(ensemble, grid, options).report
