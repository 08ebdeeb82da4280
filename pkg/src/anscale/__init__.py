"""Simulation and scaling analysis of self-similar stochastic processes.

The package generates ensembles from nine process families, measures the
four scaling exponents

    J  (memory / rescaled range)
    L  (fat tails / square-sum growth)
    M  (nonstationary scaling / absolute-sum growth)
    H  (ensemble width)

with finite-time-correction fits and bootstrap errors, checks the
decomposition H = J + L + M - 1, and runs the same pipeline over intraday
price data.
"""

from .core import (
    ExponentEstimate,
    ExponentReport,
    PathEnsemble,
    StatisticSeries,
    TimeGrid,
    load_ensemble,
    make_time_grid,
    partial_sums,
    partial_sums_grid,
    quantile,
    save_ensemble,
)
from .errors import AnscaleError
from .estimators import (
    FitOptions,
    analyze_ensemble,
    autocorrelation,
    estimate_exponents,
    mean_abs_increment_profile,
    median_y_series,
    median_z_series,
    rs_series,
    width_series,
)
from .fitting import (
    FitResult,
    bootstrap_stderr,
    convergence_timescale,
    fit_ftc_free,
    fit_ftc_known,
)
from .generators import (
    ProcessSpec,
    fgn,
    flm_increments,
    generate,
    moses_weights,
    sbm_exact_increments,
    stable_noise,
    vdp_path,
)
from .market import (
    BarFormat,
    IntervalSpec,
    SessionMatrix,
    SessionSpec,
    analyze_market,
    detrend,
    extract_interval,
    ingest_prices,
    to_return_ensemble,
)
from .rng import RngStream, draw_gaussian, draw_levy_stable

__version__ = "0.1.0"

__all__ = [
    "AnscaleError",
    "BarFormat",
    "ExponentEstimate",
    "ExponentReport",
    "FitOptions",
    "FitResult",
    "IntervalSpec",
    "PathEnsemble",
    "ProcessSpec",
    "RngStream",
    "SessionMatrix",
    "SessionSpec",
    "StatisticSeries",
    "TimeGrid",
    "analyze_ensemble",
    "analyze_market",
    "autocorrelation",
    "bootstrap_stderr",
    "convergence_timescale",
    "detrend",
    "draw_gaussian",
    "draw_levy_stable",
    "estimate_exponents",
    "extract_interval",
    "fgn",
    "fit_ftc_free",
    "fit_ftc_known",
    "flm_increments",
    "generate",
    "ingest_prices",
    "load_ensemble",
    "make_time_grid",
    "mean_abs_increment_profile",
    "median_y_series",
    "median_z_series",
    "moses_weights",
    "partial_sums",
    "partial_sums_grid",
    "quantile",
    "rs_series",
    "sbm_exact_increments",
    "save_ensemble",
    "stable_noise",
    "to_return_ensemble",
    "vdp_path",
    "width_series",
    "__version__",
]
