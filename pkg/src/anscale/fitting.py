"""Weighted fits of the finite-time-correction model and bootstrap errors.

Model forms on a statistic series y(t):

    free    y(t) = a * t^omega + b * t^(omega - c)
    known   same, with omega supplied and only (a, b, c) fitted

Because the model is linear in (a, b), each trial (omega, c) solves the
weighted linear subproblem exactly and the outer damped least-squares
search runs over at most two parameters (omega and log c; the log keeps
c positive).  Multi-start over a fixed ladder of initial c values guards
against the correction term locking onto the wrong branch.

The crossover timescale of a fit is tau = (-b/a)^(1/c), defined only when
a is nonzero and -b/a is positive.

Standard errors come from an ensemble bootstrap: paths are resampled with
replacement, every statistic series is recomputed per replicate, per-point
replicate variances provide the fit weights, and the parameter spread over
replicate fits gives the errors.  Replicate index draws live in their own
stream domain derived from the master seed, so they never collide with
path generation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import StatisticSeries, TimeGrid, PathEnsemble
from .errors import (
    BootstrapError,
    DegenerateDataError,
    DomainError,
    FitError,
    NonConvergenceError,
    RankDeficiencyError,
    UndefinedTimescaleError,
)
from .rng import BOOTSTRAP_DOMAIN, RngStream

_C_STARTS = (0.1, 0.25, 0.5, 1.0)
# A correction term is kept only when it is decisively supported (F test
# against the pure fit) and has decayed to at most this fraction of the
# leading term at the window end; corrections that persist through the
# whole window are not identifiable against omega (c -> 0 colinearity).
_CORRECTION_F_MIN = 100.0
_ASYMPTOTE_MAX_CORRECTION = 0.1
# Random restarts that converge but keep landing on inadmissible
# candidates signal an empirically inadmissible two-term family, not a
# hard optimization; after this many such hits the search stops and the
# pure fit competes alone.  Starts that fail to converge never count.
_RESCUE_STALL = 25
_MAX_ITER = 500
# Random restarts get a tighter iteration budget than warm and canonical
# starts; a basin that has not closed in this many damped iterations is
# not worth the remaining descent.
_RESCUE_MAX_ITER = 120
_REL_STEP_TOL = 1e-10
_REL_COST_TOL = 1e-12
_VARIANCE_FLOOR = 1e-10
_RESTART_KEY = 0x0A45CA1E


@dataclass(frozen=True)
class FitResult:
    """Fitted finite-time-correction parameters for one series.

    stderr maps parameter names to bootstrap standard errors (None until a
    bootstrap fills it); tau is None whenever (-b/a)^(1/c) is undefined.
    A free fit that kept no correction term has b = 0 and c = 1 (placeholder).
    """

    model: str
    omega: float
    a: float
    b: float
    c: float
    residual_norm: float
    converged: bool
    n_points: int
    stderr: dict | None = None
    tau: float | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "omega": self.omega,
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "tau": self.tau,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "n_points": self.n_points,
            "stderr": dict(self.stderr) if self.stderr is not None else None,
        }


def _tau_value(a: float, b: float, c: float) -> float | None:
    if a == 0.0 or c <= 0.0:
        return None
    ratio = -b / a
    if not ratio > 0.0:
        return None
    tau = ratio ** (1.0 / c)
    return tau if math.isfinite(tau) else None


def convergence_timescale(fit: FitResult) -> float:
    """The crossover time (-b/a)^(1/c) of a fit.

    Raises
    ------
    UndefinedTimescaleError
        If a = 0 or -b/a is not positive (or the power overflows).
    """
    tau = _tau_value(fit.a, fit.b, fit.c)
    if tau is None:
        raise UndefinedTimescaleError(
            f"timescale undefined for a={fit.a}, b={fit.b}, c={fit.c}"
        )
    return tau


class _Objective:
    """Variable-projection residual for one data set.

    For a trial point of the reduced nonlinear parameters (omega and
    log c, or log c alone when omega is fixed) the two amplitudes are
    solved exactly from the weighted normal equations, so the outer
    optimizer never sees a or b.
    """

    def __init__(self, t, y, sqrt_w, omega_fixed):
        self.logt = np.log(t)
        self.y = y
        self.sw = sqrt_w
        self.wy = sqrt_w * y
        self.omega_fixed = omega_fixed

    def pure(self, theta):
        """Single-term variant: return (cost, a, 0, residual) for y = a t^omega."""
        omega = theta[0]
        if not np.isfinite(omega):
            return math.inf, 0.0, 0.0, None
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            u = self.sw * np.exp(omega * self.logt)
            denom = u @ u
            if not np.isfinite(denom) or denom <= 0.0:
                return math.inf, 0.0, 0.0, None
            a = float((u @ self.wy) / denom)
            res = self.wy - a * u
            cost = float(res @ res)
        if not math.isfinite(cost):
            return math.inf, 0.0, 0.0, None
        return cost, a, 0.0, res

    def __call__(self, theta):
        """Return (cost, a, b, residual); cost is inf at unusable points."""
        if self.omega_fixed is None:
            omega = theta[0]
        else:
            omega = self.omega_fixed
        logc = theta[-1]
        if not -700.0 < logc < 700.0 or not np.isfinite(omega):
            return math.inf, 0.0, 0.0, None
        c = math.exp(logc)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            a1 = self.sw * np.exp(omega * self.logt)
            a2 = self.sw * np.exp((omega - c) * self.logt)
            g11 = a1 @ a1
            g12 = a1 @ a2
            g22 = a2 @ a2
            r1 = a1 @ self.wy
            r2 = a2 @ self.wy
            if not (
                np.isfinite(g11) and np.isfinite(g12) and np.isfinite(g22)
                and np.isfinite(r1) and np.isfinite(r2)
            ):
                return math.inf, 0.0, 0.0, None
            det = g11 * g22 - g12 * g12
            if det > 1e-12 * g11 * g22 and det > 0.0:
                a = (g22 * r1 - g12 * r2) / det
                b = (g11 * r2 - g12 * r1) / det
            else:
                coef, *_ = np.linalg.lstsq(
                    np.column_stack([a1, a2]), self.wy, rcond=None
                )
                a, b = float(coef[0]), float(coef[1])
            res = self.wy - a * a1 - b * a2
            cost = float(res @ res)
        if not math.isfinite(cost):
            return math.inf, 0.0, 0.0, None
        return cost, float(a), float(b), res


def _initial_omega(t, y):
    """Log-log slope over the last decade of positive points (0.5 fallback)."""
    pos = y > 0
    late = pos & (t >= t[-1] / 10.0)
    for sel in (late, pos):
        if sel.sum() >= 2:
            lt = np.log(t[sel])
            ly = np.log(y[sel])
            denom = ((lt - lt.mean()) ** 2).sum()
            if denom > 0:
                return float(((lt - lt.mean()) * (ly - ly.mean())).sum() / denom)
    return 0.5


def _lm_minimize(objective, theta0, cost_scale, max_iter=_MAX_ITER):
    """Levenberg-Marquardt descent on the reduced (projected) residual.

    The residual Jacobian over the one or two reduced parameters comes
    from central finite differences, so it includes the implicit
    dependence of the linear pair (a, b) on (omega, c).  Returns
    (theta, cost, a, b, converged).
    """
    theta = np.asarray(theta0, dtype=np.float64).copy()
    dim = theta.size
    cost, a, b, res = objective(theta)
    if res is None:
        return theta, math.inf, a, b, False
    lam = 1e-3
    if cost <= 1e-28 * cost_scale:
        return theta, cost, a, b, True
    converged = False
    stall = 0
    for _ in range(max_iter):
        cols = []
        for j in range(dim):
            h = 1e-6 * max(1.0, abs(theta[j]))
            up = theta.copy()
            up[j] += h
            dn = theta.copy()
            dn[j] -= h
            r_up = objective(up)[3]
            r_dn = objective(dn)[3]
            if r_up is None or r_dn is None:
                return theta, cost, a, b, converged
            cols.append((r_up - r_dn) / (2.0 * h))
        jac = np.column_stack(cols)
        grad = jac.T @ res
        hess = jac.T @ jac
        improved = False
        for _damp in range(60):
            damped = hess + lam * np.diag(np.maximum(np.diag(hess), 1e-12))
            try:
                step = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 3.0
                continue
            trial = theta + step
            t_cost, t_a, t_b, t_res = objective(trial)
            if t_res is not None and t_cost < cost:
                rel_step = float(
                    np.max(np.abs(step) / np.maximum(1.0, np.abs(theta)))
                )
                rel_drop = (cost - t_cost) / max(cost, 1e-300)
                theta, cost, a, b, res = trial, t_cost, t_a, t_b, t_res
                lam = max(lam / 3.0, 1e-12)
                improved = True
                if (
                    rel_step < _REL_STEP_TOL
                    or rel_drop < _REL_COST_TOL
                    or cost <= 1e-28 * cost_scale
                ):
                    converged = True
                # Creeping along a flat valley: several consecutive steps
                # with negligible cost gain count as converged too.
                stall = stall + 1 if rel_drop < 1e-9 else 0
                if stall >= 5:
                    converged = True
                break
            lam *= 3.0
            if lam > 1e14:
                break
        if converged or not improved:
            break
    return theta, cost, a, b, converged


def _fit_power_law(
    t: np.ndarray,
    y: np.ndarray,
    w: np.ndarray | None,
    omega_fixed: float | None = None,
    restarts: int = 200,
    theta0: np.ndarray | None = None,
) -> FitResult:
    """Core fit on raw arrays; public wrappers adapt StatisticSeries."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_params = 3 if omega_fixed is not None else 4
    if t.size < 5:
        raise RankDeficiencyError(
            f"need at least 5 points to fit {n_params} parameters, got {t.size}"
        )
    if not (np.all(np.isfinite(t)) and np.all(t > 0)):
        raise DegenerateDataError("fit times must be finite and positive")
    if not np.all(np.isfinite(y)):
        raise DegenerateDataError("fit values must be finite")
    if not np.any(y != 0.0):
        raise DegenerateDataError("fit values are identically zero")
    if w is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != y.shape or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("weights must be finite, nonnegative, y-shaped")
        if not np.any(w > 0):
            raise DomainError("weights are identically zero")
        w = w / w.mean()
    sw = np.sqrt(w)
    objective = _Objective(t, y, sw, omega_fixed)
    cost_scale = float((sw * y) @ (sw * y)) or 1.0

    omega0 = omega_fixed if omega_fixed is not None else _initial_omega(t, y)

    def make_theta(om, c0):
        if omega_fixed is None:
            return np.array([om, math.log(c0)])
        return np.array([math.log(c0)])

    starts = []
    if theta0 is not None:
        starts.append(np.asarray(theta0, dtype=np.float64))
    starts.extend(make_theta(omega0, c0) for c0 in _C_STARTS)

    log_tmax = math.log(float(np.max(t)))

    def admissible(a, b, theta):
        # A two-term candidate only decomposes the data into asymptote
        # plus transient if the transient has mostly died out by the end
        # of the window; otherwise the "leading" term leads nowhere in
        # the fitted range and omega is an artifact of near-colinear
        # terms (the c -> 0 degeneracy).  Free mode only; with omega
        # fixed the terms cannot trade places.
        if omega_fixed is not None or b == 0.0:
            return True
        if a == 0.0:
            return False
        c = math.exp(float(theta[-1]))
        return (
            math.log(abs(b))
            <= math.log(_ASYMPTOTE_MAX_CORRECTION) + math.log(abs(a)) + c * log_tmax
        )

    best = None
    for start in starts:
        theta, cost, a, b, ok = _lm_minimize(objective, start, cost_scale)
        ok = ok and admissible(a, b, theta)
        if ok and (best is None or cost < best[1]):
            best = (theta, cost, a, b)
        if theta0 is not None and ok and start is starts[0]:
            break  # warm start converged; replicate fits stop here
    if best is None:
        rng = np.random.Generator(np.random.Philox(_RESTART_KEY))
        stalled = 0
        for _ in range(max(0, int(restarts))):
            c0 = math.exp(rng.uniform(math.log(0.05), math.log(3.0)))
            om = omega0 + rng.standard_normal() * 0.25
            theta, cost, a, b, ok = _lm_minimize(
                objective, make_theta(om, c0), cost_scale,
                max_iter=_RESCUE_MAX_ITER,
            )
            if ok and admissible(a, b, theta):
                best = (theta, cost, a, b)
                break
            if ok:
                stalled += 1
                if stalled >= _RESCUE_STALL:
                    break

    if omega_fixed is None:
        # The two-term model must earn its correction term: on a finite
        # window t^omega and t^(omega-c) are nearly colinear for small c,
        # so noise alone buys a few percent of cost and drags omega off.
        # Keep the correction only when it beats the plain power law by a
        # large F-statistic margin; otherwise report the pure fit.
        pure_best = None
        for om in (omega0, omega0 + 0.25, omega0 - 0.25, 0.5):
            theta, cost, a, _b, ok = _lm_minimize(
                objective.pure, np.array([om]), cost_scale
            )
            if ok and (pure_best is None or cost < pure_best[1]):
                pure_best = (theta, cost, a)
        if pure_best is None and best is None:
            raise NonConvergenceError(
                f"no fit start converged within {restarts} restarts"
            )
        keep_correction = best is not None and (
            pure_best is None
            or (pure_best[1] - best[1]) * max(t.size - 4, 1)
            > 2.0 * _CORRECTION_F_MIN * best[1]
        )
        if not keep_correction:
            theta_p, cost_p, a_p = pure_best
            return FitResult(
                model="free",
                omega=float(theta_p[0]),
                a=a_p,
                b=0.0,
                c=1.0,  # placeholder; no correction term was kept
                residual_norm=math.sqrt(cost_p),
                converged=True,
                n_points=int(t.size),
                tau=None,
            )
    elif best is None:
        raise NonConvergenceError(
            f"no fit start converged within {restarts} restarts"
        )

    theta, cost, a, b = best
    omega = float(omega_fixed if omega_fixed is not None else theta[0])
    c = float(math.exp(theta[-1]))
    return FitResult(
        model="known" if omega_fixed is not None else "free",
        omega=omega,
        a=a,
        b=b,
        c=c,
        residual_norm=math.sqrt(cost),
        converged=True,
        n_points=int(t.size),
        tau=_tau_value(a, b, c),
    )


def _weights_from_variances(variances: np.ndarray | None) -> np.ndarray | None:
    """Inverse-variance weights with a relative floor; None for no weighting."""
    if variances is None:
        return None
    var = np.asarray(variances, dtype=np.float64)
    top = float(var.max(initial=0.0))
    if top <= 0.0:
        return None
    return 1.0 / np.maximum(var, top * _VARIANCE_FLOOR)


def fit_ftc_free(series: StatisticSeries, restarts: int = 200) -> FitResult:
    """Fit y(t) = a t^omega + b t^(omega-c) to a series.

    Weights are inverse per-point variances when the series carries them
    (floored at max(var) * 1e-10), unit otherwise.
    """
    return _fit_power_law(
        series.grid.points,
        series.values,
        _weights_from_variances(series.variances),
        restarts=restarts,
    )


def fit_ftc_known(series: StatisticSeries, omega: float, restarts: int = 200) -> FitResult:
    """Fit a + b t^(-c) against y(t)/t^omega with omega held fixed.

    Minimizes the same weighted objective as fit_ftc_free, just with the
    leading exponent pinned.
    """
    omega = float(omega)
    if not np.isfinite(omega):
        raise DomainError(f"omega must be finite, got {omega}")
    return _fit_power_law(
        series.grid.points,
        series.values,
        _weights_from_variances(series.variances),
        omega_fixed=omega,
        restarts=restarts,
    )


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass
class BootstrapResult:
    """Central fit with bootstrap standard errors for one statistic kind."""

    fit: FitResult
    series: StatisticSeries
    n_replicates: int
    n_failed: int


def _replicate_reduce(kind: str, stats, rows: np.ndarray) -> np.ndarray:
    if kind == "rs_mean":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(stats.rs[rows], axis=0)
    if kind == "width_iqr":
        hi, lo = np.quantile(stats.x[rows], (0.75, 0.25), axis=0)
        return hi - lo
    if kind == "median_y":
        return np.median(stats.y[rows], axis=0)
    if kind == "median_z":
        return np.median(stats.z[rows], axis=0)
    raise DomainError(f"statistic kind {kind!r} cannot be bootstrapped")


def bootstrap_many(
    ensemble: PathEnsemble,
    grid: TimeGrid,
    kinds: tuple[str, ...],
    n_replicates: int = 200,
    seed: int | None = None,
    omegas: dict | None = None,
    threads: int | None = None,
    stats=None,
    restarts: int = 200,
) -> dict[str, BootstrapResult]:
    """Shared-resample bootstrap over several statistic kinds at once.

    All kinds see the same replicate index draws, and the per-path
    statistic matrices are computed once, so adding kinds costs only the
    per-replicate reductions and fits.
    """
    from . import estimators  # runtime import; estimators also imports us

    if n_replicates < 2:
        raise DomainError(f"n_replicates must be >= 2, got {n_replicates}")
    if stats is None:
        stats = estimators.compute_path_stats(ensemble, grid, threads=threads)
    central = {
        kind: estimators.series_from_stats(ensemble, kind, stats) for kind in kinds
    }
    n_paths = ensemble.n_paths
    idx_stream = RngStream(
        ensemble.master_seed if seed is None else seed, 0, domain=BOOTSTRAP_DOMAIN
    )
    indices = idx_stream.integers(0, n_paths, n_replicates * n_paths).reshape(
        n_replicates, n_paths
    )
    n_grid = len(grid)
    rep_values = {kind: np.empty((n_replicates, n_grid)) for kind in kinds}
    for rep in range(n_replicates):
        rows = indices[rep]
        for kind in kinds:
            rep_values[kind][rep] = _replicate_reduce(kind, stats, rows)

    results: dict[str, BootstrapResult] = {}
    for kind in kinds:
        reps = rep_values[kind]
        finite = np.isfinite(reps)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            point_var = np.nanvar(np.where(finite, reps, np.nan), axis=0, ddof=1)
        # Columns with under two finite replicates carry no weight signal;
        # give them the weakest (largest) variance seen elsewhere.
        bad = (finite.sum(axis=0) < 2) | ~np.isfinite(point_var)
        if np.all(bad):
            point_var = np.zeros(n_grid)
        elif np.any(bad):
            point_var = np.where(bad, point_var[~bad].max(), point_var)
        weights = _weights_from_variances(point_var)
        base = central[kind]
        series = StatisticSeries(
            grid=base.grid,
            values=base.values,
            variances=point_var,
            statistic_kind=base.statistic_kind,
        )
        omega_fixed = None if omegas is None else omegas.get(kind)
        fit = _fit_power_law(
            grid.points,
            series.values,
            weights,
            omega_fixed=omega_fixed,
            restarts=restarts,
        )
        theta0 = (
            np.array([math.log(fit.c)])
            if omega_fixed is not None
            else np.array([fit.omega, math.log(fit.c)])
        )
        params: dict[str, list[float]] = {"omega": [], "a": [], "b": [], "c": [], "tau": []}
        failed = 0
        for rep in range(n_replicates):
            try:
                rep_fit = _fit_power_law(
                    grid.points,
                    reps[rep],
                    weights,
                    omega_fixed=omega_fixed,
                    restarts=restarts,
                    theta0=theta0,
                )
            except FitError:
                failed += 1
                continue
            params["omega"].append(rep_fit.omega)
            params["a"].append(rep_fit.a)
            params["b"].append(rep_fit.b)
            params["c"].append(rep_fit.c)
            if rep_fit.tau is not None:
                params["tau"].append(rep_fit.tau)
        if failed > 0.2 * n_replicates:
            raise BootstrapError(
                f"{failed}/{n_replicates} bootstrap replicates failed for {kind}"
            )
        stderr = {}
        for name in ("omega", "a", "b", "c"):
            vals = params[name]
            if omega_fixed is not None and name == "omega":
                continue
            stderr[name] = float(np.std(vals, ddof=1)) if len(vals) >= 2 else math.nan
        if len(params["tau"]) >= 2 and fit.tau is not None:
            stderr["tau"] = float(np.std(params["tau"], ddof=1))
        results[kind] = BootstrapResult(
            fit=replace(fit, stderr=stderr),
            series=series,
            n_replicates=n_replicates,
            n_failed=failed,
        )
    return results


def bootstrap_stderr(
    ensemble: PathEnsemble,
    series_kind: str,
    grid: TimeGrid,
    n_replicates: int = 200,
    seed: int | None = None,
    omega: float | None = None,
    threads: int | None = None,
) -> BootstrapResult:
    """Bootstrap one statistic kind: central fit, stderr, point variances."""
    omegas = None if omega is None else {series_kind: omega}
    return bootstrap_many(
        ensemble,
        grid,
        (series_kind,),
        n_replicates=n_replicates,
        seed=seed,
        omegas=omegas,
        threads=threads,
    )[series_kind]
