"""Finite-time-correction fitting: exactness, selection, errors, bootstrap."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anscale.core import PathEnsemble, StatisticSeries, make_time_grid
from anscale.errors import (
    DegenerateDataError,
    DomainError,
    RankDeficiencyError,
    UndefinedTimescaleError,
)
from anscale.fitting import (
    FitResult,
    bootstrap_many,
    bootstrap_stderr,
    convergence_timescale,
    fit_ftc_free,
    fit_ftc_known,
)
from anscale.generators import ProcessSpec, generate


def _series(t_min, t_max, count, values, variances=None, kind="rs_mean"):
    grid = make_time_grid(t_min, t_max, count)
    return StatisticSeries(
        grid=grid,
        values=np.asarray(values, dtype=float),
        variances=variances,
        statistic_kind=kind,
    ), grid


def _two_term(grid, a, b, omega, c):
    t = grid.points.astype(float)
    return a * t**omega + b * t ** (omega - c)


class TestNoiselessExactness:
    def test_reference_two_term(self):
        # (a, b, omega, c) = (2, -3, 0.6, 0.5) on the long 500-point grid.
        grid = make_time_grid(50, 1_000_000, 500)
        series = StatisticSeries(
            grid=grid,
            values=_two_term(grid, 2.0, -3.0, 0.6, 0.5),
            variances=None,
            statistic_kind="rs_mean",
        )
        fit = fit_ftc_free(series)
        assert abs(fit.omega - 0.6) / 0.6 <= 1e-4
        assert abs(fit.a - 2.0) / 2.0 <= 1e-4
        assert abs(fit.b + 3.0) / 3.0 <= 1e-4
        assert abs(fit.c - 0.5) / 0.5 <= 1e-4
        assert fit.model == "free"
        assert fit.converged

    def test_pure_power_law(self):
        t = make_time_grid(50, 100_000, 200).points.astype(float)
        series, _ = _series(50, 100_000, 200, 1.7 * t**0.42)
        fit = fit_ftc_free(series)
        assert abs(fit.omega - 0.42) <= 1e-6
        assert fit.b == 0.0
        assert fit.tau is None

    @given(
        a=st.floats(0.5, 5.0),
        u=st.floats(0.0, 1.0),
        sign=st.sampled_from([-1.0, 1.0]),
        omega=st.floats(-0.5, 1.5),
        c=st.floats(0.25, 1.5),
    )
    @settings(max_examples=60, deadline=None)
    def test_recovery_across_parameter_box(self, a, u, sign, omega, c):
        # b scaled so the correction has died to at most 5% of the leading
        # term by t_max (the keep contract) and, for negative amplitudes,
        # leaves the series positive at t_min; the fitted exponent must
        # come back to 1e-4 on a 40-point grid.
        grid = make_time_grid(20, 2000, 40)
        hi = 0.05 if sign > 0 else min(0.05, 0.8 * (20.0 / 2000.0) ** c)
        rel_end = (hi / 25.0) * 25.0**u
        b = sign * rel_end * a * 2000.0**c
        series = StatisticSeries(
            grid=grid,
            values=_two_term(grid, a, b, omega, c),
            variances=None,
            statistic_kind="rs_mean",
        )
        fit = fit_ftc_free(series)
        assert abs(fit.omega - omega) <= 1e-4 * max(1.0, abs(omega))

    def test_known_exponent_mode(self):
        grid = make_time_grid(50, 1_000_000, 500)
        series = StatisticSeries(
            grid=grid,
            values=_two_term(grid, 2.0, -3.0, 0.6, 0.5),
            variances=None,
            statistic_kind="rs_mean",
        )
        fit = fit_ftc_known(series, 0.6)
        assert fit.model == "known"
        assert fit.omega == 0.6
        assert abs(fit.a - 2.0) <= 1e-6
        assert abs(fit.b + 3.0) <= 1e-5
        assert abs(fit.c - 0.5) <= 1e-6

    def test_known_rejects_nonfinite_omega(self):
        t = make_time_grid(10, 1000, 20).points.astype(float)
        series, _ = _series(10, 1000, 20, t**0.5)
        with pytest.raises(DomainError):
            fit_ftc_known(series, float("nan"))


class TestTimescale:
    def test_reference_value(self):
        # tau = (-b/a)^(1/c) = (3/2)^2 = 2.25 for the reference parameters.
        grid = make_time_grid(50, 1_000_000, 500)
        series = StatisticSeries(
            grid=grid,
            values=_two_term(grid, 2.0, -3.0, 0.6, 0.5),
            variances=None,
            statistic_kind="rs_mean",
        )
        fit = fit_ftc_free(series)
        assert abs(fit.tau - 2.25) <= 1e-3
        assert abs(convergence_timescale(fit) - 2.25) <= 1e-3

    def test_undefined_when_no_correction(self):
        fit = FitResult(
            model="free", omega=0.5, a=1.0, b=0.0, c=1.0,
            residual_norm=0.0, converged=True, n_points=30,
        )
        with pytest.raises(UndefinedTimescaleError):
            convergence_timescale(fit)

    def test_undefined_for_same_sign_amplitudes(self):
        fit = FitResult(
            model="free", omega=0.5, a=1.0, b=2.0, c=1.0,
            residual_norm=0.0, converged=True, n_points=30,
        )
        with pytest.raises(UndefinedTimescaleError):
            convergence_timescale(fit)

    def test_undefined_for_zero_leading_amplitude(self):
        fit = FitResult(
            model="free", omega=0.5, a=0.0, b=-1.0, c=1.0,
            residual_norm=0.0, converged=True, n_points=30,
        )
        with pytest.raises(UndefinedTimescaleError):
            convergence_timescale(fit)


class TestWeighting:
    def test_weight_scale_invariance(self):
        grid = make_time_grid(20, 5000, 60)
        t = grid.points.astype(float)
        rng = np.random.default_rng(3)
        y = 1.5 * t**0.55 * (1.0 + 0.01 * rng.standard_normal(t.size))
        var = (0.01 * y) ** 2
        s1 = StatisticSeries(grid=grid, values=y, variances=var, statistic_kind="rs_mean")
        s2 = StatisticSeries(
            grid=grid, values=y, variances=32.0 * var, statistic_kind="rs_mean"
        )
        s3 = StatisticSeries(
            grid=grid, values=y, variances=25.0 * var, statistic_kind="rs_mean"
        )
        f1, f2, f3 = fit_ftc_free(s1), fit_ftc_free(s2), fit_ftc_free(s3)
        # Rescaling all variances by one factor must not move the fit;
        # a power-of-two factor commutes with rounding, so bit-exactly.
        assert f1.omega == f2.omega
        assert f1.a == f2.a and f1.b == f2.b and f1.c == f2.c
        assert f3.omega == pytest.approx(f1.omega, rel=1e-9)
        assert f3.a == pytest.approx(f1.a, rel=1e-9)

    def test_unweighted_equals_unit_weights(self):
        grid = make_time_grid(20, 5000, 60)
        t = grid.points.astype(float)
        y = 2.0 * t**0.3
        s_none = StatisticSeries(grid=grid, values=y, variances=None, statistic_kind="rs_mean")
        s_unit = StatisticSeries(
            grid=grid, values=y, variances=np.ones_like(y), statistic_kind="rs_mean"
        )
        assert fit_ftc_free(s_none).omega == pytest.approx(
            fit_ftc_free(s_unit).omega, abs=1e-12
        )


class TestDegenerateInputs:
    def test_too_few_points(self):
        grid = make_time_grid(10, 100, 4)
        assert len(grid) == 4
        series = StatisticSeries(
            grid=grid, values=np.ones(4), variances=None, statistic_kind="rs_mean"
        )
        with pytest.raises(RankDeficiencyError):
            fit_ftc_free(series)

    def test_identically_zero_values(self):
        grid = make_time_grid(10, 1000, 20)
        series = StatisticSeries(
            grid=grid,
            values=np.zeros(len(grid)),
            variances=None,
            statistic_kind="rs_mean",
        )
        with pytest.raises(DegenerateDataError):
            fit_ftc_free(series)


class TestSelection:
    def test_noise_does_not_buy_a_correction(self):
        # A noisy pure power law must come back with b = 0: the correction
        # would otherwise ride the near-colinear c -> 0 direction.
        grid = make_time_grid(50, 10_000, 100)
        t = grid.points.astype(float)
        rng = np.random.default_rng(11)
        for trial in range(5):
            y = t**0.7 * (1.0 + 0.005 * rng.standard_normal(t.size))
            series = StatisticSeries(
                grid=grid, values=y, variances=None, statistic_kind="rs_mean"
            )
            fit = fit_ftc_free(series)
            assert fit.b == 0.0
            assert abs(fit.omega - 0.7) < 0.01

    def test_persistent_correction_is_refused(self):
        # A "correction" still at half the leading term at t_max never
        # decomposes the window; the fit must return the pure branch
        # instead of an omega read off two near-colinear terms.
        grid = make_time_grid(50, 10_000, 100)
        t = grid.points.astype(float)
        y = 2.0 * t**0.6 + (2.0 * 10_000.0**0.12) * 0.5 * t ** (0.6 - 0.12)
        series = StatisticSeries(
            grid=grid, values=y, variances=None, statistic_kind="rs_mean"
        )
        fit = fit_ftc_free(series)
        assert fit.b == 0.0

    def test_genuine_transient_is_kept(self):
        # Strong decaying correction, mild noise: the two-term model must
        # survive selection and localize both omega and tau.
        grid = make_time_grid(20, 10_000, 80)
        t = grid.points.astype(float)
        rng = np.random.default_rng(5)
        y = (2.0 * t**0.5 - 1.6 * t ** (0.5 - 0.4)) * (
            1.0 + 0.0005 * rng.standard_normal(t.size)
        )
        series = StatisticSeries(
            grid=grid, values=y, variances=None, statistic_kind="rs_mean"
        )
        fit = fit_ftc_free(series)
        assert fit.b != 0.0
        assert abs(fit.omega - 0.5) < 0.01
        assert abs(fit.c - 0.4) < 0.1
        assert fit.tau == pytest.approx((1.6 / 2.0) ** (1 / 0.4), rel=0.25)


class TestBootstrap:
    def _ensemble(self, n_paths=400, n_steps=512, seed=21):
        return generate(ProcessSpec("bm"), n_paths, n_steps, seed)

    def test_deterministic_given_seed(self):
        ens = self._ensemble()
        grid = make_time_grid(10, 512, 30)
        r1 = bootstrap_stderr(ens, "width_iqr", grid, n_replicates=40, seed=9)
        r2 = bootstrap_stderr(ens, "width_iqr", grid, n_replicates=40, seed=9)
        assert r1.fit.omega == r2.fit.omega
        assert r1.fit.stderr == r2.fit.stderr
        np.testing.assert_array_equal(r1.series.variances, r2.series.variances)

    def test_seed_changes_resamples(self):
        ens = self._ensemble()
        grid = make_time_grid(10, 512, 30)
        r1 = bootstrap_stderr(ens, "width_iqr", grid, n_replicates=40, seed=1)
        r2 = bootstrap_stderr(ens, "width_iqr", grid, n_replicates=40, seed=2)
        assert not np.array_equal(r1.series.variances, r2.series.variances)

    def test_identical_paths_have_zero_stderr(self):
        # Resampling a constant ensemble reproduces the same series every
        # replicate up to multiplicity-weighting round-off, so bootstrap
        # spreads collapse to zero at float precision.
        one = generate(ProcessSpec("bm"), 1, 256, 3).increments
        ens = PathEnsemble(increments=np.repeat(one, 50, axis=0))
        grid = make_time_grid(8, 256, 20)
        res = bootstrap_stderr(ens, "median_y", grid, n_replicates=25, seed=4)
        assert res.fit.stderr["omega"] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(
            res.series.variances, np.zeros(len(grid)), atol=1e-20
        )
        assert res.n_failed == 0

    def test_replicate_floor(self):
        ens = self._ensemble(n_paths=50)
        grid = make_time_grid(10, 512, 30)
        with pytest.raises(DomainError):
            bootstrap_stderr(ens, "width_iqr", grid, n_replicates=1)

    def test_shared_resamples_across_kinds(self):
        # bootstrap_many must give each kind the same resample draws as a
        # single-kind call with the same seed.
        ens = self._ensemble(n_paths=200)
        grid = make_time_grid(10, 512, 25)
        many = bootstrap_many(ens, grid, ("width_iqr", "median_y"), n_replicates=30, seed=6)
        solo = bootstrap_stderr(ens, "width_iqr", grid, n_replicates=30, seed=6)
        assert many["width_iqr"].fit.omega == solo.fit.omega
        assert many["width_iqr"].fit.stderr == solo.fit.stderr

    def test_known_omega_mode(self):
        ens = self._ensemble(n_paths=200)
        grid = make_time_grid(10, 512, 25)
        res = bootstrap_stderr(ens, "width_iqr", grid, n_replicates=30, seed=6, omega=0.5)
        assert res.fit.model == "known"
        assert res.fit.omega == 0.5
        assert "omega" not in res.fit.stderr
