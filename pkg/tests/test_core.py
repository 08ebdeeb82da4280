"""Grid construction, partial sums, quantiles and ensemble file round-trips."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from anscale.core import (
    PathEnsemble,
    StatisticSeries,
    TimeGrid,
    load_ensemble,
    make_time_grid,
    partial_sums,
    partial_sums_grid,
    quantile,
    save_ensemble,
    series_to_csv,
)
from anscale.errors import (
    DomainError,
    EmptyInputError,
    FileFormatError,
    InvalidRangeError,
)


class TestMakeTimeGrid:
    def test_exact_powers_of_ten(self):
        grid = make_time_grid(10, 1000, 2)
        assert grid.points.tolist() == [100, 1000]

    def test_long_grid_endpoints(self):
        # round(50 * 20000^(1/500)) = 51 at the low end.
        grid = make_time_grid(50, 1_000_000, 500)
        assert grid.points[0] == 51
        assert grid.points[-1] == 1_000_000

    def test_reversed_range_rejected(self):
        with pytest.raises(InvalidRangeError):
            make_time_grid(50, 40, 10)

    def test_t_min_below_one_rejected(self):
        with pytest.raises(InvalidRangeError):
            make_time_grid(0, 10, 3)

    def test_fractional_count_rejected(self):
        with pytest.raises(InvalidRangeError):
            make_time_grid(10, 100, 2.5)

    @given(
        t_min=st.integers(1, 50),
        span=st.integers(1, 200),
        count=st.integers(1, 400),
    )
    @settings(max_examples=200, deadline=None)
    def test_grid_properties(self, t_min, span, count):
        t_max = t_min + span
        grid = make_time_grid(t_min, t_max, count)
        pts = grid.points
        assert pts[-1] == t_max
        assert pts[0] >= t_min
        assert np.all(np.diff(pts) > 0)  # dedup implies strict increase
        assert len(pts) <= count

    def test_oversized_count_saturates(self):
        # Requesting more points than integers in range changes nothing
        # beyond deduplication.
        a = make_time_grid(10, 20, 11)
        b = make_time_grid(10, 20, 500)
        assert set(a.points.tolist()) <= set(b.points.tolist())
        assert b.points.tolist() == sorted(set(b.points.tolist()))

    def test_points_are_read_only(self):
        grid = make_time_grid(10, 100, 5)
        with pytest.raises(ValueError):
            grid.points[0] = 99


class TestTimeGridValidation:
    def test_non_increasing_points_rejected(self):
        with pytest.raises(InvalidRangeError):
            TimeGrid(t_min=1, t_max=5, count=3, points=np.array([1, 3, 3, 5]))

    def test_wrong_last_point_rejected(self):
        with pytest.raises(InvalidRangeError):
            TimeGrid(t_min=1, t_max=5, count=2, points=np.array([1, 4]))


class TestPartialSums:
    def test_alternating_hand_sum(self):
        ens = PathEnsemble(increments=np.array([[1.0, -1.0, 1.0]]))
        x, y, z = partial_sums(ens, 3)
        assert (x[0], y[0], z[0]) == (1.0, 3.0, 3.0)

    def test_zero_case(self):
        ens = PathEnsemble(increments=np.zeros((2, 5)))
        for t in (1, 3, 5):
            x, y, z = partial_sums(ens, t)
            assert not x.any() and not y.any() and not z.any()

    def test_two_step_hand_computation(self):
        ens = PathEnsemble(increments=np.array([[2.0, -3.0]]))
        x, y, z = partial_sums(ens, 2)
        assert (x[0], y[0], z[0]) == (-1.0, 5.0, 13.0)

    def test_out_of_range_t(self):
        ens = PathEnsemble(increments=np.ones((1, 4)))
        with pytest.raises(DomainError):
            partial_sums(ens, 5)
        with pytest.raises(DomainError):
            partial_sums(ens, 0)

    def test_grid_beyond_path_length(self):
        ens = PathEnsemble(increments=np.ones((1, 4)))
        with pytest.raises(DomainError):
            partial_sums_grid(ens, make_time_grid(2, 8, 4))

    @given(
        arrays(
            np.float64,
            st.tuples(st.integers(1, 6), st.integers(2, 40)),
            elements=st.floats(-100, 100, allow_nan=False),
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_pathwise_bounds(self, inc):
        # Y_t >= |X_t| (triangle inequality) and Z_t <= Y_t^2 (Cauchy).
        ens = PathEnsemble(increments=inc)
        t = ens.n_steps
        x, y, z = partial_sums(ens, t)
        assert np.all(y >= np.abs(x) - 1e-9 * y)
        assert np.all(z <= y * y + 1e-9 * (1.0 + y * y))

    @given(
        arrays(
            np.float64,
            st.tuples(st.integers(1, 4), st.integers(4, 60)),
            elements=st.floats(-50, 50, allow_nan=False),
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_grid_matches_pointwise(self, inc):
        # One cumulative pass over the grid equals independent recomputation.
        ens = PathEnsemble(increments=inc)
        grid = make_time_grid(1, ens.n_steps, 7)
        xg, yg, zg = partial_sums_grid(ens, grid)
        for k, t in enumerate(grid):
            x, y, z = partial_sums(ens, t)
            # Sequential vs pairwise accumulation differ only in round-off.
            np.testing.assert_allclose(xg[:, k], x, rtol=1e-12, atol=1e-9)
            np.testing.assert_allclose(yg[:, k], y, rtol=1e-12, atol=1e-9)
            np.testing.assert_allclose(zg[:, k], z, rtol=1e-12, atol=1e-9)


class TestQuantile:
    def test_median_of_even_count(self):
        assert quantile([1, 2, 3, 4], 0.5) == 2.5

    def test_singleton(self):
        assert quantile([5], 0.75) == 5

    def test_linear_interpolation(self):
        assert quantile([0, 10], 0.25) == 2.5

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            quantile([], 0.5)

    def test_q_out_of_range(self):
        with pytest.raises(DomainError):
            quantile([1, 2], 1.5)

    @given(
        vals=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=50),
        q=st.floats(0, 1),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounded_and_monotone(self, vals, q):
        v = quantile(vals, q)
        assert min(vals) <= v <= max(vals)
        assert quantile(vals, 0.25) <= quantile(vals, 0.75)


class TestEnsembleValidation:
    def test_one_dimensional_rejected(self):
        with pytest.raises(DomainError):
            PathEnsemble(increments=np.ones(5))

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            PathEnsemble(increments=np.empty((0, 4)))


class TestStatisticSeries:
    def test_length_mismatch(self):
        grid = make_time_grid(10, 100, 4)
        with pytest.raises(DomainError):
            StatisticSeries(
                grid=grid,
                values=np.ones(99),
                variances=None,
                statistic_kind="rs_mean",
            )

    def test_unknown_kind(self):
        grid = make_time_grid(10, 100, 4)
        with pytest.raises(DomainError):
            StatisticSeries(
                grid=grid,
                values=np.ones(len(grid)),
                variances=None,
                statistic_kind="mystery",
            )

    def test_negative_median_rejected(self):
        grid = make_time_grid(10, 100, 4)
        with pytest.raises(DomainError):
            StatisticSeries(
                grid=grid,
                values=-np.ones(len(grid)),
                variances=None,
                statistic_kind="median_y",
            )

    def test_series_csv_columns(self):
        grid = make_time_grid(10, 100, 3)
        series = StatisticSeries(
            grid=grid,
            values=np.arange(1.0, len(grid) + 1),
            variances=None,
            statistic_kind="width_iqr",
        )
        buf = io.StringIO()
        series_to_csv(series, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "t,value,variance"
        first = lines[1].split(",")
        assert float(first[0]) == grid.points[0]
        assert float(first[1]) == 1.0
        assert first[2] == "nan"


class TestEnsembleFiles:
    def _ensemble(self):
        rng = np.random.default_rng(5)
        return PathEnsemble(
            increments=rng.standard_normal((3, 17)),
            descriptor='{"family": "BM"}',
            master_seed=123456789,
        )

    def test_binary_round_trip_bit_exact(self, tmp_path):
        ens = self._ensemble()
        path = tmp_path / "ens.ansc"
        save_ensemble(ens, path)
        back = load_ensemble(path)
        np.testing.assert_array_equal(back.increments, ens.increments)
        assert back.descriptor == ens.descriptor
        assert back.master_seed == ens.master_seed

    def test_binary_deterministic_bytes(self, tmp_path):
        ens = self._ensemble()
        p1, p2 = tmp_path / "a.ansc", tmp_path / "b.ansc"
        save_ensemble(ens, p1)
        save_ensemble(ens, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_csv_round_trip(self, tmp_path):
        ens = self._ensemble()
        path = tmp_path / "ens.csv"
        save_ensemble(ens, path)
        back = load_ensemble(path)
        # CSV keeps values (full precision) but drops metadata.
        np.testing.assert_array_equal(back.increments, ens.increments)
        assert back.descriptor == ""
        assert back.master_seed == 0

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "bad.ansc"
        path.write_bytes(b"ANSC\x01")
        with pytest.raises(FileFormatError):
            load_ensemble(path, fmt="binary")

    def test_truncated_increments(self, tmp_path):
        ens = self._ensemble()
        path = tmp_path / "ens.ansc"
        save_ensemble(ens, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 60])
        with pytest.raises(FileFormatError):
            load_ensemble(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ansc"
        path.write_bytes(b"XXXX" + b"\x00" * 40)
        with pytest.raises(FileFormatError):
            load_ensemble(path, fmt="binary")

    def test_unsupported_version(self, tmp_path):
        ens = self._ensemble()
        path = tmp_path / "ens.ansc"
        save_ensemble(ens, path)
        raw = bytearray(path.read_bytes())
        raw[4] = 99  # version byte of the little-endian uint32
        path.write_bytes(bytes(raw))
        with pytest.raises(FileFormatError):
            load_ensemble(path)

    def test_format_sniffing(self, tmp_path):
        ens = self._ensemble()
        binary = tmp_path / "no_suffix"
        save_ensemble(ens, binary, fmt="binary")
        assert load_ensemble(binary).master_seed == ens.master_seed

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(DomainError):
            save_ensemble(self._ensemble(), tmp_path / "x", fmt="parquet")
