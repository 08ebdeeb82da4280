"""Stream determinism, independence and stable-variate distribution checks."""

import numpy as np
import pytest
from scipy import stats as sstats

from anscale.errors import DomainError
from anscale.rng import (
    BOOTSTRAP_DOMAIN,
    PATH_DOMAIN,
    RngStream,
    draw_gaussian,
    draw_levy_stable,
    levy_stable_vector,
)


class TestStreams:
    def test_same_key_same_sequence(self):
        a = RngStream(12345, 7).standard_normals(64)
        b = RngStream(12345, 7).standard_normals(64)
        np.testing.assert_array_equal(a, b)

    def test_different_stream_ids_differ(self):
        a = RngStream(12345, 0).standard_normals(64)
        b = RngStream(12345, 1).standard_normals(64)
        assert not np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = RngStream(1, 0).standard_normals(64)
        b = RngStream(2, 0).standard_normals(64)
        assert not np.array_equal(a, b)

    def test_domains_are_independent_namespaces(self):
        a = RngStream(99, 3, domain=PATH_DOMAIN).uniforms(32)
        b = RngStream(99, 3, domain=BOOTSTRAP_DOMAIN).uniforms(32)
        assert not np.array_equal(a, b)

    def test_sequence_is_independent_of_other_streams(self):
        # Drawing from stream 5 must not depend on whether stream 4 was used.
        lone = RngStream(7, 5).standard_normals(16)
        RngStream(7, 4).standard_normals(1000)
        again = RngStream(7, 5).standard_normals(16)
        np.testing.assert_array_equal(lone, again)

    def test_position_counts_draws(self):
        s = RngStream(1, 0)
        s.standard_normals(10)
        s.uniforms(5)
        s.exponentials(3)
        s.integers(0, 8, 4)
        assert s.position == 22

    def test_negative_stream_id_rejected(self):
        with pytest.raises(DomainError):
            RngStream(1, -1)

    def test_negative_domain_rejected(self):
        with pytest.raises(DomainError):
            RngStream(1, 0, domain=-2)

    def test_seed_wraps_modulo_2_64(self):
        a = RngStream(2**64 + 5, 0).standard_normals(8)
        b = RngStream(5, 0).standard_normals(8)
        np.testing.assert_array_equal(a, b)

    def test_scalar_helpers(self):
        s = RngStream(3, 0)
        g = draw_gaussian(s)
        x = draw_levy_stable(0.6, s)
        assert isinstance(g, float) and isinstance(x, float)
        assert np.isfinite(g) and np.isfinite(x)


class TestStableSampler:
    def test_latent_domain(self):
        s = RngStream(1, 0)
        for bad in (0.49, 1.0, 1.3, 0.0):
            with pytest.raises(DomainError):
                levy_stable_vector(bad, 4, s)

    def test_negative_count_rejected(self):
        with pytest.raises(DomainError):
            levy_stable_vector(0.6, -1, RngStream(1, 0))

    def test_zero_count(self):
        assert levy_stable_vector(0.6, 0, RngStream(1, 0)).size == 0

    def test_determinism(self):
        a = levy_stable_vector(0.7, 256, RngStream(11, 2))
        b = levy_stable_vector(0.7, 256, RngStream(11, 2))
        np.testing.assert_array_equal(a, b)

    def test_half_reduces_to_gaussian_variance_two(self):
        # Index 1/L = 2: the stable law is N(0, 2).
        x = levy_stable_vector(0.5, 200_000, RngStream(42, 0))
        var = x.var()
        # Var(sample var) = 2*sigma^4/n -> stderr ~ 0.0063 here.
        assert abs(var - 2.0) < 0.04
        ks = sstats.kstest(x[:20_000], "norm", args=(0.0, np.sqrt(2.0)))
        assert ks.pvalue > 1e-4

    def test_characteristic_function(self):
        # E[cos(theta X)] = exp(-|theta|^(1/L)) for the standard law.
        latent = 0.6
        x = levy_stable_vector(latent, 200_000, RngStream(7, 0))
        for theta in (0.25, 0.5, 1.0, 2.0):
            emp = np.cos(theta * x).mean()
            se = np.cos(theta * x).std() / np.sqrt(x.size)
            target = np.exp(-abs(theta) ** (1.0 / latent))
            assert abs(emp - target) < 5 * se, (theta, emp, target)

    def test_symmetry(self):
        x = levy_stable_vector(0.8, 100_000, RngStream(13, 0))
        # Median of a symmetric law is 0; sign split is binomial.
        assert abs(np.median(x)) < 0.02
        assert abs((x > 0).mean() - 0.5) < 0.01

    def test_heavy_tail_monotone_in_latent(self):
        # Larger L -> smaller stability index -> heavier tails.
        q_low = np.quantile(np.abs(levy_stable_vector(0.55, 100_000, RngStream(5, 0))), 0.999)
        q_high = np.quantile(np.abs(levy_stable_vector(0.9, 100_000, RngStream(5, 0))), 0.999)
        assert q_high > q_low
