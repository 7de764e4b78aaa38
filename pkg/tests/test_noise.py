import numpy as np
import pytest

from shelab.noise import (GENERATOR_ID, NoiseSeed, coarsen, coarsen_array,
                          sample_block)


class TestSampleBlock:
    def test_determinism(self):
        a = sample_block(NoiseSeed(42, path=3, purpose="x"), 50, 7)
        b = sample_block(NoiseSeed(42, path=3, purpose="x"), 50, 7)
        assert np.array_equal(a.xi, b.xi)

    def test_streams_differ(self):
        a = sample_block(NoiseSeed(42, path=0), 10, 4)
        b = sample_block(NoiseSeed(42, path=1), 10, 4)
        c = sample_block(NoiseSeed(42, path=0, purpose="other"), 10, 4)
        assert not np.array_equal(a.xi, b.xi)
        assert not np.array_equal(a.xi, c.xi)

    def test_moments_at_clt_tolerance(self):
        xi = sample_block(NoiseSeed(7), 1000, 1000).xi  # 1e6 draws
        assert -0.004 <= xi.mean() <= 0.004
        assert 0.995 <= xi.var() <= 1.005

    def test_cross_stream_correlation(self):
        a = sample_block(NoiseSeed(11, path=0), 100, 1000).xi.ravel()
        b = sample_block(NoiseSeed(11, path=1), 100, 1000).xi.ravel()
        rho = np.corrcoef(a, b)[0, 1]
        assert abs(rho) < 0.01

    def test_bad_dimensions(self):
        with pytest.raises(ValueError):
            sample_block(NoiseSeed(0), 0, 4)

    def test_generator_id_documented(self):
        assert "philox" in GENERATOR_ID and "ndtri" in GENERATOR_ID


class TestCoarsen:
    def test_identity_factors(self):
        fine = sample_block(NoiseSeed(1), 8, 8, tau=0.1)
        out = coarsen(fine, 1, 1)
        assert np.array_equal(out.xi, fine.xi)
        assert out.tau == fine.tau

    def test_variance_preserved(self):
        fine = sample_block(NoiseSeed(3), 400, 1000, tau=0.01)  # 4e5 draws
        out = coarsen(fine, 4, 2)
        assert 0.99 <= out.xi.var() <= 1.01
        assert out.n == 250 and out.m == 200 and out.tau == pytest.approx(0.02)

    def test_composition_bit_exact(self):
        fine = sample_block(NoiseSeed(5), 16, 16, tau=0.01)
        twice = coarsen(coarsen(fine, 2, 2), 2, 2)
        once = coarsen(fine, 4, 4)
        assert np.array_equal(twice.xi, once.xi)

    def test_non_divisible_factors(self):
        fine = sample_block(NoiseSeed(5), 6, 6)
        with pytest.raises(ValueError):
            coarsen(fine, 4, 1)

    def test_non_power_of_two_sum(self):
        xi = np.arange(18.0).reshape(6, 3)
        out = coarsen_array(xi, 3, 2)
        expected = xi.reshape(3, 2, 1, 3).sum(axis=(1, 3)) / np.sqrt(6.0)
        assert np.allclose(out, expected, rtol=1e-15)

    def test_batched_leading_axes(self):
        xi = sample_block(NoiseSeed(9), 8, 8).xi
        stacked = np.stack([xi, 2 * xi])
        out = coarsen_array(stacked, 2, 2)
        assert out.shape == (2, 4, 4)
        assert np.array_equal(out[0] * 2, out[1])
