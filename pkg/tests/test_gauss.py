import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import bisect_quantile, series_normal_cdf
from convexlab.errors import DimensionMismatchError, DomainError
from convexlab.gauss import (
    Frame,
    sample_haar_frame,
    std_normal_cdf,
    std_normal_isf,
    std_normal_quantile,
    std_normal_sf,
    verify_tail_bounds,
)
from convexlab.rng import RngStream


class TestCdf:
    def test_zero_is_half(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_symmetry_identity(self):
        assert abs(std_normal_cdf(0.7) + std_normal_cdf(-0.7) - 1.0) <= 1e-12

    def test_against_series_oracle(self):
        # Oracle value bracketed by the standard tail inequalities at r=1.96.
        r = 1.96
        oracle = series_normal_cdf(r)
        phi = math.exp(-r * r / 2.0) / math.sqrt(2.0 * math.pi)
        lower = phi * (1.0 / r - 1.0 / r**3)
        upper = phi * (1.0 / r - 1.0 / r**3 + 3.0 / r**5)
        assert lower <= 1.0 - oracle <= upper
        assert abs(std_normal_cdf(r) - oracle) <= 1e-12

    @given(st.floats(min_value=-4.0, max_value=4.0))
    def test_matches_series_in_core_range(self, x):
        # The alternating series cancels catastrophically past |x| ~ 4.
        assert abs(std_normal_cdf(x) - series_normal_cdf(x)) <= 1e-13

    @given(st.floats(min_value=4.0, max_value=12.0))
    def test_tail_bracketed_beyond_series_range(self, r):
        phi = math.exp(-r * r / 2.0) / math.sqrt(2.0 * math.pi)
        tail = std_normal_sf(r)
        assert phi * (1.0 / r - 1.0 / r**3) <= tail <= phi * (1.0 / r - 1.0 / r**3 + 3.0 / r**5)

    def test_rejects_non_finite(self):
        for bad in (math.inf, -math.inf, math.nan):
            with pytest.raises(DomainError):
                std_normal_cdf(bad)


class TestQuantile:
    def test_half_is_zero(self):
        assert std_normal_quantile(0.5) == 0.0

    def test_roundtrip_through_cdf(self):
        assert abs(std_normal_quantile(std_normal_cdf(1.3)) - 1.3) <= 1e-9

    def test_two_thirds_against_bisection_oracle(self):
        oracle = bisect_quantile(2.0 / 3.0)
        assert abs(std_normal_quantile(2.0 / 3.0) - oracle) <= 1e-10

    @given(st.floats(min_value=1e-12, max_value=1.0 - 1e-12))
    def test_inverse_property(self, p):
        assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-9

    def test_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DomainError):
                std_normal_quantile(bad)

    def test_isf_deep_tail(self):
        # Far below where 1 - q rounds to 1 in double precision.
        q = 1e-30
        x = std_normal_isf(q)
        assert abs(std_normal_sf(x) - q) <= 1e-12 * q + 1e-300
        assert 11.0 < x < 12.5


class TestFrame:
    def test_full_frame_gram_identity(self):
        frame = sample_haar_frame(3, 3, RngStream(1))
        gram = frame.vectors @ frame.vectors.T
        assert np.abs(gram - np.eye(3)).max() <= 1e-10

    def test_one_dimensional_is_sign(self):
        values = {float(sample_haar_frame(1, 1, RngStream(s)).vectors[0, 0]) for s in range(12)}
        assert values <= {1.0, -1.0}
        assert len(values) == 2

    def test_projection_mean_matches_subspace_fraction(self):
        # |proj of a fixed unit vector onto a random k-frame|^2 has mean k/d.
        d, k, draws = 16, 8, 10_000
        z = np.zeros(d)
        z[0] = 1.0
        root = RngStream(5)
        samples = np.empty(draws)
        for i in range(draws):
            frame = sample_haar_frame(d, k, root.child(i))
            samples[i] = float(np.sum(frame.coords(z) ** 2))
        se = samples.std(ddof=1) / math.sqrt(draws)
        assert abs(samples.mean() - k / d) <= 3 * se

    def test_invariant_violations_rejected(self):
        with pytest.raises(DomainError):
            Frame(ambient_dim=2, vectors=np.array([[1.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(DomainError):
            sample_haar_frame(2, 3, RngStream(0))
        with pytest.raises(DimensionMismatchError):
            Frame(ambient_dim=3, vectors=np.eye(2))

    def test_coords_dimension_check(self):
        frame = sample_haar_frame(4, 2, RngStream(9))
        with pytest.raises(DimensionMismatchError):
            frame.coords(np.zeros(3))


class TestTailBounds:
    def test_report_passes_and_has_trivial_cell(self):
        report = verify_tail_bounds(100, 20_000, RngStream(3))
        assert report.all_passed()
        # The t=0 relative-tail cell has bound exactly 1.
        trivial = [a for a in report.assertions if "t=0.0" in a.description]
        assert trivial and trivial[0].bound >= 1.0

    def test_chi_square_extreme_threshold_unreachable(self):
        report = verify_tail_bounds(100, 20_000, RngStream(4))
        upper25 = report.value("chi2_upper_tail[t=25.0]")
        assert upper25 == 0.0

    def test_parameter_validation(self):
        with pytest.raises(DomainError):
            verify_tail_bounds(1, 20_000, RngStream(0))
        with pytest.raises(DomainError):
            verify_tail_bounds(100, 100, RngStream(0))
