import math

import numpy as np
import pytest

from conftest import bisect_quantile
from convexlab.errors import DimensionMismatchError, DomainError, ResourceLimitError
from convexlab.gauss import sample_haar_frame, std_normal_cdf
from convexlab.nazarov import (
    NazarovBody,
    PointKind,
    classify,
    classify_ambient,
    default_halfspace_count,
    effective_c1_half,
    estimate_unique_volume,
    flap_dogear_threshold,
    membership_prob,
    pointwise_flap_dogear_check,
    check_r_estimate,
    sample_body,
    solve_r,
    solve_r_half,
    verify_flap_dogear_ratio,
    verify_high_degree_bound,
    violation_counts,
)
from convexlab.rng import RngStream


class TestSolveR:
    def test_defining_equation_roundtrip(self):
        r = solve_r(100, 1024, 0.01)
        assert abs(std_normal_cdf(r / 10.0) - (1.0 - 0.01 / 1024)) <= 1e-12

    def test_desk_value_against_oracle(self):
        # The series oracle keeps only ~1e-9 of quantile precision this deep
        # in the tail; the defining-equation roundtrip above is the tight check.
        oracle = -bisect_quantile(0.01 / 1024)  # upper-tail quantile by symmetry
        assert abs(solve_r(100, 1024, 0.01) - 10.0 * oracle) <= 2e-8
        assert abs(solve_r(100, 1024, 0.01) - 42.7) <= 0.05

    def test_half_membership_convention(self):
        r = solve_r_half(100, 1024)
        oracle = -bisect_quantile(1.0 - 0.5 ** (1.0 / 1024))
        assert abs(r - 10.0 * oracle) <= 1e-8
        assert abs(r - 32.05) <= 0.02
        assert abs(effective_c1_half(1024) - math.log(2)) <= 1.0 / 1024

    def test_domain(self):
        with pytest.raises(DomainError):
            solve_r(100, 10, 10.0)
        with pytest.raises(DomainError):
            solve_r(100, 10, 0.0)

    def test_estimate_ratio_window_and_monotonicity(self):
        desk = check_r_estimate(100, 1024, 0.01)
        assert desk.all_passed()
        big = check_r_estimate(10_000, 2**100, 0.01)
        assert big.value("ratio") > desk.value("ratio")
        assert big.value("ratio") <= 1.0


class TestSampleBody:
    def test_determinism(self):
        a = sample_body(8, 16, 5.0, RngStream(11))
        b = sample_body(8, 16, 5.0, RngStream(11))
        np.testing.assert_array_equal(a.normals, b.normals)

    def test_trivial_membership(self):
        body = sample_body(2, 1, 10.0, RngStream(0))
        assert classify(body, np.zeros(2)).kind is PointKind.IN_BODY

    def test_memory_cap(self):
        with pytest.raises(ResourceLimitError):
            sample_body(1000, 1000, 5.0, RngStream(0), memory_cap=10_000)

    def test_normal_norm_concentration(self):
        n, num = 100, 1024
        body = sample_body(n, num, solve_r_half(n, num), RngStream(5))
        norms = np.linalg.norm(body.normals, axis=1)
        lo = math.sqrt(n) - 10.0 * n**0.25
        hi = math.sqrt(n) + 10.0 * n**0.25
        assert np.mean((norms >= lo) & (norms <= hi)) >= 0.99

    def test_default_halfspace_count(self):
        assert default_halfspace_count(16) == 16
        assert default_halfspace_count(100) == 1024
        with pytest.warns(RuntimeWarning):
            assert default_halfspace_count(1600) == 2**20


class TestClassify:
    def test_origin_in_body(self):
        body = sample_body(8, 32, solve_r_half(8, 32), RngStream(3))
        result = classify(body, np.zeros(8))
        assert result.kind is PointKind.IN_BODY and result.violated == ()

    def test_outside_ball(self):
        body = sample_body(8, 32, solve_r_half(8, 32), RngStream(3))
        x = np.zeros(8)
        x[0] = 1.01 * math.sqrt(8)
        assert classify(body, x).kind is PointKind.OUTSIDE

    def test_tie_counts_inside(self):
        normals = np.array([[1.0, 0.0]])
        body = NazarovBody(n=2, N=1, r=1.0, normals=normals)
        assert classify(body, np.array([1.0, 0.0])).kind is PointKind.IN_BODY
        assert classify(body, np.array([1.0 + 1e-9, 0.0])).kind is PointKind.IN_FLAPS

    def test_dimension_mismatch(self):
        body = sample_body(8, 32, 5.0, RngStream(3))
        with pytest.raises(DimensionMismatchError):
            classify(body, np.zeros(9))

    def test_embedding_frame_agrees_with_intrinsic(self):
        n, d = 6, 12
        frame = sample_haar_frame(d, n, RngStream(21))
        body = sample_body(n, 32, solve_r_half(n, 32), RngStream(22), frame=frame)
        plain = NazarovBody(n=n, N=32, r=body.r, normals=body.normals)
        gen = RngStream(23).generator()
        for _ in range(50):
            x = gen.standard_normal(d)
            via_frame = classify_ambient(body, x)
            direct = classify(plain, frame.coords(x))
            assert via_frame == direct


class TestMembershipProb:
    def test_outside_ball_zero(self):
        assert membership_prob(100, 1024, 40.0, 10.1) == 0.0

    def test_half_at_shell(self):
        r = solve_r_half(100, 1024)
        assert abs(membership_prob(100, 1024, r, 10.0) - 0.5) <= 1e-10

    def test_closed_form_value(self):
        r = solve_r(100, 1024, 0.01)
        expected = math.exp(1024 * math.log1p(-0.01 / 1024))
        assert abs(membership_prob(100, 1024, r, 10.0) - expected) <= 1e-12

    def test_decreasing_in_norm(self):
        r = solve_r(100, 1024, 0.01)
        values = [membership_prob(100, 1024, r, s) for s in (2.0, 5.0, 8.0, 10.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_monte_carlo_agreement(self):
        n, num = 64, 128
        r = solve_r(n, num, 0.01)
        closed = membership_prob(n, num, r, math.sqrt(n))
        x = np.zeros(n)
        x[0] = math.sqrt(n)
        root = RngStream(31)
        hits = sum(
            classify(sample_body(n, num, r, root.child(i)), x).kind is PointKind.IN_BODY
            for i in range(2000)
        )
        freq = hits / 2000
        se = math.sqrt(closed * (1 - closed) / 2000)
        assert abs(freq - closed) <= 3 * se + 1e-9


class TestHighDegreeBound:
    def test_bound_holds_and_matches_binomial_form(self):
        n, num, c1 = 64, 256, 0.01
        r = solve_r(n, num, c1)
        report = verify_high_degree_bound(n, num, r, c1, 1, 20_000, RngStream(41))
        assert report.all_passed()
        closed = -math.expm1(num * math.log1p(-c1 / num))
        assert abs(report.value("shell_tail") - closed) <= 4 * math.sqrt(closed / 20_000)

    def test_q_validation(self):
        with pytest.raises(DomainError):
            verify_high_degree_bound(64, 256, 30.0, 0.01, 0, 1000, RngStream(0))


class TestUniqueVolume:
    def test_single_halfspace_closed_form(self):
        # With one halfspace the uniquely-violated volume has an explicit
        # integrand; Rao-Blackwellized sampling of it is the oracle.
        n, r = 16, 6.0
        report = estimate_unique_volume(
            n, 1, r, bodies=100, points_per_body=2000, rng=RngStream(51),
            check_concentration=False,
        )
        from convexlab.gauss import sf_array

        gen = RngStream(52).generator()
        x = gen.standard_normal((200_000, n))
        norms = np.sqrt(np.einsum("ij,ij->i", x, x))
        oracle = float(np.mean(np.where(norms <= math.sqrt(n), sf_array(r / norms), 0.0)))
        mean = report.value("vol_unique_mean")
        se = [e.ci_halfwidth for e in report.estimates if e.metric == "vol_unique_mean"][0]
        assert abs(mean - oracle) <= 4 * se + 2e-4

    def test_partition_identity(self):
        # unique + multiple + body counts partition the in-ball samples.
        n, num = 32, 64
        body = sample_body(n, num, solve_r(n, num, 0.5), RngStream(55))
        pts = RngStream(56).generator().standard_normal((5000, n))
        inside = np.einsum("ij,ij->i", pts, pts) <= n
        counts = violation_counts(body, pts)
        unique = inside & (counts == 1)
        multi = inside & (counts >= 2)
        in_body = inside & (counts == 0)
        assert np.array_equal(unique | multi | in_body, inside)
        assert not np.any(unique & multi)

    def test_ball_mass_near_half(self):
        pts = RngStream(57).generator().standard_normal((50_000, 100))
        frac = float(np.mean(np.einsum("ij,ij->i", pts, pts) <= 100.0))
        assert abs(frac - 0.5) <= 0.02

    def test_parameter_validation(self):
        with pytest.raises(DomainError):
            estimate_unique_volume(8, 4, 3.0, bodies=10, points_per_body=2000, rng=RngStream(0))


class TestFlapDogear:
    def test_thresholds(self):
        assert abs(flap_dogear_threshold(math.log(2)) - 0.8854) <= 5e-4
        assert abs(flap_dogear_threshold(0.01) - 198.0) <= 1e-9

    def test_ratio_bound_ln2(self):
        n, num, c1 = 64, 256, math.log(2)
        report = verify_flap_dogear_ratio(n, num, solve_r(n, num, c1), c1, 100_000, RngStream(61))
        assert report.all_passed()
        assert report.value("ratio") >= flap_dogear_threshold(c1)

    def test_pointwise_closed_form(self):
        for c1 in (math.log(2), 0.01):
            report = pointwise_flap_dogear_check(100, 1024, solve_r(100, 1024, c1), c1)
            assert report.all_passed()
