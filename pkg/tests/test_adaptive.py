import math

import numpy as np
import pytest

from convexlab.adaptive import (
    AdaptiveInstance,
    convexified_oracle,
    detect_events,
    estimate_distance_lb,
    eval_adaptive,
    eval_adaptive_batch,
    event_rate_experiment,
    sample_adaptive_instance,
    sample_violating_triple,
    strip_crossing_experiment,
    thin_shell_bounds,
)
from convexlab.errors import DimensionMismatchError, DomainError
from convexlab.gauss import Frame, sample_haar_frame, std_normal_cdf
from convexlab.nazarov import classify
from convexlab.rng import RngStream
from convexlab.testers import QueryTranscript, in_convex_hull, run_one_sided


@pytest.fixture(scope="module")
def inst100():
    return sample_adaptive_instance(100, None, RngStream(301))


@pytest.fixture(scope="module")
def inst16():
    return sample_adaptive_instance(16, None, RngStream(302))


class TestInstance:
    def test_default_halfspace_count(self, inst16):
        assert inst16.N == 16

    def test_frames_orthogonal(self, inst16):
        cross = inst16.control.vectors @ inst16.action.vectors.T
        assert np.abs(cross).max() <= 1e-8

    def test_half_membership_convention(self, inst100):
        value = std_normal_cdf(inst100.r / 10.0) ** inst100.N
        assert abs(value - 0.5) <= 1e-9

    def test_minimum_dimension(self):
        with pytest.raises(DomainError):
            sample_adaptive_instance(3, None, RngStream(0))


class TestOracle:
    def test_far_point_labeled_zero(self, inst16):
        x = np.zeros(32)
        x[0] = 1.1 * math.sqrt(32)
        assert eval_adaptive(inst16, x) == 0

    def test_origin_labeled_one(self, inst16):
        assert eval_adaptive(inst16, np.zeros(32)) == 1

    def test_strip_zero_point(self, inst100):
        # A point in exactly one flap whose action inner product is zero lies
        # inside the strip, so its label is 0.
        trip = sample_violating_triple(inst100, 200_000, rng=RngStream(303))
        assert trip is not None
        v = inst100.action_dirs[trip.flap_index]
        v_ambient = inst100.action.embed(v)
        proj = float(inst100.action.coords(trip.x) @ v)
        shifted = trip.x - proj * v_ambient / float(v @ v)
        assert abs(float(inst100.action.coords(shifted) @ v)) <= 1e-6
        assert np.linalg.norm(shifted) <= math.sqrt(200)
        assert eval_adaptive(inst100, shifted) == 0

    def test_dimension_mismatch(self, inst16):
        with pytest.raises(DimensionMismatchError):
            eval_adaptive(inst16, np.zeros(31))

    def test_rotation_invariance(self, inst16):
        d = 32
        rot = sample_haar_frame(d, d, RngStream(304)).vectors
        rotated = AdaptiveInstance(
            n=inst16.n,
            N=inst16.N,
            r=inst16.r,
            control=Frame(ambient_dim=d, vectors=inst16.control.vectors @ rot.T),
            action=Frame(ambient_dim=d, vectors=inst16.action.vectors @ rot.T),
            body=inst16.body,
            action_dirs=inst16.action_dirs,
            stream=inst16.stream,
        )
        pts = RngStream(305).generator().standard_normal((1000, d))
        base = eval_adaptive_batch(inst16, pts)
        conj = eval_adaptive_batch(rotated, pts @ rot.T)
        np.testing.assert_array_equal(base, conj)


class TestViolatingTriples:
    def test_replay_and_geometry(self, inst100):
        trip = sample_violating_triple(inst100, 200_000, rng=RngStream(306))
        assert trip is not None
        labels = (
            eval_adaptive(inst100, trip.x),
            eval_adaptive(inst100, trip.x_plus),
            eval_adaptive(inst100, trip.x_minus),
        )
        assert labels == (0, 1, 1)
        lo, hi = thin_shell_bounds(inst100.n)
        assert lo <= np.linalg.norm(trip.x) <= hi
        np.testing.assert_allclose(trip.x, 0.5 * (trip.x_plus + trip.x_minus), atol=1e-12)
        np.testing.assert_allclose(
            np.linalg.norm(trip.x_plus - trip.x), 1.0, atol=1e-12
        )

    def test_control_class_unchanged_along_action(self, inst100):
        trip = sample_violating_triple(inst100, 200_000, rng=RngStream(307))
        assert trip is not None
        base = classify(inst100.body, inst100.control.coords(trip.x))
        plus = classify(inst100.body, inst100.control.coords(trip.x_plus))
        minus = classify(inst100.body, inst100.control.coords(trip.x_minus))
        assert base == plus == minus

    def test_triple_is_hull_certificate(self, inst100):
        trip = sample_violating_triple(inst100, 200_000, rng=RngStream(308))
        assert trip is not None
        lam = in_convex_hull(trip.x, np.vstack([trip.x_minus, trip.x_plus]))
        assert lam is not None
        np.testing.assert_allclose(lam, [0.5, 0.5], atol=1e-6)

    def test_distance_lower_bound_positive(self, inst100):
        report = estimate_distance_lb(inst100, 100_000, RngStream(309))
        assert report.all_passed()
        assert report.value("p_hat") > 0

    def test_convexified_instance_has_no_triples(self, inst100):
        oracle = convexified_oracle(inst100)
        report = estimate_distance_lb(inst100, 100_000, RngStream(310), oracle_batch=oracle)
        assert report.value("p_hat") == 0.0

    def test_a_const_validation(self, inst16):
        with pytest.raises(DomainError):
            sample_violating_triple(inst16, 100, a_const=0.0, rng=RngStream(0))


class TestZeroLabelAnatomy:
    def test_every_inner_zero_comes_from_a_strip_hit(self, inst100):
        # Inside the ball with a small control part, the only way to be
        # labeled 0 is to sit in a flap whose strip test fails.
        pts = RngStream(320).generator().standard_normal((4000, 200))
        labels = eval_adaptive_batch(inst100, pts)
        norms_sq = np.einsum("ij,ij->i", pts, pts)
        xc = inst100.control.coords(pts)
        xc_sq = np.einsum("ij,ij->i", xc, xc)
        inner_zero = (labels == 0) & (norms_sq <= 200.0) & (xc_sq <= 100.0)
        rows = np.nonzero(inner_zero)[0]
        assert rows.size > 0
        for i in rows:
            viol = np.nonzero(inst100.body.normals @ xc[i] > inst100.r)[0]
            assert viol.size >= 1
            xa = inst100.action.coords(pts[i])
            in_strip = [
                abs(float(inst100.action_dirs[j] @ xa)) <= inst100.strip_halfwidth
                for j in viol
            ]
            assert any(in_strip)

    def test_seed_probability_stable_across_instances(self):
        # Coefficient of variation of the triple-seed probability over seeds.
        p_hats = []
        for seed in range(10):
            inst = sample_adaptive_instance(100, None, RngStream(330, seed))
            report = estimate_distance_lb(inst, 100_000, RngStream(331, seed))
            p_hats.append(report.value("p_hat"))
        p_hats = np.array(p_hats)
        assert p_hats.min() > 0
        assert p_hats.std(ddof=1) / p_hats.mean() < 0.5


class TestEvents:
    def test_empty_transcript_vacuous(self, inst16):
        flags = detect_events(inst16, QueryTranscript(dim=32), 3)
        assert all(flags.values())

    def test_duplicate_flap_point_keeps_strip_event(self, inst100):
        trip = sample_violating_triple(inst100, 200_000, rng=RngStream(311))
        assert trip is not None
        transcript = QueryTranscript(dim=200)
        transcript.append(trip.x, 0)
        transcript.append(trip.x, 0)
        flags = detect_events(inst100, transcript, 3)
        assert flags["E2"]

    def test_event_rate_on_random_transcripts(self):
        report = event_rate_experiment(64, 3, 200, RngStream(312))
        assert report.all_passed()
        assert report.value("E1_rate") >= 0.95

    def test_reject_implies_strip_disagreement(self, inst100):
        # A run that rejects must have seen two same-flap queries with
        # different strip indicators: the E2 event fails on its transcript.
        trip = sample_violating_triple(inst100, 200_000, rng=RngStream(313))
        assert trip is not None
        queries = [trip.x_minus, trip.x_plus, trip.x]

        def cheater(history):
            return queries[len(history)] if len(history) < 3 else None

        oracle = lambda x: eval_adaptive(inst100, x)
        verdict, transcript = run_one_sided(cheater, oracle, 3, 200)
        assert verdict.outcome == "reject"
        flags = detect_events(inst100, transcript, 3)
        assert not flags["E2"]


class TestStripCrossing:
    def test_zero_radius_never_crosses(self):
        report = strip_crossing_experiment(64, 4, 0.0, 20_000, RngStream(314))
        assert report.value("conditional_crossing") == 0.0

    def test_desk_scale_rate_bounded(self):
        report = strip_crossing_experiment(100, 4, 2.0 * 100**0.25, 50_000, RngStream(315))
        assert report.all_passed()
        assert 0.0 < report.value("conditional_crossing") < 1.0
