"""Adaptive-hardness instances over R^{2n}: oracle, triples, event detectors.

An instance hides an n-dimensional halfspace-intersection body inside a
random "control" subspace; the orthogonal "action" subspace carries one
random direction per halfspace.  A point inside Ball(sqrt(2n)) whose control
projection violates some halfspaces is labeled 1 exactly when, for every
violated index j, its inner product with the j-th action direction falls
outside the strip [-sqrt(n)/2, sqrt(n)/2].  Walking from such a point along
the action direction of a uniquely violated halfspace crosses the strip
boundary and produces collinear labels (1, 0, 1): a certificate of
non-convexity that is hard to find but covers constant measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, DomainError
from .gauss import Frame, sample_haar_frame, std_normal_cdf
from .nazarov import (
    NazarovBody,
    default_halfspace_count,
    sample_body,
    solve_r_half,
)
from .report import ExperimentReport, binom_se, wilson_interval
from .rng import RngStream

ORTHO_TOL = 1e-8
R_CONVENTION_TOL = 1e-9
DEFAULT_A_CONST = 1.0


@dataclass(frozen=True)
class AdaptiveInstance:
    n: int
    N: int
    r: float
    control: Frame          # n rows in R^{2n}
    action: Frame           # n rows in R^{2n}, orthogonal to control
    body: NazarovBody       # normals in control coordinates
    action_dirs: np.ndarray  # (N, n) coordinates of the v^i in the action frame
    stream: RngStream

    def __post_init__(self):
        if self.control.ambient_dim != 2 * self.n or self.action.ambient_dim != 2 * self.n:
            raise DimensionMismatchError("frames must live in R^{2n}")
        if self.control.k != self.n or self.action.k != self.n:
            raise DomainError("control and action frames must each hold n vectors")
        cross = self.control.vectors @ self.action.vectors.T
        if np.abs(cross).max() > ORTHO_TOL:
            raise DomainError("control and action subspaces are not orthogonal")
        if self.body.n != self.n or self.body.N != self.N:
            raise DomainError("body shape inconsistent with the instance")
        if abs(std_normal_cdf(self.r / math.sqrt(self.n)) ** self.N - 0.5) > R_CONVENTION_TOL:
            raise DomainError("r does not satisfy the half-membership convention")
        dirs = np.asarray(self.action_dirs, dtype=np.float64)
        if dirs.shape != (self.N, self.n):
            raise DimensionMismatchError("action_dirs must have shape (N, n)")
        dirs.flags.writeable = False
        object.__setattr__(self, "action_dirs", dirs)

    @property
    def ambient_dim(self) -> int:
        return 2 * self.n

    @property
    def strip_halfwidth(self) -> float:
        # Fixed by the construction, not configurable.
        return math.sqrt(self.n) / 2.0


@dataclass(frozen=True)
class ViolatingTriple:
    x: np.ndarray
    x_plus: np.ndarray
    x_minus: np.ndarray
    flap_index: int


def sample_adaptive_instance(
    n: int, N_override: int | None, rng: RngStream
) -> AdaptiveInstance:
    """Draw control/action subspaces, the hidden body, and action directions."""
    if n < 4:
        raise DomainError("need n >= 4")
    N = N_override if N_override is not None else default_halfspace_count(n)
    full = sample_haar_frame(2 * n, 2 * n, rng.child(0))
    control = Frame(ambient_dim=2 * n, vectors=full.vectors[:n])
    action = Frame(ambient_dim=2 * n, vectors=full.vectors[n:])
    r = solve_r_half(n, N)
    body = sample_body(n, N, r, rng.child(1), frame=control)
    action_dirs = rng.child(2).generator().standard_normal((N, n))
    return AdaptiveInstance(
        n=n,
        N=N,
        r=r,
        control=control,
        action=action,
        body=body,
        action_dirs=action_dirs,
        stream=rng,
    )


def eval_adaptive_batch(inst: AdaptiveInstance, points: np.ndarray) -> np.ndarray:
    """Oracle labels for a batch of rows in R^{2n}."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != inst.ambient_dim:
        raise DimensionMismatchError(f"points must have dimension {inst.ambient_dim}")
    m = points.shape[0]
    labels = np.zeros(m, dtype=np.int8)
    norms_sq = np.einsum("ij,ij->i", points, points)
    xc = inst.control.coords(points)
    xc_sq = np.einsum("ij,ij->i", xc, xc)
    live = (norms_sq <= 2.0 * inst.n) & (xc_sq <= inst.n)
    if not np.any(live):
        return labels
    idx = np.nonzero(live)[0]
    viol = xc[idx] @ inst.body.normals.T > inst.r          # (m_live, N)
    any_viol = viol.any(axis=1)
    labels[idx[~any_viol]] = 1                              # inside the body
    flap_rows = idx[any_viol]
    if flap_rows.size:
        xa = inst.action.coords(points[flap_rows])          # (m_f, n)
        proj = xa @ inst.action_dirs.T                      # <v^j, x> for all j
        outside_strip = np.abs(proj) > inst.strip_halfwidth
        ok = np.logical_or(outside_strip, ~viol[any_viol]).all(axis=1)
        labels[flap_rows[ok]] = 1
    return labels


def eval_adaptive(inst: AdaptiveInstance, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.ambient_dim,):
        raise DimensionMismatchError(f"expected a point of dimension {inst.ambient_dim}")
    return int(eval_adaptive_batch(inst, x[None, :])[0])


def convexified_oracle(inst: AdaptiveInstance):
    """Indicator of Ball(sqrt(2n)) intersected with the hidden body: the
    strip-free (width-zero) convex version of the instance, for controls."""

    def oracle_batch(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        norms_sq = np.einsum("ij,ij->i", points, points)
        xc = inst.control.coords(points)
        xc_sq = np.einsum("ij,ij->i", xc, xc)
        ok = (norms_sq <= 2.0 * inst.n) & (xc_sq <= inst.n)
        labels = np.zeros(points.shape[0], dtype=np.int8)
        idx = np.nonzero(ok)[0]
        if idx.size:
            no_viol = ~(xc[idx] @ inst.body.normals.T > inst.r).any(axis=1)
            labels[idx[no_viol]] = 1
        return labels

    return oracle_batch


def thin_shell_bounds(n: int) -> tuple[float, float]:
    root = math.sqrt(2.0 * n)
    return root - 2.0, root - 1.0


def _triple_seed_scan(inst, points, a_const, oracle_batch=None):
    """Find seeds of violating triples within a batch of candidate points.

    A seed lies in the thin radial shell, has control norm in
    [sqrt(n) - a, sqrt(n)], violates exactly one halfspace, and together with
    x +- v/|v| replays oracle labels (0, 1, 1).
    Returns (seed rows, flap indices, plus points, minus points).
    """
    if oracle_batch is None:
        oracle_batch = lambda pts: eval_adaptive_batch(inst, pts)
    points = np.atleast_2d(points)
    lo, hi = thin_shell_bounds(inst.n)
    norms = np.sqrt(np.einsum("ij,ij->i", points, points))
    mask = (norms >= lo) & (norms <= hi)
    if not mask.any():
        return (np.empty((0, inst.ambient_dim)), np.empty(0, int)) + (None, None)
    pts = points[mask]
    xc = inst.control.coords(pts)
    xc_norm = np.sqrt(np.einsum("ij,ij->i", xc, xc))
    root_n = math.sqrt(inst.n)
    mask2 = (xc_norm >= root_n - a_const) & (xc_norm <= root_n)
    pts = pts[mask2]
    if pts.shape[0] == 0:
        return (np.empty((0, inst.ambient_dim)), np.empty(0, int)) + (None, None)
    viol = inst.control.coords(pts) @ inst.body.normals.T > inst.r
    counts = viol.sum(axis=1)
    unique = counts == 1
    pts = pts[unique]
    if pts.shape[0] == 0:
        return (np.empty((0, inst.ambient_dim)), np.empty(0, int)) + (None, None)
    flaps = np.argmax(viol[unique], axis=1)
    dirs = inst.action_dirs[flaps]                       # (m, n) action coords
    steps = inst.action.embed(dirs)                      # ambient unit-scale embed
    steps /= np.linalg.norm(steps, axis=1, keepdims=True)
    plus = pts + steps
    minus = pts - steps
    lab0 = oracle_batch(pts)
    lab_p = oracle_batch(plus)
    lab_m = oracle_batch(minus)
    good = (lab0 == 0) & (lab_p == 1) & (lab_m == 1)
    return pts[good], flaps[good], plus[good], minus[good]


def sample_violating_triple(
    inst: AdaptiveInstance,
    max_attempts: int,
    a_const: float = DEFAULT_A_CONST,
    rng: RngStream | None = None,
) -> ViolatingTriple | None:
    """Rejection-sample one violating triple; None if no hit within budget."""
    if not a_const > 0:
        raise DomainError("need a_const > 0")
    if rng is None:
        raise DomainError("an RngStream is required")
    gen = rng.generator()
    batch = 4096
    attempts = 0
    while attempts < max_attempts:
        m = min(batch, max_attempts - attempts)
        pts = gen.standard_normal((m, inst.ambient_dim))
        attempts += m
        seeds, flaps, plus, minus = _triple_seed_scan(inst, pts, a_const)
        if seeds.shape[0]:
            return ViolatingTriple(
                x=seeds[0], x_plus=plus[0], x_minus=minus[0], flap_index=int(flaps[0])
            )
    return None


def pdf_ratio_floor(n: int) -> float:
    """Worst-case standard-Gaussian density ratio across a triple's radii.

    Triple points lie within radius 1 of a thin-shell seed; the extreme radii
    are sqrt(2n) - 3 and sqrt(2n), so the density ratio is bounded below by
    exp(((sqrt(2n)-3)^2 - 2n)/2).
    """
    root = math.sqrt(2.0 * n)
    return math.exp(((root - 3.0) ** 2 - 2.0 * n) / 2.0)


def estimate_distance_lb(
    inst: AdaptiveInstance,
    trials: int,
    rng: RngStream,
    a_const: float = DEFAULT_A_CONST,
    oracle_batch=None,
) -> ExperimentReport:
    """Estimate the probability that a Gaussian point seeds a violating triple.

    Reports the seed frequency with a Wilson interval and a conservative
    distance proxy: frequency / 3 (each point joins at most three triples)
    times the worst-case density ratio across the triple radii.
    """
    if trials < 100_000:
        raise DomainError("need trials >= 1e5")
    report = ExperimentReport(
        "distance-lb",
        {"n": inst.n, "N": inst.N, "trials": trials, "a_const": a_const},
        rng.seed,
    )
    gen = rng.generator()
    hits = 0
    batch = 8192
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        pts = gen.standard_normal((m, inst.ambient_dim))
        seeds, _, _, _ = _triple_seed_scan(inst, pts, a_const, oracle_batch)
        hits += seeds.shape[0]
        done += m
    p_hat = hits / trials
    lo, hi = wilson_interval(hits, trials)
    floor = pdf_ratio_floor(inst.n)
    report.add_estimate("p_hat", p_hat, binom_se(hits, trials), trials)
    report.add_estimate("wilson_lower_99", lo)
    report.add_estimate("wilson_upper_99", hi)
    report.add_estimate("pdf_ratio_floor", floor)
    report.add_estimate("distance_proxy", p_hat / 3.0 * floor)
    report.assert_geq(
        "triple-seed probability positive at 99% confidence", lo, np.nextafter(0.0, 1.0),
        source="derived",
    )
    return report


# -- events over transcripts ---------------------------------------------------


def detect_events(inst: AdaptiveInstance, transcript, q: int) -> dict:
    """Exact evaluation of the transcript events used by the hardness argument.

    Events are computed over the restricted query set {x : |x_C| <= sqrt(n)};
    the colinearity and norm-comparison events use all queries.  An empty
    transcript satisfies every event vacuously.
    """
    points = transcript.all_points() if hasattr(transcript, "all_points") else np.atleast_2d(transcript)
    if points.size == 0:
        return {k: True for k in ("E1", "E2", "E11", "E12", "E13", "E14", "E15")}
    if points.shape[1] != inst.ambient_dim:
        raise DimensionMismatchError(f"transcript points must have dimension {inst.ambient_dim}")

    root_n = math.sqrt(inst.n)
    xc = inst.control.coords(points)
    xc_norm = np.sqrt(np.einsum("ij,ij->i", xc, xc))
    restricted = xc_norm <= root_n
    rest_idx = np.nonzero(restricted)[0]
    dots = xc @ inst.body.normals.T                        # (m, N)
    viol = dots > inst.r
    viol[~restricted] = False                              # flaps live inside the ball
    counts = viol.sum(axis=1)

    threshold = 1000.0 * math.sqrt(q) * inst.n ** 0.25

    # E1: restricted queries touch at most q flaps each, and queries sharing a
    # flap are pairwise within 1000 sqrt(q) n^{1/4}.
    e1 = bool((counts[rest_idx] <= q).all()) if rest_idx.size else True
    e2 = True
    shared = np.nonzero(viol[rest_idx].any(axis=0))[0] if rest_idx.size else []
    if rest_idx.size:
        xa = inst.action.coords(points)
        proj = xa @ inst.action_dirs.T                     # (m, N)
        out = np.abs(proj) > inst.strip_halfwidth
        for i in shared:
            members = rest_idx[viol[rest_idx, i]]
            if members.size < 2:
                continue
            sub = points[members]
            diff = sub[:, None, :] - sub[None, :, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            if dist.max() > threshold:
                e1 = False
            vals = out[members, i]
            if vals.any() and not vals.all():
                e2 = False

    # E11: no restricted query violates q or more halfspaces.
    e11 = bool((counts[rest_idx] < q).all()) if rest_idx.size else True

    # E12: every query in a flap stays in the control shell |x_C| >= sqrt(n) - 100q.
    in_flap = counts > 0
    e12 = bool((xc_norm[in_flap] >= root_n - 100.0 * q).all()) if in_flap.any() else True

    # E13: no restricted query has <x, g_i> >= r + 100 q n^{1/4}.
    e13 = (
        bool((dots[rest_idx].max(axis=1) < inst.r + 100.0 * q * inst.n ** 0.25).all())
        if rest_idx.size
        else True
    )

    # E14: fails when some flap member x and restricted z (control parts not
    # colinear, z_C = (1+a) x_C + b y with y unit, y perp x_C, b > 0) give
    # |<y, g_i>| >= 100 sqrt(q).
    e14 = True
    if rest_idx.size >= 2:
        for xi in rest_idx:
            flaps_x = np.nonzero(viol[xi])[0]
            if flaps_x.size == 0:
                continue
            xci = xc[xi]
            xci_sq = float(xci @ xci)
            if xci_sq == 0.0:
                continue
            for zi in rest_idx:
                if zi == xi:
                    continue
                y_vec = xc[zi] - (float(xc[zi] @ xci) / xci_sq) * xci
                b = float(np.linalg.norm(y_vec))
                if b <= 1e-12:
                    continue  # colinear control parts
                y_unit = y_vec / b
                g_dots = np.abs(inst.body.normals[flaps_x] @ y_unit)
                if (g_dots >= 100.0 * math.sqrt(q)).any():
                    e14 = False
                    break
            if not e14:
                break

    # E15: every pair satisfies |x - y| <= 2 |(x - y)_C|.
    e15 = True
    if points.shape[0] >= 2:
        diff = points[:, None, :] - points[None, :, :]
        dist_sq = np.einsum("ijk,ijk->ij", diff, diff)
        diff_c = xc[:, None, :] - xc[None, :, :]
        dist_c_sq = np.einsum("ijk,ijk->ij", diff_c, diff_c)
        e15 = bool((dist_sq <= 4.0 * dist_c_sq + 1e-12).all())

    return {"E1": e1, "E2": e2, "E11": e11, "E12": e12, "E13": e13, "E14": e14, "E15": e15}


def event_rate_experiment(n: int, q: int, instances: int, rng: RngStream) -> ExperimentReport:
    """Frequency of the pairwise-clustering event over random q-query transcripts."""
    report = ExperimentReport(
        "event-rate", {"n": n, "q": q, "instances": instances}, rng.seed
    )
    from .testers import QueryTranscript

    e1_hits = 0
    e2_hits = 0
    for t in range(instances):
        inst = sample_adaptive_instance(n, None, rng.child(2 * t))
        pts = rng.child(2 * t + 1).generator().standard_normal((q, 2 * n))
        labels = eval_adaptive_batch(inst, pts)
        transcript = QueryTranscript(dim=2 * n)
        for row, lab in zip(pts, labels):
            transcript.append(row, int(lab))
        flags = detect_events(inst, transcript, q)
        e1_hits += flags["E1"]
        e2_hits += flags["E2"]
    freq1 = e1_hits / instances
    report.add_estimate("E1_rate", freq1, binom_se(e1_hits, instances), instances)
    report.add_estimate("E2_rate", e2_hits / instances, binom_se(e2_hits, instances), instances)
    report.assert_geq(
        "clustering event holds on at least 95% of random transcripts",
        freq1,
        0.95,
        source="derived",
    )
    return report


# -- strip crossing -------------------------------------------------------------


def strip_crossing_experiment(
    n: int,
    q: int,
    cluster_radius: float | None,
    trials: int,
    rng: RngStream,
    ratio_limit: float = 1.0,
) -> ExperimentReport:
    """Conditional probability that a nearby point crosses the strip boundary.

    A cluster of q action-space points sits on the sphere of radius sqrt(n);
    the extra point y is displaced orthogonally by the cluster radius.  Over
    a Gaussian action direction v, conditioned on the cluster agreeing on the
    strip indicator, we measure how often y disagrees.  The default radius
    1000 sqrt(q) n^{1/4} exceeds the geometry of Ball(sqrt(2n)) at desk
    dimensions, so displacements are clamped to sqrt(n), which keeps every
    constructed projection realizable by a point of the ball.
    """
    if q < 1:
        raise DomainError("need q >= 1")
    requested = cluster_radius if cluster_radius is not None else 1000.0 * math.sqrt(q) * n**0.25
    if requested < 0:
        raise DomainError("cluster radius must be nonnegative")
    effective = min(requested, math.sqrt(n))
    report = ExperimentReport(
        "strip-crossing",
        {
            "n": n,
            "q": q,
            "cluster_radius": requested,
            "effective_radius": effective,
            "trials": trials,
        },
        rng.seed,
    )
    gen = rng.generator()
    half = math.sqrt(n) / 2.0
    log2n = math.log2(n)
    gamma = 50000.0 * math.sqrt(q) * n**0.25 * log2n
    shift_bound = 1000.0 * math.sqrt(q) * n**0.25 * log2n

    consistent = 0
    crossings = 0
    near_boundary = 0
    big_shift = 0
    batch = 20_000
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        base = gen.standard_normal((m, n))
        base /= np.linalg.norm(base, axis=1, keepdims=True)
        base *= math.sqrt(n)
        # orthogonal displacements for the q-1 cluster mates and for y
        def orth(scale_max):
            raw = gen.standard_normal((m, n))
            raw -= (np.einsum("ij,ij->i", raw, base) / n)[:, None] * base
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            return raw * scale_max

        v = gen.standard_normal((m, n))
        t_base = np.einsum("ij,ij->i", v, base)
        out_base = np.abs(t_base) > half
        agree = np.ones(m, dtype=bool)
        # Displacement budget: mates within radius/3 and y at 2 radius/3 keeps
        # every cluster-to-y distance at most the cluster radius.
        for _ in range(q - 1):
            mate = base + orth(effective / 3.0) if effective > 0 else base
            t_mate = np.einsum("ij,ij->i", v, mate)
            agree &= (np.abs(t_mate) > half) == out_base
        y = base + orth(2.0 * effective / 3.0) if effective > 0 else base
        t_y = np.einsum("ij,ij->i", v, y)
        cross = (np.abs(t_y) > half) != out_base
        consistent += int(np.count_nonzero(agree))
        crossings += int(np.count_nonzero(agree & cross))
        near_boundary += int(np.count_nonzero(np.abs(np.abs(t_base) - half) <= gamma))
        big_shift += int(np.count_nonzero(np.abs(t_y - t_base) > shift_bound))
        done += m

    p_cond = crossings / consistent if consistent else 0.0
    scale = math.sqrt(q) * log2n / n**0.25
    report.add_estimate("conditional_crossing", p_cond, binom_se(crossings, max(consistent, 1)), consistent)
    report.add_estimate("ratio_to_scale", p_cond / scale)
    report.add_estimate("boundary_window_rate", near_boundary / trials, 0.0, trials)
    report.add_estimate("large_shift_rate", big_shift / trials, 0.0, trials)
    report.assert_leq(
        "conditional crossing probability <= recorded constant * sqrt(q) log2(n) / n^{1/4}",
        p_cond,
        ratio_limit * scale,
        source="derived",
    )
    return report
