"""Degree-2 threshold instances with moment-matched coefficient laws.

The yes-law is a discrete distribution on nonnegative atoms matching the
first l raw moments of N(mu, 1); the no-law additionally carries a fixed
negative atom.  Instances weight the squared projections of a random
orthonormal basis (scaled by 1/sqrt(n)) by iid coefficient draws and
threshold the sum at mu, intersected with a ball of radius sqrt(n) + C.
Yes-instances are convex (ellipsoid cap); no-instances with a negative
coordinate are non-convex along lines in the span of the negative-coefficient
basis vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, DomainError, SolverError
from .gauss import Frame, sample_haar_frame
from .report import ExperimentReport, binom_se, wilson_interval
from .rng import RngStream

DEFAULT_CLIP = 10.0
DEFAULT_NEG_ATOM = -1.0
DEFAULT_NEG_PROB = 0.01
MOMENT_RTOL = 1e-9


def gaussian_raw_moment(mu: float, k: int) -> float:
    """k-th raw moment of N(mu, 1) by the standard recurrence."""
    if k < 0:
        raise DomainError("need k >= 0")
    m_prev, m_cur = 1.0, mu  # m_0, m_1
    if k == 0:
        return m_prev
    for j in range(2, k + 1):
        m_prev, m_cur = m_cur, mu * m_cur + (j - 1) * m_prev
    return m_cur


@dataclass(frozen=True)
class DiscreteDistribution:
    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if atoms.ndim != 1 or atoms.shape != probs.shape:
            raise DimensionMismatchError("atoms and probs must be matching vectors")
        if np.any(np.diff(atoms) <= 0):
            raise DomainError("atoms must be strictly increasing")
        if np.any(probs < 0):
            raise DomainError("probabilities must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise DomainError("probabilities must sum to 1 within 1e-12")
        atoms.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    def moment(self, k: int) -> float:
        """Direct sum of p_i a_i^k; independent of any solver internals."""
        return float(np.sum(self.probs * self.atoms ** k))

    def sample(self, size, rng: RngStream) -> np.ndarray:
        gen = rng.generator()
        idx = gen.choice(len(self.atoms), size=size, p=self.probs)
        return self.atoms[idx]

    def to_payload(self) -> dict:
        """Parallel arrays of shortest round-trip decimal strings."""
        return {
            "atoms": [repr(float(a)) for a in self.atoms],
            "probs": [repr(float(p)) for p in self.probs],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "DiscreteDistribution":
        return cls(
            np.array([float(a) for a in payload["atoms"]]),
            np.array([float(p) for p in payload["probs"]]),
        )


def _hermite_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes/weights of N(0,1) via the Jacobi eigenproblem."""
    if m == 1:
        return np.array([0.0]), np.array([1.0])
    off = np.sqrt(np.arange(1.0, m))
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    vals, vecs = np.linalg.eigh(jacobi)
    return vals, vecs[0] ** 2


def match_moments_nonneg(l: int) -> tuple[float, DiscreteDistribution]:
    """Nonnegative law matching the first l moments of N(mu, 1).

    Gauss-Hermite quadrature with (l+1)/2 nodes matches all moments up to l;
    mu is the magnitude of the most negative node, which shifts the smallest
    atom to exactly zero.  For l = 1 the one-node rule would force mu = 0, so
    mu = 1 with a single atom at 1 is used instead.
    """
    if l < 1 or l % 2 == 0:
        raise DomainError("need odd l >= 1")
    if l == 1:
        return 1.0, DiscreteDistribution(np.array([1.0]), np.array([1.0]))
    m = (l + 1) // 2
    nodes, weights = _hermite_nodes(m)
    mu = -float(nodes.min())
    atoms = nodes - nodes.min()
    dist = DiscreteDistribution(atoms, weights / weights.sum())
    _check_moments(dist, mu, l)
    if dist.atoms.min() < -1e-12:
        raise SolverError("quadrature produced a negative atom")
    return mu, dist


def match_moments_with_negative(
    mu: float,
    l: int,
    neg_atom: float = DEFAULT_NEG_ATOM,
    neg_prob: float = DEFAULT_NEG_PROB,
) -> DiscreteDistribution:
    """Law with a planted negative atom matching the first l moments of N(mu,1).

    The negative atom takes mass neg_prob; the remaining mass matches the
    adjusted moment sequence (m_k - neg_prob * neg_atom^k) / (1 - neg_prob)
    with a Gauss rule built from its Hankel system.
    """
    if neg_atom >= 0:
        raise DomainError("neg_atom must be negative")
    if not 0.0 < neg_prob < 1.0:
        raise DomainError("neg_prob must lie in (0,1)")
    if l < 1:
        raise DomainError("need l >= 1")
    m = (l + 1) // 2 if l % 2 == 1 else l // 2 + 1
    # adjusted moments up to 2m-1 >= l
    order = 2 * m - 1
    adjusted = np.array(
        [
            (gaussian_raw_moment(mu, k) - neg_prob * neg_atom**k) / (1.0 - neg_prob)
            for k in range(order + 1)
        ]
    )
    hankel = np.array([[adjusted[i + j] for j in range(m)] for i in range(m)])
    try:
        eigs = np.linalg.eigvalsh(hankel)
        if eigs.min() <= 0:
            raise SolverError(
                "adjusted moments are not a valid moment sequence; shrink neg_prob"
            )
        rhs = -adjusted[m : 2 * m]
        coeffs = np.linalg.solve(hankel, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            "adjusted moment system is singular; shrink neg_prob"
        ) from exc
    poly = np.concatenate([[1.0], coeffs[::-1]])  # monic orthogonal polynomial
    nodes = np.sort(np.roots(poly))
    if np.any(np.abs(nodes.imag) > 1e-9):
        raise SolverError("complex quadrature nodes; shrink neg_prob")
    nodes = nodes.real
    vander = np.vander(nodes, m, increasing=True).T
    weights = np.linalg.solve(vander, adjusted[:m])
    if weights.min() < -1e-12:
        raise SolverError("negative quadrature weight; shrink neg_prob")
    weights = np.clip(weights, 0.0, None)
    if np.any(np.abs(nodes - neg_atom) < 1e-12):
        raise SolverError("quadrature node collides with the planted negative atom")
    atoms = np.concatenate([[neg_atom], nodes])
    probs = np.concatenate([[neg_prob], (1.0 - neg_prob) * weights])
    order_idx = np.argsort(atoms)
    dist = DiscreteDistribution(atoms[order_idx], probs[order_idx] / probs.sum())
    _check_moments(dist, mu, l)
    return dist


def _check_moments(dist: DiscreteDistribution, mu: float, l: int):
    for k in range(1, l + 1):
        target = gaussian_raw_moment(mu, k)
        err = abs(dist.moment(k) - target)
        if err > MOMENT_RTOL * max(1.0, abs(target)):
            raise SolverError(
                f"moment {k} mismatch: {dist.moment(k)} vs {target} (err {err:.3g})"
            )


@dataclass(frozen=True)
class PTFInstance:
    n: int
    l: int
    basis: Frame              # n rows in R^n, scale 1/sqrt(n)
    coeffs: np.ndarray
    mu: float
    clip_c: float
    flavor: str               # "yes" | "no"
    neg_atom: float
    neg_prob: float
    stream: RngStream

    def __post_init__(self):
        if self.flavor not in ("yes", "no"):
            raise DomainError("flavor must be 'yes' or 'no'")
        if not self.clip_c > 0:
            raise DomainError("clip_c must be positive")
        if self.basis.ambient_dim != self.n or self.basis.k != self.n:
            raise DimensionMismatchError("basis must be a full frame in R^n")
        if abs(self.basis.scale - 1.0 / math.sqrt(self.n)) > 1e-12:
            raise DomainError("basis scale must be 1/sqrt(n)")
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.n,):
            raise DimensionMismatchError("coeffs must have length n")
        if self.flavor == "yes" and coeffs.min() < -1e-12:
            raise DomainError("yes-flavor coefficients must be nonnegative")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def clip_radius(self) -> float:
        return math.sqrt(self.n) + self.clip_c


def sample_ptf_instance(
    n: int,
    l: int,
    clip_c: float,
    flavor: str,
    rng: RngStream,
    neg_atom: float = DEFAULT_NEG_ATOM,
    neg_prob: float = DEFAULT_NEG_PROB,
) -> PTFInstance:
    mu, yes_law = match_moments_nonneg(l)
    basis = sample_haar_frame(n, n, rng.child(0), scale=1.0 / math.sqrt(n))
    if flavor == "yes":
        coeffs = yes_law.sample(n, rng.child(1))
    elif flavor == "no":
        no_law = match_moments_with_negative(mu, l, neg_atom, neg_prob)
        coeffs = no_law.sample(n, rng.child(1))
    else:
        raise DomainError("flavor must be 'yes' or 'no'")
    return PTFInstance(
        n=n,
        l=l,
        basis=basis,
        coeffs=coeffs,
        mu=mu,
        clip_c=clip_c,
        flavor=flavor,
        neg_atom=neg_atom,
        neg_prob=neg_prob,
        stream=rng,
    )


def eval_ptf_batch(inst: PTFInstance, points: np.ndarray) -> np.ndarray:
    """Labels 1{ sum_i c_i (a_i . x)^2 <= mu and |x| <= sqrt(n) + C }.

    Evaluated with the scaled basis vectors a_i (norm 1/sqrt(n)) against mu.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != inst.n:
        raise DimensionMismatchError(f"points must have dimension {inst.n}")
    proj = (points @ inst.basis.vectors.T) * inst.basis.scale
    quad = (proj**2) @ inst.coeffs
    norms_sq = np.einsum("ij,ij->i", points, points)
    return ((quad <= inst.mu) & (norms_sq <= inst.clip_radius**2)).astype(np.int8)


def eval_ptf_rescaled(inst: PTFInstance, points: np.ndarray) -> np.ndarray:
    """Identical set through the unscaled basis: sum c_i (u_i . x)^2 <= n mu."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    proj = points @ inst.basis.vectors.T
    quad = (proj**2) @ inst.coeffs
    norms_sq = np.einsum("ij,ij->i", points, points)
    scaled_mu = inst.mu / inst.basis.scale**2
    return ((quad <= scaled_mu) & (norms_sq <= inst.clip_radius**2)).astype(np.int8)


def eval_ptf(inst: PTFInstance, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,):
        raise DimensionMismatchError(f"expected one point of dimension {inst.n}")
    return int(eval_ptf_batch(inst, x[None, :])[0])


def estimate_no_distance(
    inst: PTFInstance,
    lines: int,
    points_per_line: int,
    rng: RngStream,
) -> ExperimentReport:
    """Frequency of collinear (1, 0, 1) label patterns on a no-instance.

    Witness lines run along random directions in the span of the
    negative-coefficient basis vectors, offset by Gaussian base points;
    through-origin lines in Haar-random directions carry no witnesses unless
    the whole coefficient vector is overwhelmingly negative, so their pattern
    frequency is recorded separately.  Sampled triples are sorted parameter
    values t1 < t2 < t3 on each line.
    """
    if inst.flavor != "no":
        raise DomainError("distance estimator expects a no-flavor instance")
    if lines < 1 or points_per_line < 3:
        raise DomainError("need lines >= 1 and points_per_line >= 3")
    report = ExperimentReport(
        "no-distance",
        {
            "n": inst.n,
            "l": inst.l,
            "lines": lines,
            "points_per_line": points_per_line,
            "negative_coords": int(np.count_nonzero(inst.coeffs < 0)),
            "mu": inst.mu,
            "clip_c": inst.clip_c,
            "neg_atom": inst.neg_atom,
            "neg_prob": inst.neg_prob,
        },
        rng.seed,
    )
    neg_idx = np.nonzero(inst.coeffs < 0)[0]
    gen = rng.generator()
    t_scale = 2.0 * inst.n ** 0.25 + 2.0

    def line_patterns(directions: np.ndarray, offsets: np.ndarray) -> tuple[int, int]:
        hits = 0
        for w, x0 in zip(directions, offsets):
            ts = np.sort(gen.standard_normal(points_per_line) * t_scale)
            pts = x0[None, :] + ts[:, None] * w[None, :]
            labels = eval_ptf_batch(inst, pts)
            ones = np.nonzero(labels == 1)[0]
            zeros = np.nonzero(labels == 0)[0]
            found = False
            for z in zeros:
                if ones.size and ones[0] < z and ones[-1] > z:
                    found = True
                    break
            hits += found
        return hits

    # Witness family: random directions within the negative-coefficient span.
    witness_hits = 0
    if neg_idx.size:
        span = inst.basis.vectors[neg_idx]  # unscaled rows
        coefs = gen.standard_normal((lines, neg_idx.size))
        dirs = coefs @ span
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        offsets = gen.standard_normal((lines, inst.n))
        offsets -= np.einsum("ij,ij->i", offsets, dirs)[:, None] * dirs
        witness_hits = line_patterns(dirs, offsets)
    freq = witness_hits / lines
    report.add_estimate(
        "witness_pattern_rate", freq, binom_se(witness_hits, lines), lines
    )

    # Reference family: Haar directions through the origin.
    haar = gen.standard_normal((lines, inst.n))
    haar /= np.linalg.norm(haar, axis=1, keepdims=True)
    origin_hits = line_patterns(haar, np.zeros((lines, inst.n)))
    report.add_estimate(
        "origin_line_pattern_rate", origin_hits / lines, binom_se(origin_hits, lines), lines
    )

    if neg_idx.size:
        lo, _ = wilson_interval(witness_hits, lines)
        report.assert_geq(
            "non-convexity witness frequency positive at 99% confidence",
            lo,
            np.nextafter(0.0, 1.0),
            source="derived",
        )
    return report


def response_tv_experiment(
    queries: np.ndarray,
    n: int,
    l: int,
    trials: int,
    rng: RngStream,
    neg_atom: float = DEFAULT_NEG_ATOM,
    neg_prob: float = DEFAULT_NEG_PROB,
) -> ExperimentReport:
    """Coupled response-vector comparison between the two coefficient laws.

    Each trial shares one random basis; coefficients are drawn independently
    from the nonnegative and the negative-atom law.  Reports the empirical
    total variation between the response distributions, the frequency of the
    large-projection basis event, and the TV restricted to trials avoiding it.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    q = queries.shape[0]
    if q > 20:
        raise DomainError("response-vector state space limited to 20 queries")
    if queries.shape[1] != n:
        raise DimensionMismatchError("queries must have dimension n")
    mu, yes_law = match_moments_nonneg(l)
    no_law = match_moments_with_negative(mu, l, neg_atom, neg_prob)
    clip_sq = 10.0 * math.log(n) / n
    report = ExperimentReport(
        "response-tv",
        {"n": n, "q": q, "l": l, "trials": trials, "mu": mu,
         "neg_atom": neg_atom, "neg_prob": neg_prob},
        rng.seed,
    )
    weights = 1 << np.arange(q)
    yes_counts: dict[int, int] = {}
    no_counts: dict[int, int] = {}
    yes_ok: dict[int, int] = {}
    no_ok: dict[int, int] = {}
    bad_hits = 0
    for t in range(trials):
        basis = sample_haar_frame(n, n, rng.child(3 * t), scale=1.0 / math.sqrt(n))
        proj_sq = ((queries @ basis.vectors.T) * basis.scale) ** 2  # (q, n)
        bad = bool((proj_sq >= clip_sq).any())
        bad_hits += bad
        u = yes_law.sample(n, rng.child(3 * t + 1))
        v = no_law.sample(n, rng.child(3 * t + 2))
        yes_vec = (proj_sq @ u <= mu).astype(np.int64)
        no_vec = (proj_sq @ v <= mu).astype(np.int64)
        key_yes = int((yes_vec * weights).sum())
        key_no = int((no_vec * weights).sum())
        yes_counts[key_yes] = yes_counts.get(key_yes, 0) + 1
        no_counts[key_no] = no_counts.get(key_no, 0) + 1
        if not bad:
            yes_ok[key_yes] = yes_ok.get(key_yes, 0) + 1
            no_ok[key_no] = no_ok.get(key_no, 0) + 1
    keys = set(yes_counts) | set(no_counts)
    tv = 0.5 * sum(abs(yes_counts.get(k, 0) - no_counts.get(k, 0)) for k in keys) / trials
    kept = trials - bad_hits
    keys_ok = set(yes_ok) | set(no_ok)
    tv_ok = (
        0.5 * sum(abs(yes_ok.get(k, 0) - no_ok.get(k, 0)) for k in keys_ok) / kept
        if kept
        else 0.0
    )
    bad_freq = bad_hits / trials
    bad_bound = q * n * n ** (-4.5)
    report.add_estimate("tv", tv, 0.0, trials)
    report.add_estimate("tv_nonbad", tv_ok, 0.0, kept)
    report.add_estimate("bad_basis_rate", bad_freq, binom_se(bad_hits, trials), trials)
    report.add_estimate("bad_basis_bound", bad_bound)
    report.assert_leq(
        "bad-basis frequency <= q n / n^{9/2} + 3se",
        bad_freq,
        bad_bound + 3.0 * binom_se(bad_hits, trials),
        source="analytic",
    )
    return report
