"""Gaussian scalar functions, Haar frames, and tail-bound verifiers.

The cdf goes through erfc in double precision (max error well under the
1e-13 budget).  The quantile and inverse survival function use bisection on
the monotone cdf/sf followed by one Newton refinement step: slower than a
rational approximation but deterministic to the last bit on every platform,
which the reproducibility contract values more than speed.  The inverse
survival function works directly with upper-tail masses, so thresholds like
"upper tail = c1/N" stay resolvable far beyond where 1 - c1/N rounds to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DimensionMismatchError, DomainError
from .report import ExperimentReport, binom_se
from .rng import RngStream

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def std_normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x: float) -> float:
    """P[g <= x] for g ~ N(0,1)."""
    if not math.isfinite(x):
        raise DomainError(f"cdf argument must be finite, got {x}")
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_sf(x: float) -> float:
    """Upper tail P[g > x]; accurate down to the underflow threshold."""
    if not math.isfinite(x):
        raise DomainError(f"sf argument must be finite, got {x}")
    return 0.5 * math.erfc(x / _SQRT2)


def cdf_array(x: np.ndarray) -> np.ndarray:
    return 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / _SQRT2)


def sf_array(x: np.ndarray) -> np.ndarray:
    return 0.5 * special.erfc(np.asarray(x, dtype=np.float64) / _SQRT2)


def std_normal_isf(q: float) -> float:
    """x with sf(x) = q, for q in (0, 1)."""
    if not (0.0 < q < 1.0):
        raise DomainError(f"isf argument must lie in (0,1), got {q}")
    if q == 0.5:
        return 0.0
    if q > 0.5:
        return -std_normal_isf(1.0 - q)
    lo, hi = 0.0, 45.0  # sf(45) underflows; comparisons still order correctly
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if std_normal_sf(mid) > q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, lo):
            break
    x = 0.5 * (lo + hi)
    pdf = std_normal_pdf(x)
    if pdf > 1e-290:
        x += (std_normal_sf(x) - q) / pdf
    return x


def std_normal_quantile(p: float) -> float:
    """Inverse cdf on (0, 1)."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"quantile argument must lie in (0,1), got {p}")
    if p <= 0.5:
        return -std_normal_isf(p)
    return std_normal_isf(1.0 - p)


# -- frames -------------------------------------------------------------------

FRAME_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class Frame:
    """k orthonormal vectors in R^d with a uniform scale factor.

    `vectors` holds the unscaled rows; `scale` applies uniformly to all of
    them.  Projection coordinates are taken against the unscaled rows.
    """

    ambient_dim: int
    vectors: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape[1] != self.ambient_dim:
            raise DimensionMismatchError(
                f"expected (k, {self.ambient_dim}) vectors, got {vecs.shape}"
            )
        if vecs.shape[0] > self.ambient_dim:
            raise DomainError(f"k={vecs.shape[0]} exceeds ambient dimension {self.ambient_dim}")
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        gram = vecs @ vecs.T
        if np.abs(gram - np.eye(vecs.shape[0])).max() > FRAME_ORTHO_TOL:
            raise DomainError("frame vectors are not orthonormal within 1e-10")
        vecs.flags.writeable = False
        object.__setattr__(self, "vectors", vecs)

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    def coords(self, x: np.ndarray) -> np.ndarray:
        """Unscaled coordinates of x (or a batch of rows) in this frame."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.ambient_dim:
            raise DimensionMismatchError(
                f"point dimension {x.shape[-1]} != ambient {self.ambient_dim}"
            )
        return x @ self.vectors.T

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Map unscaled frame coordinates back into the ambient space."""
        return np.asarray(coords, dtype=np.float64) @ self.vectors


def sample_haar_frame(d: int, k: int, rng: RngStream, scale: float = 1.0) -> Frame:
    """Rotation-invariant frame: orthonormalized iid Gaussian vectors.

    Householder QR with a sign fix on diag(R); equivalent in distribution to
    Gram-Schmidt on the same Gaussian draws and stable at desk dimensions.
    """
    if not 1 <= k <= d:
        raise DomainError(f"need 1 <= k <= d, got k={k}, d={d}")
    gauss = rng.generator().standard_normal((d, k))
    q, r = np.linalg.qr(gauss, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return Frame(ambient_dim=d, vectors=(q * signs).T, scale=scale)


# -- empirical verification of the tail bounds -------------------------------

CAP_EPS_GRID = (0.1, 0.2, 0.3, 0.5)
CHI2_T_GRID = (0.5, 1.0, 2.0, 4.0, 25.0)
CHI2_REL_T_GRID = (0.0, 0.2, 0.3, 0.45)


def verify_tail_bounds(n: int, trials: int, rng: RngStream) -> ExperimentReport:
    """Check spherical-cap and chi-square tail inequalities by Monte Carlo.

    Each empirical tail frequency must stay below its analytic bound plus
    three binomial standard errors.
    """
    if n < 2:
        raise DomainError("need n >= 2")
    if trials < 10_000:
        raise DomainError("need trials >= 1e4")
    report = ExperimentReport("verify-tail-bounds", {"n": n, "trials": trials}, rng.seed)

    gen = rng.child(0).generator()
    first_coord = np.empty(trials)
    norms_sq = np.empty(trials)
    chunk = max(1, min(trials, 4_000_000 // n))
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        g = gen.standard_normal((m, n))
        sq = np.einsum("ij,ij->i", g, g)
        norms_sq[done : done + m] = sq
        first_coord[done : done + m] = g[:, 0] / np.sqrt(sq)
        done += m

    for eps in CAP_EPS_GRID:
        hits = int(np.count_nonzero(first_coord >= eps))
        bound = math.exp(-n * eps * eps / 2.0)
        freq = hits / trials
        report.add_estimate(f"cap_tail[eps={eps}]", freq, binom_se(hits, trials), trials)
        report.assert_leq(
            f"spherical cap: Pr[u1 >= {eps}] <= exp(-n eps^2/2) + 3se",
            freq,
            bound + 3 * binom_se(hits, trials),
            source="analytic",
        )

    for t in CHI2_T_GRID:
        upper = n + 2.0 * math.sqrt(n * t) + 2.0 * t
        lower = n - 2.0 * math.sqrt(n * t)
        bound = math.exp(-t)
        up_hits = int(np.count_nonzero(norms_sq >= upper))
        lo_hits = int(np.count_nonzero(norms_sq <= lower))
        up_freq, lo_freq = up_hits / trials, lo_hits / trials
        report.add_estimate(f"chi2_upper_tail[t={t}]", up_freq, binom_se(up_hits, trials), trials)
        report.add_estimate(f"chi2_lower_tail[t={t}]", lo_freq, binom_se(lo_hits, trials), trials)
        report.assert_leq(
            f"chi-square upper tail at t={t} <= exp(-t) + 3se",
            up_freq,
            bound + 3 * binom_se(up_hits, trials),
            source="analytic",
        )
        report.assert_leq(
            f"chi-square lower tail at t={t} <= exp(-t) + 3se",
            lo_freq,
            bound + 3 * binom_se(lo_hits, trials),
            source="analytic",
        )

    for t in CHI2_REL_T_GRID:
        hits = int(np.count_nonzero(np.abs(norms_sq - n) >= t * n))
        bound = math.exp(-(3.0 / 16.0) * n * t * t)
        freq = hits / trials
        report.add_estimate(f"chi2_rel_tail[t={t}]", freq, binom_se(hits, trials), trials)
        report.assert_leq(
            f"chi-square relative tail at t={t} <= exp(-(3/16) n t^2) + 3se",
            freq,
            bound + 3 * binom_se(hits, trials),
            source="analytic",
        )

    mean = float(norms_sq.mean())
    se = float(norms_sq.std(ddof=1) / math.sqrt(trials))
    report.add_estimate("chi2_mean", mean, se, trials)
    report.assert_leq(
        "squared-norm mean within 3se of n", abs(mean - n), 3 * se, source="closed-form"
    )
    return report
