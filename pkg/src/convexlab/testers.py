"""One-sided testers: transcripts, hull certificates, and baseline strategies.

A one-sided run rejects exactly when some 0-labeled query lies in the convex
hull of the 1-labeled queries; the certificate (hull coefficients) is always
returned and re-verified independently of the LP solver.  The hull check runs
after every query; by monotonicity of the reject rule this gives the same
verdict as checking only at the leaf, with earlier certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

from .errors import BudgetExceededError, DimensionMismatchError, DomainError, SolverError
from .report import ExperimentReport, binom_se, wilson_interval
from .rng import RngStream

HULL_TOL = 1e-8

Oracle = Callable[[np.ndarray], int]
# A strategy maps the query history [(point, label), ...] to the next query
# point, or None to stop early.
Strategy = Callable[[list], Optional[np.ndarray]]


@dataclass
class QueryTranscript:
    dim: int
    entries: list = field(default_factory=list)
    running_verdicts: list = field(default_factory=list)

    def append(self, point: np.ndarray, label: int, verdict: str = "accept"):
        point = np.asarray(point, dtype=np.float64)
        if point.shape != (self.dim,):
            raise DimensionMismatchError(f"query must have dimension {self.dim}")
        self.entries.append((point, int(label)))
        self.running_verdicts.append(verdict)

    def points(self, label: int) -> np.ndarray:
        hits = [p for p, b in self.entries if b == label]
        if not hits:
            return np.empty((0, self.dim))
        return np.vstack(hits)

    def all_points(self) -> np.ndarray:
        if not self.entries:
            return np.empty((0, self.dim))
        return np.vstack([p for p, _ in self.entries])

    def to_json_lines(self) -> str:
        """One query per line: point array, label, verdict after that query."""
        import json

        lines = []
        for (point, label), verdict in zip(self.entries, self.running_verdicts):
            lines.append(
                json.dumps(
                    {"point": [repr(float(v)) for v in point], "label": label, "verdict": verdict},
                    separators=(",", ":"),
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def __len__(self):
        return len(self.entries)


@dataclass
class Certificate:
    point: np.ndarray          # 0-labeled point inside the hull
    support: np.ndarray        # 1-labeled points spanning the hull
    coefficients: np.ndarray   # convex combination weights


@dataclass
class TesterVerdict:
    outcome: str               # "accept" or "reject"
    certificate: Certificate | None = None


def in_convex_hull(y: np.ndarray, points: np.ndarray, tol: float = HULL_TOL):
    """Convex-combination coefficients placing y within tol (sup norm) of
    the hull of `points`, or None if the feasibility LP is infeasible.
    """
    y = np.asarray(y, dtype=np.float64)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] < 1:
        raise DomainError("need at least one hull point")
    if points.shape[1] != y.shape[0]:
        raise DimensionMismatchError("hull points and target have different dimensions")
    if not tol > 0:
        raise DomainError("tol must be positive")
    m = points.shape[0]
    # lambda >= 0, sum lambda = 1, |points^T lambda - y|_inf <= tol.  The LP
    # runs at 0.9 tol with a tightened solver tolerance so the returned
    # certificate verifies strictly at tol.
    inner = 0.9 * tol
    a_ub = np.vstack([points.T, -points.T])
    b_ub = np.concatenate([y + inner, inner - y])
    res = linprog(
        c=np.zeros(m),
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=np.ones((1, m)),
        b_eq=np.array([1.0]),
        bounds=(0.0, None),
        method="highs",
        options={"primal_feasibility_tolerance": max(1e-10, min(1e-7, tol * 1e-2))},
    )
    if res.status == 2:  # infeasible
        return None
    if res.status != 0:
        raise SolverError(f"hull LP did not converge (status {res.status}): {res.message}")
    lam = np.asarray(res.x, dtype=np.float64)
    if not certificate_valid(y, points, lam, tol):
        raise SolverError("LP reported feasible but the certificate fails re-verification")
    return lam


def certificate_valid(y, points, lam, tol: float = HULL_TOL) -> bool:
    """Independent check: lam >= -tol, sums to 1, reconstructs y within tol."""
    lam = np.asarray(lam, dtype=np.float64)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if lam.shape[0] != points.shape[0]:
        return False
    if lam.min(initial=0.0) < -tol:
        return False
    if abs(lam.sum() - 1.0) > tol:
        return False
    residual = np.abs(points.T @ lam - np.asarray(y, dtype=np.float64)).max()
    return residual <= tol * (1.0 + 1e-9)


def _certified_outside(y, points, tol) -> bool:
    """Cheap sound separation tests to skip the LP when y is clearly outside.

    A direction u separates when <u,y> exceeds max_i <u,p_i> by more than
    tol * |u|_1, since any tol-approximate hull point moves <u, .> by at most
    that much.  Never claims separation incorrectly.
    """
    lo = points.min(axis=0) - tol
    hi = points.max(axis=0) + tol
    if np.any(y < lo) or np.any(y > hi):
        return True
    center = points.mean(axis=0)
    u = y - center
    norm1 = np.abs(u).sum()
    if norm1 > 0:
        margin = float(u @ y - (points @ u).max())
        if margin > tol * norm1:
            return True
    return False


def run_one_sided(
    tester: Strategy, oracle: Oracle, q: int, d: int
) -> tuple[TesterVerdict, QueryTranscript]:
    """Execute one root-to-leaf path of a one-sided tester.

    The reject rule is checked after every answered query and short-circuits
    on the first certificate found.
    """
    transcript = QueryTranscript(dim=d)
    if hasattr(tester, "bind"):
        tester.bind(d)
    zeros: list[np.ndarray] = []
    ones: list[np.ndarray] = []
    history: list = []
    for step in range(q + 1):
        point = tester(history)
        if point is None:
            break
        if step >= q:
            raise BudgetExceededError(f"tester requested more than {q} queries")
        point = np.asarray(point, dtype=np.float64)
        if point.shape != (d,):
            raise DimensionMismatchError(f"tester produced a point of shape {point.shape}")
        label = int(oracle(point))
        transcript.append(point, label)
        history.append((point, label))
        if label == 0:
            zeros.append(point)
            fresh = [point]
        else:
            ones.append(point)
            fresh = zeros
        if not ones or not zeros:
            continue
        support = np.vstack(ones)
        for y in fresh:
            if _certified_outside(y, support, HULL_TOL):
                continue
            lam = in_convex_hull(y, support, HULL_TOL)
            if lam is not None:
                cert = Certificate(point=y, support=support, coefficients=lam)
                transcript.running_verdicts[-1] = "reject"
                return TesterVerdict("reject", cert), transcript
    return TesterVerdict("accept"), transcript


# -- baseline strategies ------------------------------------------------------


class _GaussianStrategy:
    """Base for built-in strategies that draw their own Gaussian queries.

    Strategies are single-run objects.  The ambient dimension is bound by
    run_one_sided before the first query; externally authored plain callables
    never need binding because they bring their own points.
    """

    def __init__(self, rng: RngStream):
        self._gen = rng.generator()
        self._dim: int | None = None

    def bind(self, d: int):
        if self._dim is None:
            self._dim = d
        elif self._dim != d:
            raise DimensionMismatchError("strategy already bound to a different dimension")

    def _draw(self) -> np.ndarray:
        if self._dim is None:
            raise DomainError("strategy not bound to a dimension; run it via run_one_sided")
        return self._gen.standard_normal(self._dim)


class LineSegmentStrategy(_GaussianStrategy):
    """Queries Gaussian pairs and their midpoints, three queries per pair."""

    def __init__(self, pairs: int, rng: RngStream):
        if pairs < 1:
            raise DomainError("need pairs >= 1")
        super().__init__(rng)
        self.pairs = pairs
        self._done = 0
        self._phase = 0
        self._x = self._y = None

    def __call__(self, history):
        if self._done >= self.pairs:
            return None
        if self._phase == 0:
            self._x = self._draw()
            self._phase = 1
            return self._x
        if self._phase == 1:
            self._y = self._draw()
            self._phase = 2
            return self._y
        self._phase = 0
        self._done += 1
        return 0.5 * (self._x + self._y)


class HullSamplingStrategy(_GaussianStrategy):
    """Queries iid Gaussian points; rejection is left to the runner's rule."""

    def __init__(self, samples: int, rng: RngStream):
        if samples < 1:
            raise DomainError("need samples >= 1")
        super().__init__(rng)
        self.samples = samples
        self._done = 0

    def __call__(self, history):
        if self._done >= self.samples:
            return None
        self._done += 1
        return self._draw()


def line_segment_tester(pairs: int, rng: RngStream) -> Strategy:
    return LineSegmentStrategy(pairs, rng)


def hull_sampling_tester(samples: int, rng: RngStream) -> Strategy:
    return HullSamplingStrategy(samples, rng)


def baseline_strategy(kind: str, budget: int, rng: RngStream) -> Strategy:
    if kind == "line-segment":
        if budget < 3:
            raise DomainError("line-segment strategy needs a budget of at least 3")
        return line_segment_tester(budget // 3, rng)
    if kind == "hull-sampling":
        return hull_sampling_tester(budget, rng)
    raise DomainError(f"unknown strategy kind {kind!r}")


STRATEGY_KINDS = ("line-segment", "hull-sampling")


def rejection_rate(
    strategy_kind: str,
    instance_family: str,
    n: int,
    budget: int,
    trials: int,
    rng: RngStream,
    calibration=None,
) -> ExperimentReport:
    """Rejection frequency of a baseline strategy against an instance family."""
    from . import adaptive, ptf, tolerant

    report = ExperimentReport(
        "rejection-rate",
        {
            "strategy": strategy_kind,
            "family": instance_family,
            "n": n,
            "budget": budget,
            "trials": trials,
        },
        rng.seed,
    )
    rejects = 0
    for t in range(trials):
        inst_rng = rng.child(2 * t)
        strat_rng = rng.child(2 * t + 1)
        if instance_family == "adaptive":
            inst = adaptive.sample_adaptive_instance(n, None, inst_rng)
            oracle, d = (lambda x, i=inst: adaptive.eval_adaptive(i, x)), 2 * n
        elif instance_family in ("tolerant-yes", "tolerant-no"):
            inst = tolerant.sample_tolerant_instance(n, None, inst_rng, calibration)
            fn = tolerant.eval_yes if instance_family.endswith("yes") else tolerant.eval_no
            oracle, d = (lambda x, i=inst, f=fn: f(i, x)), n + 1
        elif instance_family in ("ptf-yes", "ptf-no"):
            flavor = instance_family.split("-")[1]
            inst = ptf.sample_ptf_instance(n, 3, ptf.DEFAULT_CLIP, flavor, inst_rng)
            oracle, d = (lambda x, i=inst: ptf.eval_ptf(i, x)), n
        else:
            raise DomainError(f"unknown instance family {instance_family!r}")
        strategy = baseline_strategy(strategy_kind, budget, strat_rng)
        verdict, _ = run_one_sided(strategy, oracle, budget, d)
        rejects += verdict.outcome == "reject"
    freq = rejects / trials
    lo, hi = wilson_interval(rejects, trials)
    report.add_estimate("rejection_rate", freq, binom_se(rejects, trials), trials)
    report.add_estimate("wilson_lower_99", lo)
    report.add_estimate("wilson_upper_99", hi)
    return report
