"""Experiment reports: named estimates, bound assertions, stable serialization.

Report bodies are canonical: keys sorted, floats printed with 12 significant
digits, wall time excluded.  Re-running an experiment with the same seed must
produce byte-identical bodies regardless of worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

# Provenance labels for assertion bounds.  "closed-form" means the bound is an
# exact formula evaluated in-process; "analytic" means a stated inequality
# checked empirically; "derived" means a threshold computed from an
# independent oracle or fixed at desk scale.
SOURCES = ("closed-form", "analytic", "derived")


def fmt12(value: float) -> str:
    """Decimal with 12 significant digits, canonical across report formats."""
    if isinstance(value, bool):
        return str(value).lower()
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return f"{float(value):.12g}"


@dataclass
class Estimate:
    metric: str
    value: float
    ci_halfwidth: float
    sample_count: int


@dataclass
class BoundAssertion:
    description: str
    bound: float
    observed: float
    passed: bool
    source: str = "derived"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown bound source {self.source!r}")


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    seed: int
    estimates: list[Estimate] = field(default_factory=list)
    assertions: list[BoundAssertion] = field(default_factory=list)
    wall_time: float = 0.0

    def add_estimate(self, metric, value, ci_halfwidth=0.0, sample_count=0):
        self.estimates.append(Estimate(metric, float(value), float(ci_halfwidth), int(sample_count)))

    def add_assertion(self, description, bound, observed, passed, source="derived"):
        self.assertions.append(
            BoundAssertion(description, float(bound), float(observed), bool(passed), source)
        )

    def assert_leq(self, description, observed, bound, source="derived"):
        self.add_assertion(description, bound, observed, observed <= bound, source)

    def assert_geq(self, description, observed, bound, source="derived"):
        self.add_assertion(description, bound, observed, observed >= bound, source)

    def value(self, metric: str) -> float:
        for e in self.estimates:
            if e.metric == metric:
                return e.value
        raise KeyError(metric)

    def all_passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def failures(self) -> list[BoundAssertion]:
        return [a for a in self.assertions if not a.passed]

    def merge(self, other: "ExperimentReport", prefix: str = ""):
        pre = f"{prefix}: " if prefix else ""
        for e in other.estimates:
            self.estimates.append(Estimate(pre + e.metric, e.value, e.ci_halfwidth, e.sample_count))
        for a in other.assertions:
            self.assertions.append(
                BoundAssertion(pre + a.description, a.bound, a.observed, a.passed, a.source)
            )

    # -- serialization ------------------------------------------------------

    def body_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": {k: _canon(v) for k, v in sorted(self.parameters.items())},
            "seed": self.seed,
            "estimates": [
                {
                    "metric": e.metric,
                    "value": fmt12(e.value),
                    "ci_halfwidth": fmt12(e.ci_halfwidth),
                    "sample_count": e.sample_count,
                }
                for e in self.estimates
            ],
            "assertions": [
                {
                    "description": a.description,
                    "bound": fmt12(a.bound),
                    "observed": fmt12(a.observed),
                    "passed": a.passed,
                    "source": a.source,
                }
                for a in self.assertions
            ],
        }

    def body_bytes(self) -> bytes:
        return json.dumps(self.body_dict(), sort_keys=True, separators=(",", ":")).encode()

    def to_json(self) -> str:
        payload = self.body_dict()
        payload["wall_time"] = self.wall_time
        return json.dumps(payload, indent=2, sort_keys=True)

    CSV_HEADER = (
        "experiment,row_type,name,value,ci_halfwidth,sample_count,bound,observed,passed,source,seed"
    )

    def csv_lines(self) -> list[str]:
        lines = [self.CSV_HEADER]
        for e in self.estimates:
            lines.append(
                f"{self.name},estimate,{_csv(e.metric)},{fmt12(e.value)},{fmt12(e.ci_halfwidth)},"
                f"{e.sample_count},,,,,{self.seed}"
            )
        for a in self.assertions:
            lines.append(
                f"{self.name},assertion,{_csv(a.description)},,,,{fmt12(a.bound)},{fmt12(a.observed)},"
                f"{str(a.passed).lower()},{a.source},{self.seed}"
            )
        return lines

    def to_csv(self) -> str:
        return "\n".join(self.csv_lines()) + "\n"


def _canon(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return fmt12(value)
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    return value


def _csv(text: str) -> str:
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


# -- small statistics helpers used by every estimator ------------------------


def binom_se(successes: int, trials: int) -> float:
    """Plain binomial standard error of the empirical frequency."""
    if trials <= 0:
        return 0.0
    p = successes / trials
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def wilson_interval(successes: int, trials: int, z: float = 2.5758293035489004):
    """Wilson score interval; default z is the two-sided 99% quantile."""
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def mean_se(values) -> tuple[float, float]:
    import numpy as np

    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return 0.0, 0.0
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))
