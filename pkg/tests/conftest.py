import math

import numpy as np
import pytest

from convexlab.rng import RngStream
from convexlab.tolerant import CalibrationRecord


@pytest.fixture(scope="session")
def calibration_small():
    """Calibration record at test scale (n=64, N=256), measured once."""
    from convexlab import nazarov, tolerant

    n, num = 64, 256
    c1 = tolerant.C1_DEFAULT
    r = nazarov.solve_r(n, num, c1)
    report = nazarov.estimate_unique_volume(
        n, num, r, bodies=100, points_per_body=1000, rng=RngStream(2024, 77),
        c1=c1, check_concentration=False,
    )
    v_mean = report.value("vol_unique_mean")
    return CalibrationRecord(
        n=n, N=num, c1=c1, v_u_mean=v_mean, v_u_ci=0.0, produced_by_seed=2024
    )


# -- independent scalar oracles (series-based, no reuse of package paths) -----


def series_normal_cdf(x: float) -> float:
    """High-precision cdf oracle: Taylor series for erf, valid for |x| <= 8."""
    z = x / math.sqrt(2.0)
    total = 0.0
    term = z
    n = 0
    while abs(term) > 1e-22 and n < 500:
        total += term / (2 * n + 1)
        n += 1
        term *= -z * z / n
    erf = 2.0 / math.sqrt(math.pi) * total
    return 0.5 * (1.0 + erf)


def bisect_quantile(p: float, cdf=series_normal_cdf) -> float:
    lo, hi = -12.0, 12.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def separated_by_direction_scan(y, points, directions: int = 10_000) -> bool:
    """Brute-force 2-D separating-hyperplane search over a dense angle grid."""
    y = np.asarray(y, dtype=float)
    points = np.asarray(points, dtype=float)
    assert y.shape == (2,)
    angles = np.linspace(0.0, 2.0 * math.pi, directions, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    margins = dirs @ y - (points @ dirs.T).max(axis=0)
    return bool((margins > 1e-7).any())
