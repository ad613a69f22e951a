import numpy as np
import pytest
from hypothesis import settings

from maesplit.pwl_core import PiecewiseLinearFn, build_abs_sum

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def brute_abs_sum(points, x):
    """Direct ``sum |y - x|``; independent of the breakpoint machinery."""
    y = np.asarray(points, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.abs(y[None, :] - x[:, None]).sum(axis=1)


def random_unimodal(rng, span=8, max_bp=6, convex=False):
    """Random unimodal function on integer breakpoints, plateaus included."""
    m = int(rng.integers(1, max_bp + 1))
    bp = np.sort(rng.choice(np.arange(-span, span + 1), size=m, replace=False)).astype(float)
    if convex:
        slopes = np.sort(rng.integers(-4, 5, m + 1)).astype(float)
        slopes[0] = min(slopes[0], 0.0)
        slopes[-1] = max(slopes[-1], 0.0)
    else:
        turn = int(rng.integers(0, m + 1))
        slopes = np.array([-float(rng.integers(0, 4)) if j < turn else float(rng.integers(0, 4))
                           for j in range(m + 1)])
        slopes[0] = min(slopes[0], 0.0)
    vals = [float(rng.integers(0, 10))]
    for j in range(1, m):
        vals.append(vals[-1] + slopes[j] * (bp[j] - bp[j - 1]))
    return PiecewiseLinearFn(bp, vals, slopes[0], slopes[-1])


def random_abs_sum(rng, max_points=6, span=8):
    pts = rng.integers(-span, span + 1, int(rng.integers(1, max_points + 1))).astype(float)
    return build_abs_sum(pts), pts


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
