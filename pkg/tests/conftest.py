import numpy as np
import pytest

from coverlock.core import ProblemInstance, min_coverage_cost

WORKED_V = (20, 18, 14, 13, 8, 7)
WORKED_W = (10, 9, 4, 4, 2, 2)


def worked_instance():
    return ProblemInstance(WORKED_V, WORKED_W, 12, 2)


@pytest.fixture
def worked():
    return worked_instance()


def grid_instance(rng, n, allow_negative=True):
    """Feasible instance with small-integer values and costs (grid valued)."""
    lo = -8 if allow_negative else 1
    v = rng.integers(lo, 25, size=n).astype(float)
    w = rng.integers(1, 12, size=n).astype(float)
    K = int(rng.integers(0, n + 1))
    base = ProblemInstance(v, w, 1.0, K)
    lo_w = max(min_coverage_cost(base), 1.0)
    W = float(rng.integers(int(lo_w), int(w.sum()) + 2))
    return ProblemInstance(v, w, W, K)


def grid_instances(seed, count, n_lo=4, n_hi=15):
    rng = np.random.default_rng(seed)
    return [grid_instance(rng, int(rng.integers(n_lo, n_hi + 1))) for _ in range(count)]


def coverage_binding_instance(rng, n):
    """Continuous instance whose coverage floor forces negative-margin units in."""
    x = rng.standard_normal(n)
    v = x + 0.5 * x ** 2 - 0.5
    w = 1.0 + np.abs(x) + rng.uniform(0, 0.5, n)
    K = int(np.ceil(0.6 * n))
    W = max(1.3 * n, 1.05 * float(np.sort(w)[:K].sum()))
    return ProblemInstance(v, w, W, K)
