import numpy as np
import pytest
from hypothesis import strategies as st

from swarmtraj.trajectory import QuinticTrajectory, polyval_batch


def gauss_legendre(f, a, b, nodes=64):
    """Reference quadrature of a vector-valued-in-time integrand ``f(t)`` on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (b - a) * (x + 1.0) + a
    return 0.5 * (b - a) * float(np.sum(w * f(t)))


def squared_norm_integrand(traj, order):
    return lambda t: np.sum(polyval_batch(traj.coeffs, t, order) ** 2, axis=-1)


def random_quintic(rng, dim=3, scale=1.0, t_range=(0.1, 10.0)):
    T = float(rng.uniform(*t_range))
    # keep the polynomial O(scale) over [0, T]
    coeffs = rng.normal(size=(dim, 6)) * scale / np.maximum(T, 1.0) ** np.arange(6)
    return QuinticTrajectory(coeffs, T)


# subnormals are excluded: halving 5e-324 (the a0/2 coefficient) rounds to zero
finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False, allow_subnormal=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criterion -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
