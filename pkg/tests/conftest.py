import numpy as np
import pytest

from spd import tensor as T


@pytest.fixture(autouse=True)
def fresh_tape():
    """Every test starts and ends with an empty differentiation tape."""
    T.reset_tape()
    yield
    T.reset_tape()


def central_diff(f, x, h=1e-5):
    """Finite-difference gradient of scalar-valued f at x, one coordinate
    at a time.  Independent of the tape machinery on purpose."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def assert_grad_close(analytic, numeric, rtol=1e-5):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = 1.0 + np.abs(numeric)
    worst = np.max(np.abs(analytic - numeric) / denom)
    assert worst < rtol, f"gradient mismatch: worst relative error {worst:.3e}"
