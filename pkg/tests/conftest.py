import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "acu",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("acu")


def haar(rng, n):
    """Haar-distributed unitary (QR of a complex Ginibre matrix with phase fix)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def gue(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


def expi(h, t=1.0):
    """exp(i t h) via scipy, independent of the package's spectral helper."""
    import scipy.linalg as sla

    return sla.expm(1j * t * h)


def opnorm(a):
    return float(np.linalg.norm(a, 2)) if np.size(a) else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
