import numpy as np
import pytest

from acu.errors import InvalidInput
from acu.generators import InstanceSpec, doubled_voiculescu, intertwined_families, make_instance
from conftest import opnorm


@pytest.mark.parametrize("kind,size", [("voiculescu", 8), ("doubled", 6), ("perturbed_commuting", 5)])
def test_deterministic(kind, size):
    spec = InstanceSpec(kind, size, seed=7)
    u1, v1, m1 = make_instance(spec)
    u2, v2, m2 = make_instance(spec)
    assert np.array_equal(u1, u2) and np.array_equal(v1, v2)
    assert m1 == m2
    for x in (u1, v1):
        assert opnorm(x.conj().T @ x - np.eye(x.shape[0])) < 1e-12


def test_examples():
    u, v, meta = make_instance(InstanceSpec("voiculescu", 8))
    assert meta["n"] == 8 and meta["expected"] == {"isospec": -1, "winding": -1}
    assert meta["delta"] == pytest.approx(abs(1 - np.exp(2j * np.pi / 8)))
    u, v, meta = make_instance(InstanceSpec("doubled", 8))
    assert meta["n"] == 16 and meta["expected"]["isospec"] == 0
    assert np.array_equal((u, v)[0], doubled_voiculescu(8)[0])
    _, _, meta = make_instance(InstanceSpec("perturbed_commuting", 6, scale=1e-4))
    assert meta["delta"] < 1e-2
    assert "scale=0.0001" in meta["label"]


def test_custom_and_errors():
    u, v, meta = make_instance(InstanceSpec("custom", 0), (np.eye(2), np.eye(2)))
    assert meta["delta"] == 0.0
    with pytest.raises(InvalidInput):
        make_instance(InstanceSpec("custom", 0))
    with pytest.raises(InvalidInput):
        make_instance(InstanceSpec("spiral", 4))
    with pytest.raises(InvalidInput):
        make_instance(InstanceSpec("voiculescu", 1))


def test_intertwined_families_partition():
    P, Q = intertwined_families(2, 3, 1e-3, seed=4)
    n = P[0].shape[0]
    assert n == 12 and len(P) == len(Q) == 3
    assert opnorm(sum(P) - np.eye(n)) < 1e-12 and opnorm(sum(Q) - np.eye(n)) < 1e-12
    for p in P + Q:
        assert opnorm(p @ p - p) < 1e-12
