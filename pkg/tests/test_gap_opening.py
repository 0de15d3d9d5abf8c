import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acu.errors import InvalidEpsilon, InvalidInput, PathNotAdmissible, StagePreconditionFailed
from acu.gap_opening import CERTIFIED, amplify, approximate, open_gap, rotate_double
from acu.generators import InstanceSpec, make_instance
from acu.io import load_schema
from conftest import expi, gue, haar, opnorm


def rotate_double_oracle(u, eps):
    """Closed form of the four blocks, multiplied out by hand."""
    n = u.shape[0]
    c, s = math.cos(math.pi / 2 - eps), math.sin(math.pi / 2 - eps)
    one = np.eye(n)
    return np.block([
        [c * c * one + s * s * u, c * s * (u - one)],
        [c * s * (one - u.conj().T), s * s * u.conj().T + c * c * one],
    ])


def test_rotate_double_closed_form(rng):
    for n in (1, 3, 6):
        u = haar(rng, n)
        for eps in (1e-4, 0.03, 0.0999):
            assert opnorm(rotate_double(u, eps) - rotate_double_oracle(u, eps)) < 1e-13


@given(st.integers(1, 8), st.floats(1e-4, 0.0999), st.floats(1e-4, 0.3), st.integers(0, 2**32 - 1))
def test_rotate_double_bounds(n, eps, scale, seed):
    rng = np.random.default_rng(seed)
    u = haar(rng, n)
    h = gue(rng, n)
    v = expi(h / opnorm(h), scale) @ u
    w = rotate_double(u, eps)
    target = np.block([[u, np.zeros((n, n))], [np.zeros((n, n)), u.conj().T]])
    assert opnorm(w.conj().T @ w - np.eye(2 * n)) < 1e-12
    assert opnorm(w - target) <= 3 * eps + 1e-12
    assert opnorm(np.linalg.inv(w + np.eye(2 * n))) <= 1 / eps + 1e-9
    vv = np.kron(np.eye(2), v)
    assert opnorm(w @ vv - vv @ w) <= 2 * opnorm(u @ v - v @ u) + 1e-12


def test_rotate_double_rejects_eps(rng):
    u = haar(rng, 2)
    for eps in (0.0, -0.01, 0.1, 0.5):
        with pytest.raises(InvalidEpsilon):
            rotate_double(u, eps)


def test_amplify_rejects_paths(rng):
    u = haar(rng, 3)
    v = np.eye(3)
    with pytest.raises(PathNotAdmissible):
        amplify(u, v, [u], 0.05)
    with pytest.raises(PathNotAdmissible):
        amplify(u, v, [np.eye(3), np.eye(3)], 0.05)
    with pytest.raises(PathNotAdmissible):
        amplify(u, v, [u, np.eye(3)], 0.05)  # one big step


def test_commuting_short_circuit(rng):
    x = haar(rng, 5)
    u = (x * np.exp(1j * rng.uniform(-3, 3, 5))) @ x.conj().T
    v = (x * np.exp(1j * rng.uniform(-3, 3, 5))) @ x.conj().T
    u2, v2, rep = approximate(u, v)
    assert rep.short_circuit and rep.distance == 0.0
    assert np.array_equal(u2, u) and np.array_equal(v2, v)


def _small_instance():
    return make_instance(InstanceSpec("perturbed_commuting", 3, scale=1e-3, seed=1))[:2]


def test_structured_matches_dense():
    u, v = _small_instance()
    a_u, a_v, rep_s = approximate(u, v, route="structured")
    b_u, b_v, rep_d = approximate(u, v, route="dense")
    for rep, (x, y) in ((rep_s, (a_u, a_v)), (rep_d, (b_u, b_v))):
        assert rep.commutator_residual < 1e-12
        assert opnorm(x @ y - y @ x) == pytest.approx(rep.commutator_residual, abs=1e-15)
        assert rep.unitarity_u < 1e-12 and rep.unitarity_v < 1e-12
        assert rep.distance_u == pytest.approx(opnorm(u - x), abs=1e-15)
    assert rep_s.n_total == rep_d.n_total
    assert rep_s.distance == pytest.approx(rep_d.distance, abs=1e-10)


def test_report_matches_schema():
    u, v = _small_instance()
    _, _, rep = approximate(u, v)
    d = json.loads(json.dumps(rep.to_dict()))
    schema = load_schema("report")
    assert set(schema["required"]) <= set(d)
    py = {"number": (int, float), "integer": (int,), "string": (str,), "boolean": (bool,),
          "array": (list,), "object": (dict,), "null": (type(None),)}
    for key, spec in schema["properties"].items():
        if key in d and "type" in spec:
            types = spec["type"] if isinstance(spec["type"], list) else [spec["type"]]
            assert isinstance(d[key], tuple(t for name in types for t in py[name])), key
    assert rep.flags  # eps was clamped for this instance and that is recorded


def test_certified_mode_refuses_clamp():
    u, v = _small_instance()
    with pytest.raises(StagePreconditionFailed):
        approximate(u, v, mode=CERTIFIED)


def test_open_gap_with_samples(rng):
    # a commuting-friendly path: u = exp(i h) with h commuting with v, sampled finely
    x = haar(rng, 3)
    h = (x * rng.uniform(-1, 1, 3)) @ x.conj().T
    v0 = (x * np.exp(1j * rng.uniform(-3, 3, 3))) @ x.conj().T
    g = gue(rng, 3)
    v = expi(g / opnorm(g), 1e-4) @ v0
    ts = np.linspace(1.0, 0.0, 40)
    samples = [expi(h, t) for t in ts]
    u = samples[0]
    u2, v2, rep = open_gap(u, v, samples, 0.05)
    assert rep.commutator_residual < 1e-12
    assert rep.d == len(samples) - 1
    with pytest.raises(InvalidInput):
        open_gap(u, v, samples, 0.05, route="sideways")
