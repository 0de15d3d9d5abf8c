import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acu.errors import ArcsTooClose, InvalidInput
from acu.linalg import Arc
from acu.scalar_functions import (
    arc_gap,
    arg_minus,
    arg_rho,
    commutator_ratio_probe,
    distance_to_arc,
    eta_minus,
    plateau_bump,
    sample_circle_minus_gap,
    smooth_sign,
    smooth_step,
)
from conftest import haar, opnorm


def test_smooth_step_shape():
    x = np.linspace(-1, 2, 3001)
    y = smooth_step(x)
    assert np.all(y[x <= 0] == 0.0) and np.all(y[x >= 1] == 1.0)
    assert np.all(np.diff(y) >= 0)
    assert smooth_step(0.5) == pytest.approx(0.5)
    # symmetric about 1/2
    assert np.allclose(smooth_step(x) + smooth_step(1 - x), 1.0, atol=1e-15)
    assert smooth_sign(-3.0) == -1.0 and smooth_sign(1.5) == 1.0 and smooth_sign(0.0) == pytest.approx(0.0)


def test_distance_and_gap():
    arc = Arc(0.0, 1.0)
    assert distance_to_arc(0.5, arc) == 0.0
    assert distance_to_arc(1.3, arc) == pytest.approx(0.3)
    assert distance_to_arc(-0.2, arc) == pytest.approx(0.2)
    assert arc_gap(arc, Arc(1.5, 1.0)) == pytest.approx(0.5)
    assert arc_gap(arc, Arc(0.5, 1.0)) == 0.0


@given(
    st.floats(0, 2 * math.pi),
    st.floats(0.05, 1.2),
    st.floats(0.05, 1.2),
    st.floats(0.05, 0.5),
    st.floats(-1, 1),
    st.floats(-1, 1),
)
def test_plateau_exact_and_bounded(start, len1, len2, beta, a, b):
    arcs = [Arc(start, len1), Arc(start + len1 + beta + 0.01, len2)]
    f = plateau_bump(arcs, [a, b], beta)
    for arc, val in zip(arcs, (a, b)):
        theta = arc.start + np.linspace(0.0, arc.length, 1000)
        assert np.all(f.of_angle(theta) == val)
    grid = np.linspace(-math.pi, math.pi, 20001)
    vals = f.of_angle(grid)
    assert np.max(np.abs(vals)) <= 1.0
    # zero outside the declared supports
    outside = ~np.any([s.contains(grid) for s in f.support], axis=0)
    assert np.all(vals[outside] == 0.0)


def test_plateau_antipodal_odd():
    arcs = [Arc(-0.5, 1.0), Arc(math.pi - 0.5, 1.0)]
    f = plateau_bump(arcs, [1.0, -1.0], 0.4)
    theta = np.linspace(-math.pi, math.pi, 4001)
    assert np.allclose(f.of_angle(theta + math.pi), -f.of_angle(theta), atol=1e-12)


def test_plateau_errors():
    with pytest.raises(ArcsTooClose):
        plateau_bump([Arc(0.0, 1.0), Arc(1.05, 1.0)], [1, 1], 0.1)
    with pytest.raises(InvalidInput):
        plateau_bump([Arc(0.0, 1.0)], [1, 1], 0.1)
    with pytest.raises(InvalidInput):
        plateau_bump([Arc(0.0, 1.0)], [2.0], 0.1)
    with pytest.raises(InvalidInput):
        plateau_bump([Arc(0.0, 1.0)], [1.0], 0.0)


def test_eta_minus():
    f = eta_minus()
    theta = np.linspace(-math.pi, math.pi, 100001)
    z = np.exp(1j * theta)
    vals = f(z)
    assert np.all(vals[z.real <= -0.5] == 1.0)
    far = distance_to_arc(theta, Arc(2 * math.pi / 3, 2 * math.pi / 3)) >= 0.1
    assert np.all(vals[far] == 0.0)
    assert np.all((vals >= 0) & (vals <= 1))


def test_functional_calculus(rng):
    x = haar(rng, 6)
    lam = np.exp(1j * np.array([3.0, -3.0, 0.1, 0.2, 2.5, -2.2]))
    u = (x * lam) @ x.conj().T
    f = eta_minus()
    assert opnorm(f.apply(u) - (x * f(lam)) @ x.conj().T) < 1e-10


def test_arg_rho_examples():
    f = arg_rho(0.1)
    assert f(1.0) == pytest.approx(0.0, abs=1e-15)
    assert f(1j) == pytest.approx(math.pi / 2)
    assert f(np.exp(1j * (math.pi - 0.1))) == pytest.approx(math.pi - 0.1, abs=1e-12)
    assert f(np.exp(-1j * (math.pi - 0.1))) == pytest.approx(-(math.pi - 0.1), abs=1e-12)
    for bad in (0.0, -1.0, 2.0):
        with pytest.raises(InvalidInput):
            arg_rho(bad)


@pytest.mark.parametrize("rho", [0.4, 0.2, 0.1, 0.05])
def test_arg_rho_agrees_off_gap(rho):
    z = sample_circle_minus_gap(rho, 10_000)
    assert np.min(np.abs(z + 1)) >= rho - 1e-12
    assert np.max(np.abs(arg_rho(rho)(z) - arg_minus(z))) <= 1e-10


def test_arg_rho_smooth_through_gap():
    # inside the gap the function interpolates without jumps
    f = arg_rho(0.2)
    theta = np.linspace(math.pi - 0.3, math.pi + 0.3, 20001)
    vals = f(np.exp(1j * theta))
    assert np.max(np.abs(np.diff(vals))) < 1e-2


def test_probe_reference_functions():
    const = commutator_ratio_probe(lambda z: np.ones_like(z), trials=20, n=8)
    assert const["max"] < 1e-10
    ident = commutator_ratio_probe(lambda z: z, trials=20, n=8)
    assert ident["max"] == pytest.approx(1.0, abs=1e-8) and ident["min"] == pytest.approx(1.0, abs=1e-8)


def test_probe_arg_rho_trend():
    ratios = {rho: commutator_ratio_probe(arg_rho(rho), trials=40, n=12, gap_rho=rho)["max"] for rho in (0.4, 0.1)}
    c = ratios[0.4] * 0.4
    assert ratios[0.1] <= 2 * c / 0.1
