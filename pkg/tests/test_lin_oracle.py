import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acu.errors import InvalidInput, NoSpectralGap, OracleDidNotConverge, OutOfAnnulus
from acu.lin_oracle import (
    commuting_gapped_unitaries,
    commuting_hermitian_pair,
    commuting_hermitian_unitary,
    joint_diagonalize,
    normal_approximant,
    normal_approximant_annulus,
)
from conftest import expi, gue, haar, opnorm


def near_commuting_hermitian(rng, n, scale):
    x = haar(rng, n)
    t = (x * rng.uniform(-1, 1, n)) @ x.conj().T
    s = (x * rng.uniform(-1, 1, n)) @ x.conj().T
    h = gue(rng, n)
    y = expi(h / opnorm(h), scale)
    return t, y @ s @ y.conj().T


def test_joint_diagonalize_commuting(rng):
    x = haar(rng, 7)
    mats = [(x * rng.standard_normal(7)) @ x.conj().T for _ in range(3)]
    V, D, _ = joint_diagonalize(mats)
    assert opnorm(V.conj().T @ V - np.eye(7)) < 1e-12
    for d, m in zip(D, mats):
        assert opnorm(d - np.diag(np.diagonal(d))) < 1e-10
        assert opnorm(V @ d @ V.conj().T - m) < 1e-10


def test_pair_short_circuit(rng):
    t, s = near_commuting_hermitian(rng, 6, 0.0)
    res = commuting_hermitian_pair(t, s)
    assert res.dist == 0.0 and res.extra["short_circuit"]
    assert opnorm(res.basis @ np.diag(res.first_eigs) @ res.basis.conj().T - t) < 1e-10


def test_pair_size_mismatch():
    with pytest.raises(InvalidInput):
        commuting_hermitian_pair(np.eye(2), np.eye(3))


@given(st.integers(2, 16), st.floats(1e-5, 0.1), st.integers(0, 2**32 - 1))
def test_pair_commutes_and_is_close(n, scale, seed):
    rng = np.random.default_rng(seed)
    t, s = near_commuting_hermitian(rng, n, scale)
    res = commuting_hermitian_pair(t, s)
    t2, s2 = res.first, res.second
    assert opnorm(t2 - t2.conj().T) < 1e-12 and opnorm(s2 - s2.conj().T) < 1e-12
    assert opnorm(t2 @ s2 - s2 @ t2) < 1e-10
    assert opnorm(t2) <= opnorm(t) + 1e-12 and opnorm(s2) <= opnorm(s) + 1e-12
    assert res.dist == pytest.approx(opnorm(t - t2) + opnorm(s - s2))
    # the distance stays within a small multiple of the square root of the commutator
    assert res.dist <= 4 * math.sqrt(res.input_commutator) + 1e-12


def test_unconverged_behaviour(rng):
    t, s = near_commuting_hermitian(rng, 12, 0.3)
    with pytest.raises(OracleDidNotConverge):
        commuting_hermitian_pair(t, s, max_sweeps=1)
    res = commuting_hermitian_pair(t, s, max_sweeps=1, accept_unconverged=True)
    assert res.extra["converged"] is False
    assert opnorm(res.first @ res.second - res.second @ res.first) < 1e-10
    full = commuting_hermitian_pair(t, s)
    assert full.extra["converged"] is True


def test_normal_approximant(rng):
    t, s = near_commuting_hermitian(rng, 8, 0.01)
    a = t + 1j * s
    res = normal_approximant(a)
    b = res.first
    assert opnorm(b @ b.conj().T - b.conj().T @ b) < 1e-10
    assert res.dist == pytest.approx(opnorm(a - b))


def test_annulus(rng):
    x = haar(rng, 6)
    a = x @ np.diag([1.0, 1.5, 2.0, 2.5, 3.0, 1.1]) @ haar(rng, 6)
    res = normal_approximant_annulus(a)
    mods = np.abs(res.first_eigs)
    assert np.all(mods >= 1 - 1e-12) and np.all(mods <= 3 + 1e-12)
    with pytest.raises(OutOfAnnulus):
        normal_approximant_annulus(0.5 * np.eye(3))


def test_hermitian_unitary(rng):
    t, h = near_commuting_hermitian(rng, 8, 0.0)
    g = gue(rng, 8)
    # a unitary that commutes with t, then a small perturbation of it
    s = expi(g / opnorm(g), 0.001) @ expi(h, 2.0)
    res = commuting_hermitian_unitary(t, s)
    assert opnorm(res.first @ res.second - res.second @ res.first) < 1e-9
    assert opnorm(res.second.conj().T @ res.second - np.eye(8)) < 1e-10
    assert opnorm(res.first) <= 1 + 1e-12
    with pytest.raises(InvalidInput):
        commuting_hermitian_unitary(2 * np.eye(2), np.eye(2))


def _gapped_pair(rng, n, radius, scale):
    half = 2 * math.asin(radius / 2)
    x = haar(rng, n)
    u = (x * np.exp(1j * rng.uniform(-math.pi + half + 0.02, math.pi - half - 0.02, n))) @ x.conj().T
    v = (x * np.exp(1j * rng.uniform(-math.pi, math.pi, n))) @ x.conj().T
    h = gue(rng, n)
    return u, expi(h / opnorm(h), scale) @ v


@given(st.integers(2, 12), st.floats(1e-4, 0.05), st.integers(0, 2**32 - 1))
def test_gapped_unitaries(n, scale, seed):
    rng = np.random.default_rng(seed)
    u, v = _gapped_pair(rng, n, 0.3, scale)
    res = commuting_gapped_unitaries(u, v, gap_radius=0.3)
    u2, v2 = res.first, res.second
    assert opnorm(u2.conj().T @ u2 - np.eye(n)) < 1e-10
    assert opnorm(v2.conj().T @ v2 - np.eye(n)) < 1e-10
    assert opnorm(u2 @ v2 - v2 @ u2) < 1e-9
    assert res.dist == pytest.approx(opnorm(u - u2) + opnorm(v - v2))


def test_gapped_short_circuit_and_errors(rng):
    u, v = _gapped_pair(rng, 6, 0.3, 0.0)
    res = commuting_gapped_unitaries(u, v, gap_radius=0.3)
    assert res.dist == 0.0 and res.extra["short_circuit"]
    with pytest.raises(NoSpectralGap):
        commuting_gapped_unitaries(-np.eye(3), np.eye(3))
    with pytest.raises(InvalidInput):
        commuting_gapped_unitaries(np.eye(3), np.eye(3), gap_radius=0.0)
    # a gap centred elsewhere is rotated into place
    res = commuting_gapped_unitaries(-np.eye(3), np.eye(3), gap_center=0.0)
    assert res.dist == 0.0
