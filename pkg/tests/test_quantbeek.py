import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acu.errors import InvalidInput, StageFailure
from acu.generators import doubled_voiculescu, intertwined_families
from acu.homotopy import arc_families
from acu.linalg import idempotency_defect
from acu.quantbeek import (
    CyclicFamily,
    conjugation_residual,
    families_from_list,
    measure_family_defect,
    refine_intertwined,
)
from conftest import haar, opnorm


def defect_oracle(P, Q):
    """Independent evaluation of the three assumption families."""
    N = len(P)
    vals = []
    for k in range(N):
        for j in range(N):
            vals.append(opnorm(P[k] @ Q[j] - Q[j] @ P[k]))
        vals.append(opnorm((P[k] + P[(k + 1) % N]) @ Q[k] - Q[k]))
        vals.append(opnorm((Q[(k - 1) % N] + Q[k]) @ P[k] - P[k]))
    return max(vals)


def check_refinement(P, Q, res):
    N = len(P)
    n = P[0].shape[0]
    eps = res.epsilon_measured
    pp, qq = res.p_prime, res.q_prime
    for j in range(2 * N):
        assert idempotency_defect(pp[j]) < 1e-10 and idempotency_defect(qq[j]) < 1e-10
        assert opnorm(pp[j] - qq[j]) <= 200 * eps + 1e-12
    for k in range(N):
        assert opnorm(pp[(2 * k - 1) % (2 * N)] + pp[2 * k] - P[k]) < 1e-9
        assert opnorm(qq[2 * k] + qq[(2 * k + 1) % (2 * N)] - Q[k]) < 1e-9
    W = res.W
    assert opnorm(W.conj().T @ W - np.eye(n)) < 1e-10
    for j in range(2 * N):
        assert opnorm(W @ qq[j] @ W.conj().T - pp[j]) < 1e-9
    assert opnorm(W - np.eye(n)) <= 100 * eps * math.sqrt(N) + 1e-12
    for name, val in res.diagnostics["intermediate"].items():
        assert val <= 4 * eps + 1e-12, name


def test_family_validation():
    with pytest.raises(InvalidInput):
        CyclicFamily([np.eye(2)])
    with pytest.raises(InvalidInput):
        CyclicFamily([np.eye(2), np.eye(2)])


def test_defect_examples(rng):
    x = haar(rng, 6)
    P = [x[:, 2 * k:2 * k + 2] @ x[:, 2 * k:2 * k + 2].conj().T for k in range(3)]
    Pf, Qf = families_from_list(P, P)
    # Q = P violates nothing except possibly alignment, which holds since P_k <= P_k + P_{k+1}
    assert measure_family_defect(Pf, Qf) == pytest.approx(defect_oracle(P, P), abs=1e-14)
    assert measure_family_defect(Pf, Qf) < 1e-14
    u = np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, 8)))
    Pf, Qf = arc_families(u, np.eye(8), 2)
    assert measure_family_defect(Pf, Qf) < 1e-14


@pytest.mark.parametrize("m,N", [(16, 3), (32, 3)])
def test_arc_families_of_doubled_pair(m, N):
    u, v = doubled_voiculescu(m)
    Pf, Qf = arc_families(u, v, N)
    eps = measure_family_defect(Pf, Qf)
    assert eps == pytest.approx(defect_oracle(Pf.projections, Qf.projections), abs=1e-13)
    assert eps < 1 / 200
    check_refinement(Pf.projections, Qf.projections, refine_intertwined(Pf, Qf))


def test_exactly_compatible(rng):
    P, Q = intertwined_families(2, 4, 0.0, seed=1)
    res = refine_intertwined(*families_from_list(P, Q))
    assert res.epsilon_measured < 1e-13
    assert opnorm(res.W - np.eye(P[0].shape[0])) < 1e-10


def test_rotated_four_block_families():
    # four blocks on C^8: block size 1, N = 4, rotation angle 1e-3
    P, Q = intertwined_families(1, 4, 1e-3, seed=3)
    res = refine_intertwined(*families_from_list(P, Q))
    assert res.epsilon_measured == pytest.approx(defect_oracle(P, Q), rel=1e-9)
    check_refinement(P, Q, res)


def test_stage_failure_when_too_far():
    P, Q = intertwined_families(2, 3, 0.2, seed=0)
    with pytest.raises(StageFailure):
        refine_intertwined(*families_from_list(P, Q))


@given(st.sampled_from([2, 3, 4, 6]), st.integers(1, 4), st.floats(1e-5, 2e-3), st.integers(0, 2**32 - 1))
def test_refinement_bounds(N, block, scale, seed):
    P, Q = intertwined_families(block, N, scale, seed)
    Pf, Qf = families_from_list(P, Q)
    if measure_family_defect(Pf, Qf) >= 1 / 200:
        return
    res = refine_intertwined(Pf, Qf)
    check_refinement(P, Q, res)
    assert conjugation_residual(res) < 1e-9
