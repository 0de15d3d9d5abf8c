"""Refinement of two intertwined cyclic families of projections.

Given partitions of unity ``P_0..P_{N-1}`` and ``Q_0..Q_{N-1}`` where each
``Q_k`` sits (almost) inside ``P_k + P_{k+1}`` and each ``P_k`` inside
``Q_{k-1} + Q_k``, split every block in two,

    P_k = p'_{2k-1} + p'_{2k},      Q_k = q'_{2k} + q'_{2k+1},

so that the halves with equal index are close and one unitary ``W`` near
the identity conjugates all of them at once: ``W q'_j W* = p'_j``.
Indices of the halves live in Z/2N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AcuError, InvalidInput, StageFailure
from .linalg import as_square, dagger, hermitian_part, op_norm, range_basis
from .projections import disjoin_with_target, intertwine_projections, sharpen_projection

FAMILY_TOL = 1e-9
EPS_LIMIT = 1.0 / 200.0


@dataclass
class CyclicFamily:
    """Pairwise orthogonal projections summing to the identity, indexed mod N."""

    projections: list

    def __post_init__(self):
        mats = [hermitian_part(as_square(p, "P_k")) for p in self.projections]
        if len(mats) < 2:
            raise InvalidInput("a cyclic family needs N >= 2 projections")
        n = mats[0].shape[0]
        if any(m.shape != (n, n) for m in mats):
            raise InvalidInput("family members differ in size")
        total = sum(mats)
        if op_norm(total - np.eye(n)) > FAMILY_TOL:
            raise InvalidInput("family does not sum to the identity")
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                if op_norm(mats[i] @ mats[j]) > FAMILY_TOL:
                    raise InvalidInput(f"members {i} and {j} are not orthogonal")
        self.projections = mats

    @property
    def N(self) -> int:
        return len(self.projections)

    @property
    def n(self) -> int:
        return self.projections[0].shape[0]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.projections[k % self.N]


@dataclass
class RefinedFamilies:
    p_prime: list
    q_prime: list
    W: np.ndarray
    epsilon_measured: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.p_prime) // 2


def measure_family_defect(P: CyclicFamily, Q: CyclicFamily) -> float:
    """Largest of the commutators ``||[P_k, Q_j]||`` and the two alignment defects."""
    if P.N != Q.N:
        raise InvalidInput("families have different lengths")
    N = P.N
    eps = 0.0
    for k in range(N):
        for j in range(N):
            eps = max(eps, op_norm(P[k] @ Q[j] - Q[j] @ P[k]))
        eps = max(eps, op_norm((P[k] + P[k + 1]) @ Q[k] - Q[k]))
        eps = max(eps, op_norm((Q[k - 1] + Q[k]) @ P[k] - P[k]))
    return eps


def _intermediate_quantities(P: CyclicFamily, Q: CyclicFamily) -> dict:
    """The seven families of quantities that should all be at most 4 eps."""
    N = P.N
    r = {}
    s = {}
    for k in range(N):
        r[(2 * k - 1) % (2 * N)] = P[k] @ Q[k - 1] @ P[k]
        r[2 * k] = P[k] @ Q[k] @ P[k]
        s[2 * k] = Q[k] @ P[k] @ Q[k]
        s[2 * k + 1] = Q[k] @ P[k + 1] @ Q[k]
    out = {
        "r_idempotency": max(op_norm(x @ x - x) for x in r.values()),
        "s_idempotency": max(op_norm(x @ x - x) for x in s.values()),
        "r_pair_product": max(op_norm(r[(2 * k - 1) % (2 * N)] @ r[2 * k]) for k in range(N)),
        "s_pair_product": max(op_norm(s[2 * k] @ s[2 * k + 1]) for k in range(N)),
        "r_minus_s": max(op_norm(r[j] - s[j]) for j in range(2 * N)),
        "r_sum_defect": max(op_norm(r[(2 * k - 1) % (2 * N)] + r[2 * k] - P[k]) for k in range(N)),
        "s_sum_defect": max(op_norm(s[2 * k] + s[2 * k + 1] - Q[k]) for k in range(N)),
    }
    return out


def _split_block(basis: np.ndarray, a: np.ndarray, b: np.ndarray, stage: str):
    """Inside ``ran`` of ``basis`` sharpen the compressions of ``a`` and ``b`` and disjoin them.

    Returns the pair of complementary exact projections ``(first, second)``
    in full coordinates, where ``second`` is the conjugated sharpening of
    ``b`` and ``first`` its complement, plus the norm of the disjoining
    unitary and the sharpening distances.
    """
    n = basis.shape[0]
    m = basis.shape[1]
    if m == 0:
        z = np.zeros((n, n), dtype=complex)
        return z, z.copy(), 0.0, 0.0
    ca = dagger(basis) @ a @ basis
    cb = dagger(basis) @ b @ basis
    try:
        ta, da = sharpen_projection(ca)
        tb, db = sharpen_projection(cb)
    except AcuError as exc:
        raise StageFailure(f"{stage}:sharpen", getattr(exc, "measured", math.nan) or math.nan) from exc
    try:
        sigma, target = disjoin_with_target(tb, ta)
    except AcuError as exc:
        raise StageFailure(f"{stage}:disjoin", getattr(exc, "measured", math.nan) or math.nan) from exc
    second = hermitian_part(target)
    first = np.eye(m) - second
    lift = lambda x: basis @ x @ dagger(basis)
    return lift(first), lift(second), op_norm(sigma - np.eye(m)), max(da, db)


def refine_intertwined(P: CyclicFamily, Q: CyclicFamily, *, check: bool = True) -> RefinedFamilies:
    """Split both families into exactly matching halves and build ``W``.

    Parameters
    ----------
    P, Q : CyclicFamily
        Families of equal length ``N`` with defect below 1/200.
    check : bool
        Refuse inputs whose measured defect is at least 1/200.

    Returns
    -------
    RefinedFamilies
        ``p_prime[j]``, ``q_prime[j]`` for ``j`` in ``0..2N-1`` and ``W`` with
        ``W q'_j W* = p'_j``.  ``diagnostics`` holds every intermediate
        norm the construction controls.

    Raises
    ------
    StageFailure
        When a stage's hypothesis fails (defect, sharpening, disjoining or
        a rank mismatch between matching halves).
    """
    eps = measure_family_defect(P, Q)
    if check and eps >= EPS_LIMIT:
        raise StageFailure("family-defect", eps, EPS_LIMIT)
    N = P.N
    n = P.n
    diag: dict = {"epsilon": eps}
    diag["intermediate"] = _intermediate_quantities(P, Q)

    p_prime: list = [None] * (2 * N)
    q_prime: list = [None] * (2 * N)
    u_norms = []
    v_norms = []
    sharpen_dists = []
    for k in range(N):
        bp = range_basis(P[k])
        # r_{2k-1} = P_k Q_{k-1} P_k, r_{2k} = P_k Q_k P_k; the even one is pushed off the odd one
        first, second, un, sd = _split_block(bp, Q[k - 1], Q[k], f"P{k}")
        p_prime[(2 * k - 1) % (2 * N)] = first
        p_prime[2 * k] = second
        u_norms.append(un)
        sharpen_dists.append(sd)

        bq = range_basis(Q[k])
        # s_{2k} = Q_k P_k Q_k, s_{2k+1} = Q_k P_{k+1} Q_k
        first, second, vn, sd = _split_block(bq, P[k + 1], P[k], f"Q{k}")
        q_prime[2 * k] = second
        q_prime[(2 * k + 1) % (2 * N)] = first
        v_norms.append(vn)
        sharpen_dists.append(sd)

    W_tilde = np.zeros((n, n), dtype=complex)
    wj_norms = []
    pair_dists = []
    for j in range(2 * N):
        d = op_norm(p_prime[j] - q_prime[j])
        pair_dists.append(d)
        try:
            wj, dist = intertwine_projections(p_prime[j], q_prime[j])
        except AcuError as exc:
            raise StageFailure(f"intertwine:{j}", d, 1.0) from exc
        wj_norms.append(dist)
        W_tilde += wj @ p_prime[j]
    W = dagger(W_tilde)

    diag.update(
        disjoin_P_max=max(u_norms),
        disjoin_Q_max=max(v_norms),
        sharpen_max=max(sharpen_dists),
        pair_distance_max=max(pair_dists),
        kato_max=max(wj_norms),
        W_minus_one=op_norm(W - np.eye(n)),
    )
    return RefinedFamilies(p_prime, q_prime, W, eps, diag)


def conjugation_residual(res: RefinedFamilies) -> float:
    """``max_j ||W q'_j W* - p'_j||``."""
    W = res.W
    return max(op_norm(W @ q @ dagger(W) - p) for p, q in zip(res.p_prime, res.q_prime))


def families_from_list(P: Sequence, Q: Sequence) -> tuple[CyclicFamily, CyclicFamily]:
    return CyclicFamily(list(P)), CyclicFamily(list(Q))
