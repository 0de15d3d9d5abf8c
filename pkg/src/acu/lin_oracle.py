"""Exactly commuting approximants for almost commuting pairs.

The engine is joint approximate diagonalisation (JAD) of two Hermitian
matrices by complex Jacobi rotations.  A unitary ``X`` is found that makes
``X* t X`` and ``X* s X`` as diagonal as possible; dropping the remaining
off-diagonal entries yields ``t'`` and ``s'`` that commute exactly because
they are diagonal in one basis.  Everything else in this module is a short
chain of reductions to that case:

* ``normal_approximant``: real and imaginary parts of ``a``.
* ``normal_approximant_annulus``: the same, with eigenvalues clamped
  radially into ``1 <= |z| <= 3``.
* ``commuting_hermitian_unitary``: the normal matrix ``b ~ s (t + 2)``
  gives ``t' = |b| - 2`` and ``s' = b / |b|``.
* ``commuting_gapped_unitaries``: take the logarithm of ``u`` across its
  gap and use the previous case.

Every result carries the common eigenbasis and the two eigenvalue lists, so
callers can keep working in that basis without another decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInput, NoSpectralGap, OracleDidNotConverge, OutOfAnnulus
from .linalg import (
    as_square,
    check_unitary,
    comm_norm,
    dagger,
    eig_unitary,
    hermitian_part,
    op_norm,
)

COMMUTE_TOL = 1e-10
MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
STALL_TOL = 1e-10
SWEEP_FOCUS = 1e-2  # a sweep only visits pairs within this factor of the largest angle
WARM_START_MIX = 0.6180339887498949  # generic weight for the warm-start combination


@dataclass
class OracleResult:
    """Commuting output pair and bookkeeping.

    ``basis`` is a unitary whose columns diagonalise both outputs, with
    ``first = basis @ diag(first_eigs) @ basis*`` and likewise ``second``.
    """

    first: np.ndarray
    second: np.ndarray
    dist: float
    commutator_residual: float
    iterations: int
    scaling_ratio: float
    basis: Optional[np.ndarray] = None
    first_eigs: Optional[np.ndarray] = None
    second_eigs: Optional[np.ndarray] = None
    input_commutator: float = 0.0
    extra: dict = field(default_factory=dict)


def _ratio(dist: float, comm: float) -> float:
    if comm > 0:
        return dist / math.sqrt(comm)
    return 0.0 if dist == 0 else math.inf


def _from_diag(basis: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return (basis * vals) @ dagger(basis)


# ---------------------------------------------------------------------------
# joint diagonalisation
# ---------------------------------------------------------------------------

def _rotation(mats: list, p: int, q: int) -> tuple[float, complex, float]:
    """Cardoso-Souloumiac complex Givens parameters for the pair ``(p, q)``."""
    gram = np.zeros((3, 3))
    for m in mats:
        d = (m[p, p] - m[q, q]).real
        re = 2.0 * m[p, q].real
        im = 2.0 * m[p, q].imag
        g = np.array([d, re, im])
        gram += np.outer(g, g)
    _, x = np.linalg.eigh(gram)
    vec = x[:, -1]
    if vec[0] < 0:
        vec = -vec
    c = math.sqrt(0.5 + vec[0] / 2.0)
    s = 0.5 * (vec[1] - 1j * vec[2]) / c
    return c, s, abs(s)


def _apply_rotation(mats: list, V: np.ndarray, p: int, q: int, c: float, s: complex) -> None:
    sc = np.conj(s)
    for m in mats:
        rp = m[p].copy()
        rq = m[q]
        m[p] = c * rp + sc * rq
        m[q] = c * rq - s * rp
        cp = m[:, p].copy()
        cq = m[:, q]
        m[:, p] = c * cp + s * cq
        m[:, q] = c * cq - sc * cp
    vp = V[:, p].copy()
    vq = V[:, q]
    V[:, p] = c * vp + s * vq
    V[:, q] = c * vq - sc * vp


def _off_mass(stack: np.ndarray) -> float:
    total = float(np.sum(np.abs(stack) ** 2))
    diag = float(np.sum(np.abs(np.einsum("kii->ki", stack)) ** 2))
    return max(total - diag, 0.0)


def _candidates(stack: np.ndarray, tol: float, rel: float = 0.0) -> np.ndarray:
    """Index pairs whose estimated Jacobi angle exceeds the threshold, largest first.

    The threshold is ``max(tol, rel * largest estimate)``.
    """
    d = np.real(np.einsum("kii->ki", stack))
    gap2 = np.zeros(stack.shape[1:])
    off2 = np.zeros(stack.shape[1:])
    for k in range(stack.shape[0]):
        gap2 += (d[k][:, None] - d[k][None, :]) ** 2
        off2 += np.abs(stack[k]) ** 2
    iu = np.triu_indices(stack.shape[1], 1)
    off = off2[iu]
    gap = gap2[iu]
    est = np.sqrt(off) / np.maximum(np.sqrt(gap), 1e-300)
    est[off <= (tol * 1e-3) ** 2] = 0.0
    thr = max(tol, rel * float(est.max(initial=0.0)))
    keep = est > thr
    order = np.argsort(-est[keep])
    return np.stack([iu[0][keep][order], iu[1][keep][order]], axis=1)


def joint_diagonalize(
    mats,
    *,
    tol: float = JACOBI_TOL,
    max_sweeps: int = MAX_SWEEPS,
    init: Optional[np.ndarray] = None,
    warm_start: bool = True,
    stall_tol: float = STALL_TOL,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Unitary ``V`` making ``V* M_k V`` nearly diagonal for each Hermitian ``M_k``.

    Threshold Jacobi: each sweep visits the pairs whose estimated rotation
    angle exceeds ``tol`` (largest first) and applies the exact
    Cardoso-Souloumiac rotation for that pair.  The run stops when no pair
    needs a rotation above ``tol``, or when a sweep lowers the off-diagonal
    mass by less than the fraction ``stall_tol`` (for pairs that do not
    commute the last rotations converge slowly and no longer move the
    truncated output).  By default the iteration starts from the
    eigenbasis of a generic combination ``M_0 + c M_1``, which is exact for
    commuting inputs with simple joint spectrum and close to optimal for
    almost commuting ones.

    Parameters
    ----------
    mats : sequence of ndarray, each shape (n, n)
        Hermitian matrices.
    tol : float
        Rotation threshold (the sine of the Jacobi angle).
    max_sweeps : int
        Sweep limit.
    init : ndarray, optional
        Starting unitary; overrides ``warm_start``.
    warm_start : bool
        Start from the eigenbasis of a generic linear combination.
    stall_tol : float
        Relative decrease of the off-diagonal mass below which a sweep
        counts as stalled.

    Returns
    -------
    V : ndarray, shape (n, n)
    D : ndarray, shape (k, n, n)
        ``V* M_k V``.
    sweeps : int

    Raises
    ------
    OracleDidNotConverge
        After ``max_sweeps`` sweeps; ``best`` holds ``(V, D)``.
    """
    stack = np.array([hermitian_part(as_square(m, "M")) for m in mats])
    n = stack.shape[1]
    if init is not None:
        V = np.array(init, dtype=complex)
    elif warm_start and n > 1:
        scales = [max(op_norm(m), 1e-300) for m in stack]
        combo = sum((WARM_START_MIX ** k) * m / s for k, (m, s) in enumerate(zip(stack, scales)))
        _, V = np.linalg.eigh(hermitian_part(combo))
        V = V.astype(complex)
    else:
        V = np.eye(n, dtype=complex)
    stack = np.array([dagger(V) @ m @ V for m in stack])
    if n < 2:
        return V, stack, 0
    prev = _off_mass(stack)
    mats = list(stack)
    for sweep in range(1, max_sweeps + 1):
        pairs = _candidates(stack, tol, SWEEP_FOCUS)
        if pairs.size == 0:
            return V, stack, sweep - 1
        rotated = False
        for p, q in pairs:
            c, s, mag = _rotation(mats, p, q)
            if mag <= tol:
                continue
            rotated = True
            _apply_rotation(mats, V, p, q, c, s)
        cur = _off_mass(stack)
        if not rotated or prev - cur <= stall_tol * prev:
            return V, stack, sweep
        prev = cur
    raise OracleDidNotConverge(f"no convergence after {max_sweeps} sweeps", best=(V, stack))


def _sorted_common_basis(V: np.ndarray, d1: np.ndarray, d2: np.ndarray):
    order = np.lexsort((d2, d1))
    return V[:, order], d1[order], d2[order]


# ---------------------------------------------------------------------------
# the four cases
# ---------------------------------------------------------------------------

def commuting_hermitian_pair(
    t,
    s,
    *,
    commute_tol: float = COMMUTE_TOL,
    max_sweeps: int = MAX_SWEEPS,
    accept_unconverged: bool = False,
) -> OracleResult:
    """Commuting Hermitian ``t', s'`` near the Hermitian pair ``(t, s)``.

    Both outputs are diagonal in the JAD basis (ties ordered by the
    eigenvalue of ``t'``, then ``s'``).  Their norms do not exceed those of
    the inputs: a diagonal entry ``<x, t x>`` is bounded by ``||t||``.
    Exactly commuting inputs (commutator at most ``commute_tol``) are
    returned unchanged.

    With ``accept_unconverged`` the last iterate is used when the sweep
    limit is hit.  The outputs still commute exactly (they are diagonal in
    a common unitary basis); only the distance may be larger than a
    converged run would give.  ``extra["converged"]`` records which case
    occurred.
    """
    t = hermitian_part(as_square(t, "t"))
    s = hermitian_part(as_square(s, "s"))
    if t.shape != s.shape:
        raise InvalidInput("t and s differ in size")
    comm = comm_norm(t, s)
    if comm <= commute_tol:
        V, D, _ = joint_diagonalize([t, s], max_sweeps=max_sweeps)
        d1, d2 = np.real(np.diagonal(D[0])), np.real(np.diagonal(D[1]))
        V, d1, d2 = _sorted_common_basis(V, d1, d2)
        return OracleResult(t, s, 0.0, comm, 0, 0.0, V, d1, d2, comm, {"short_circuit": True})
    converged = True
    try:
        V, D, sweeps = joint_diagonalize([t, s], max_sweeps=max_sweeps)
    except OracleDidNotConverge as exc:
        if not accept_unconverged:
            raise
        (V, D), sweeps, converged = exc.best, max_sweeps, False
    d1, d2 = np.real(np.diagonal(D[0])), np.real(np.diagonal(D[1]))
    V, d1, d2 = _sorted_common_basis(V, d1, d2)
    t2 = _from_diag(V, d1)
    s2 = _from_diag(V, d2)
    dist = op_norm(t - t2) + op_norm(s - s2)
    return OracleResult(t2, s2, dist, comm_norm(t2, s2), sweeps, _ratio(dist, comm), V, d1, d2, comm, {"converged": converged})


def _real_imag(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 0.5 * (a + dagger(a)), (a - dagger(a)) / 2j


def normal_approximant(a, *, commute_tol: float = COMMUTE_TOL, max_sweeps: int = MAX_SWEEPS, accept_unconverged: bool = False) -> OracleResult:
    """Normal ``b`` near ``a`` from a commuting approximant of ``(Re a, Im a)``.

    ``first`` is ``b`` and ``second`` is ``b*``; ``first_eigs`` are the
    eigenvalues of ``b`` in ``basis``.
    """
    a = as_square(a, "a")
    x, y = _real_imag(a)
    res = commuting_hermitian_pair(x, y, commute_tol=commute_tol, max_sweeps=max_sweeps, accept_unconverged=accept_unconverged)
    eigs = res.first_eigs + 1j * res.second_eigs
    if res.extra.get("short_circuit"):
        b = a
    else:
        b = _from_diag(res.basis, eigs)
    comm = comm_norm(a, dagger(a))
    dist = op_norm(a - b)
    return OracleResult(b, dagger(b), dist, comm_norm(b, dagger(b)), res.iterations, _ratio(dist, comm), res.basis, eigs, np.conj(eigs), comm, res.extra)


def _clamp_annulus(z: np.ndarray, lo: float = 1.0, hi: float = 3.0) -> np.ndarray:
    r = np.abs(z)
    phase = np.where(r > 0, z / np.where(r > 0, r, 1.0), 1.0)
    return phase * np.clip(r, lo, hi)


def normal_approximant_annulus(
    a,
    *,
    slack: float = 0.2,
    commute_tol: float = COMMUTE_TOL,
    max_sweeps: int = MAX_SWEEPS,
    accept_unconverged: bool = False,
) -> OracleResult:
    """Normal ``b`` near ``a`` with spectrum in the closed annulus ``1 <= |z| <= 3``.

    Raises
    ------
    OutOfAnnulus
        If a singular value of ``a`` lies outside ``[1 - slack, 3 + slack]``.
    """
    a = as_square(a, "a")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size and (sv.min() < 1.0 - slack or sv.max() > 3.0 + slack):
        raise OutOfAnnulus(f"singular values in [{sv.min():.4f}, {sv.max():.4f}]", float(sv.min()))
    res = normal_approximant(a, commute_tol=commute_tol, max_sweeps=max_sweeps, accept_unconverged=accept_unconverged)
    eigs = _clamp_annulus(res.first_eigs)
    if res.extra.get("short_circuit") and np.allclose(eigs, res.first_eigs, rtol=0, atol=0):
        b = res.first
    else:
        b = _from_diag(res.basis, eigs)
    comm = res.input_commutator
    dist = op_norm(a - b)
    return OracleResult(b, dagger(b), dist, comm_norm(b, dagger(b)), res.iterations, _ratio(dist, comm), res.basis, eigs, np.conj(eigs), comm, res.extra)


def commuting_hermitian_unitary(
    t,
    s,
    *,
    commute_tol: float = COMMUTE_TOL,
    max_sweeps: int = MAX_SWEEPS,
    accept_unconverged: bool = False,
) -> OracleResult:
    """Commuting ``t'`` (Hermitian, ``||t'|| <= 1``) and ``s'`` (unitary) near ``(t, s)``.

    ``a = s (t + 2)`` has singular values in ``[1, 3]``; with ``b`` its
    annulus-normal approximant, ``t' = |b| - 2`` and ``s' = b |b|^{-1}``.
    """
    t = hermitian_part(as_square(t, "t"))
    s = check_unitary(s, 1e-8, "s")
    if op_norm(t) > 1.0 + 1e-9:
        raise InvalidInput(f"||t|| = {op_norm(t):.6f} exceeds 1")
    n = t.shape[0]
    comm = comm_norm(t, s)
    if comm <= commute_tol:
        dec_basis, tv, sv = _joint_basis_commuting(t, s)
        return OracleResult(t, s, 0.0, comm, 0, 0.0, dec_basis, tv, sv, comm, {"short_circuit": True})
    a = s @ (t + 2.0 * np.eye(n))
    res = normal_approximant_annulus(a, commute_tol=commute_tol, max_sweeps=max_sweeps, accept_unconverged=accept_unconverged)
    mod = np.abs(res.first_eigs)
    tv = np.clip(mod - 2.0, -1.0, 1.0)
    sv = res.first_eigs / mod
    t2 = _from_diag(res.basis, tv.astype(complex))
    s2 = _from_diag(res.basis, sv)
    dist = op_norm(t - t2) + op_norm(s - s2)
    return OracleResult(t2, s2, dist, comm_norm(t2, s2), res.iterations, _ratio(dist, comm), res.basis, tv, sv, comm, res.extra)


def _joint_basis_commuting(t: np.ndarray, s: np.ndarray):
    """Common eigenbasis of a commuting Hermitian ``t`` and unitary ``s``."""
    x, y = _real_imag(s)
    V, D, _ = joint_diagonalize([t, x, y])
    tv = np.real(np.diagonal(D[0]))
    sv = np.real(np.diagonal(D[1])) + 1j * np.real(np.diagonal(D[2]))
    sv = sv / np.abs(sv)
    return V, tv, sv


def commuting_gapped_unitaries(
    u,
    v,
    gap_center: float = math.pi,
    gap_radius: float = 0.1,
    *,
    commute_tol: float = COMMUTE_TOL,
    max_sweeps: int = MAX_SWEEPS,
    check_gap: bool = True,
    accept_unconverged: bool = False,
) -> OracleResult:
    """Commuting unitaries near ``(u, v)`` when ``u`` has a spectral gap.

    Parameters
    ----------
    u, v : array_like
        Unitary matrices.
    gap_center : float
        Angle of the gap centre ``exp(i gap_center)``; the default is -1.
    gap_radius : float
        Radius ``rho`` of the disc about the centre that must be free of
        eigenvalues of ``u``.

    Returns
    -------
    OracleResult
        ``first = u'`` and ``second = v'``.  ``extra["gap_ratio"]`` is
        ``dist / (rho^{-1/2} ||[u,v]||^{1/2})``.

    Raises
    ------
    NoSpectralGap
        If an eigenvalue of ``u`` is within ``gap_radius`` of the centre.
    """
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    if gap_radius <= 0:
        raise InvalidInput("gap_radius must be positive")
    center = np.exp(1j * gap_center)
    dec = eig_unitary(u)
    eigs = dec.eigenvalues
    gap = float(np.min(np.abs(eigs - center))) if eigs.size else math.inf
    if check_gap and gap < gap_radius:
        raise NoSpectralGap(f"eigenvalue at distance {gap:.4e} < {gap_radius:.4e} from the gap centre", gap)
    comm = comm_norm(u, v)
    # rotate the gap to -1 and take arguments in (-pi, pi)
    rot = np.exp(1j * (math.pi - gap_center))
    vecs, angles = dec.vectors()
    ang = np.angle(rot * np.exp(1j * angles))
    x = _from_diag(vecs, (ang / (2 * math.pi)).astype(complex))
    x = hermitian_part(x)
    if comm <= commute_tol:
        V, tv, sv = _joint_basis_commuting(x, v)
        first_eigs = np.exp(2j * math.pi * tv) / rot
        return OracleResult(u, v, 0.0, comm, 0, 0.0, V, first_eigs, sv, comm, {"short_circuit": True, "gap": gap, "gap_ratio": 0.0})
    res = commuting_hermitian_unitary(x, v, commute_tol=commute_tol, max_sweeps=max_sweeps, accept_unconverged=accept_unconverged)
    first_eigs = np.exp(2j * math.pi * res.first_eigs) / rot
    u2 = _from_diag(res.basis, first_eigs)
    v2 = res.second
    dist = op_norm(u - u2) + op_norm(v - v2)
    denom = math.sqrt(comm / gap_radius) if comm > 0 else 0.0
    extra = {
        "gap": gap,
        "gap_ratio": dist / denom if denom > 0 else 0.0,
        "x_commutator": res.input_commutator,
        "converged": res.extra.get("converged", True),
    }
    return OracleResult(u2, v2, dist, comm_norm(u2, v2), res.iterations, _ratio(dist, comm), res.basis, first_eigs, res.second_eigs, comm, extra)
