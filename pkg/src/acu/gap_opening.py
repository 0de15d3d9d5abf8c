"""Commuting approximants from a path to the identity.

Input: unitaries ``u, v`` and a path ``u_t`` from ``u`` to 1 along which
``||[u_t, v]||`` stays small.  The construction has four steps.

1. Amplify.  Sample the path at ``u_0 = u, ..., u_d = 1`` and form the block
   diagonal unitaries ``u_amp = diag(u, u*, u_1, u_1*, ...)`` and
   ``u_path = diag(u_1*, u_1, ..., 1)``.  :func:`rotate_double` perturbs
   each ``diag(w, w*)`` block by ``O(eps)`` so that ``-1`` is at distance at
   least ``eps`` from the spectrum.
2. Commute.  The gapped commuting-pair oracle
   (:func:`acu.lin_oracle.commuting_gapped_unitaries`) is applied block by
   block, giving commuting ``(u'_amp, v'_amp)`` and ``(u'_path, v'_path)``.
3. First reduction.  With ``p`` the top corner and ``q`` the spectral
   subspace of ``u'_path`` for ``Re z <= 0``, rotate the spectral subspace
   of ``u'_amp`` for ``Re z <= -1/2`` into ``ran(p + q)``.  Compress to
   ``ran(p + q)``, split along that subspace and run the oracle on each
   piece.
4. Second reduction.  Rotate the spectral subspace of the result for
   ``Re z > 1/2`` into ``ran p`` and repeat, landing on the original space.

Two routes implement steps 3 and 4.  The structured route never forms a
matrix on the amplified space: it works in the eigenbases returned by the
oracle, uses the direct rotation between a subspace and its projection as
the disjoining unitary (so the rotated subspace has an explicit basis and
its complement is left untouched), and computes every compression from a
singular value decomposition.  The dense route builds every operator
literally and is only meant for small cross-checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    InvalidEpsilon,
    InvalidInput,
    NoSpectralGap,
    NotAlmostOrthogonal,
    PathNotAdmissible,
    StagePreconditionFailed,
)
from .homotopy import UnitaryPath, build_homotopy, direct_rotation, discretize_path, max_commutator_along
from .invariants import BEST_EFFORT, CERTIFIED
from .lin_oracle import COMMUTE_TOL, MAX_SWEEPS, OracleResult, commuting_gapped_unitaries
from .linalg import (
    check_dimension,
    check_unitary,
    comm_norm,
    dagger,
    hermitian_part,
    large_op_norm,
    nearest_unitary,
    op_norm,
    range_basis,
    unitarity_defect,
)
from .projections import disjoin_projections

SCHEMA_VERSION = "1.0"
EPS_LIMIT = 0.1
EPS_CAP = 0.0999
OMEGA_MINUS = -0.5  # Omega_- = {Re z <= -1/2}
OMEGA_PLUS = 0.5  # Omega_+ = {Re z > 1/2}
FIRST_GAP_RADIUS = 0.1
SECOND_GAP_RADIUS = 1.0 / 30.0
DISJOIN_LIMIT = 1.0 / 100.0
INHERITANCE_LIMIT = 1.0 / 1000.0
DENSE_ROUTE_LIMIT = 1600
STEP_SLACK = 1e-12
ENDPOINT_TOL = 1e-9


# ---------------------------------------------------------------------------
# amplification
# ---------------------------------------------------------------------------

def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (0.0 < eps < EPS_LIMIT):
        raise InvalidEpsilon(f"eps = {eps} is outside (0, 1/10)", eps)
    return eps


def _rotation_block(theta: float, n: int, sign: int) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    one = np.eye(n)
    return np.block([[c * one, sign * s * one], [-sign * s * one, c * one]])


def rotate_double(u, eps: float) -> np.ndarray:
    """Perturbation of ``diag(u, u*)`` whose spectrum avoids a neighbourhood of -1.

    The product ``diag(u, 1) R diag(u*, 1) R^T`` with ``R`` the rotation by
    ``pi/2 - eps`` in each coordinate pair.  At ``eps = 0`` it equals
    ``diag(u, u*)``.  For ``0 < eps < 1/10`` the result is within ``3 eps``
    of ``diag(u, u*)``, satisfies ``||(w + 1)^{-1}|| <= 1/eps``, and its
    commutator with ``diag(v, v)`` is at most ``2 ||[u, v]||``.

    Raises
    ------
    InvalidEpsilon
        If ``eps`` is outside ``(0, 1/10)``.
    """
    u = check_unitary(u, 1e-8, "u")
    eps = _check_eps(eps)
    n = u.shape[0]
    zero = np.zeros((n, n))
    one = np.eye(n)
    left = np.block([[u, zero], [zero, one]])
    right = np.block([[dagger(u), zero], [zero, one]])
    theta = math.pi / 2.0 - eps
    return left @ _rotation_block(theta, n, +1) @ right @ _rotation_block(theta, n, -1)


def _block_diag_sparse(blocks: Sequence[np.ndarray]) -> sp.csr_matrix:
    return sp.block_diag([sp.csr_matrix(b) for b in blocks], format="csr")


def _min_gap_to(blocks: Sequence[np.ndarray], point: complex) -> float:
    return min(float(np.min(np.abs(np.linalg.eigvals(b) - point))) for b in blocks)


@dataclass
class AmplifiedPair:
    """Block diagonal amplification of ``(u, v)``.

    ``amp_blocks[j]`` is ``rotate_double(u_j, eps)`` (size ``2n``) and sits at
    offset ``2 j n``; ``path_blocks[j]`` is ``rotate_double(u_{j+1}*, eps)``
    at offset ``n + 2 j n`` of the same ``2dn``-dimensional space, and the
    last path block is the ``n x n`` identity.  ``v_amp`` and ``v_path`` are
    ``v`` repeated along the diagonal.
    """

    u: np.ndarray
    v: np.ndarray
    samples: list
    eps: float
    amp_blocks: list
    path_blocks: list
    delta: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def d(self) -> int:
        return len(self.samples) - 1

    @property
    def n_total(self) -> int:
        return 2 * self.d * self.n

    def _dense(self, blocks) -> np.ndarray:
        check_dimension(sum(b.shape[0] for b in blocks))
        return _block_diag_sparse(blocks).toarray()

    @property
    def u_amp_eps(self) -> np.ndarray:
        return self._dense(self.amp_blocks)

    @property
    def u_path_eps(self) -> np.ndarray:
        return self._dense(self.path_blocks)

    @property
    def v_amp(self) -> np.ndarray:
        return self._dense([self.v] * (2 * self.d))

    @property
    def v_path(self) -> np.ndarray:
        return self._dense([self.v] * (2 * self.d - 1))

    @property
    def p(self) -> np.ndarray:
        """Projection onto the top corner copy of the original space."""
        out = np.zeros((self.n_total, self.n_total))
        out[: self.n, : self.n] = np.eye(self.n)
        return out

    def corner_sum(self, path_blocks: Optional[Sequence[np.ndarray]] = None) -> sp.csr_matrix:
        """``u ⊕ path`` on the amplified space (sparse); defaults to ``u_path(eps)``."""
        blocks = self.path_blocks if path_blocks is None else path_blocks
        return _block_diag_sparse([self.u] + list(blocks))


def _samples_from(path, eps: float) -> list:
    if isinstance(path, UnitaryPath):
        return discretize_path(path, eps)
    return [np.asarray(x, dtype=complex) for x in path]


def amplify(u, v, path, eps: float, *, delta: Optional[float] = None) -> AmplifiedPair:
    """Amplified gapped pair built from samples of ``path``.

    Parameters
    ----------
    u, v : array_like
        Unitary matrices; ``path`` starts at ``u``.
    path : UnitaryPath or sequence of ndarray
        Either a path (sampled at spacing ``eps``) or the samples
        ``u_0 = u, ..., u_d = 1`` themselves.
    eps : float
        Rotation parameter in ``(0, 1/10)``; also the maximal step.
    delta : float, optional
        Commutator budget.  When given, every sample must satisfy
        ``||[u_j, v]|| <= delta``.

    Raises
    ------
    PathNotAdmissible
        Wrong endpoints, steps above ``eps``, or commutators above ``delta``.
    DimensionCap
        If ``2 d n`` exceeds the configured cap.
    """
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    eps = _check_eps(eps)
    n = u.shape[0]
    samples = _samples_from(path, eps)
    if len(samples) < 2:
        raise PathNotAdmissible("a path needs at least two samples", 0.0)
    if op_norm(samples[0] - u) > ENDPOINT_TOL:
        raise PathNotAdmissible("path does not start at u", op_norm(samples[0] - u))
    if op_norm(samples[-1] - np.eye(n)) > ENDPOINT_TOL:
        raise PathNotAdmissible("path does not end at the identity", op_norm(samples[-1] - np.eye(n)))
    steps = [op_norm(b - a) for a, b in zip(samples, samples[1:])]
    if max(steps) > eps + STEP_SLACK:
        raise PathNotAdmissible(f"step {max(steps):.4e} exceeds eps = {eps:.4e}", max(steps))
    d = len(samples) - 1
    check_dimension(2 * d * n)
    comms = [comm_norm(x, v) for x in samples[:-1]]
    measured = max(comms)
    if delta is not None and measured > delta * (1 + 1e-9) + 1e-14:
        raise PathNotAdmissible(f"sample commutator {measured:.4e} exceeds delta = {delta:.4e}", measured)
    samples = samples[:-1] + [np.eye(n, dtype=complex)]

    amp_blocks = [rotate_double(samples[j], eps) for j in range(d)]
    path_blocks = [rotate_double(dagger(samples[j]), eps) for j in range(1, d)] + [np.eye(n, dtype=complex)]
    vv = np.kron(np.eye(2), v)
    diag = {
        "step_max": max(steps),
        "sample_commutator_max": measured,
        "amp_gap": _min_gap_to(amp_blocks, -1.0),
        "path_gap": _min_gap_to(path_blocks, -1.0),
        "amp_commutator": max(comm_norm(b, vv) for b in amp_blocks),
        "path_commutator": max([comm_norm(b, vv) for b in path_blocks[:-1]] + [0.0]),
        "amp_rotation_error": max(
            op_norm(b - np.kron(np.diag([1, 0]), samples[j]) - np.kron(np.diag([0, 1]), dagger(samples[j])))
            for j, b in enumerate(amp_blocks)
        ),
        "top_corner_error": op_norm(u - amp_blocks[0][:n, :n]),
    }
    pair = AmplifiedPair(u, v, samples, eps, amp_blocks, path_blocks, max(delta or 0.0, measured), diag)
    diff = pair.corner_sum() - _block_diag_sparse(amp_blocks)
    diag["transition"] = large_op_norm(diff)
    return pair


# ---------------------------------------------------------------------------
# the amplified commuting pair
# ---------------------------------------------------------------------------

@dataclass
class CommutingAmplified:
    """Oracle output per block: eigenbases with eigenvalues for ``u'`` and ``v'``."""

    amp: list
    path: list
    diagnostics: dict = field(default_factory=dict)

    @staticmethod
    def _dense(results) -> tuple[np.ndarray, np.ndarray]:
        u = sp.block_diag([sp.csr_matrix(r.first) for r in results]).toarray()
        v = sp.block_diag([sp.csr_matrix(r.second) for r in results]).toarray()
        return u, v

    def dense_amp(self):
        return self._dense(self.amp)

    def dense_path(self):
        return self._dense(self.path)


def commute_amplified(
    pair: AmplifiedPair,
    *,
    max_sweeps: int = MAX_SWEEPS,
    commute_tol: float = COMMUTE_TOL,
    accept_unconverged: bool = False,
) -> CommutingAmplified:
    """Apply the gapped oracle (gap at -1, radius ``eps``) to every block.

    ``diagnostics["unconverged_blocks"]`` counts blocks whose joint
    diagonalisation stopped at the sweep limit (only possible with
    ``accept_unconverged``).
    """
    vv = np.kron(np.eye(2), pair.v)
    radius = pair.eps * (1.0 - 1e-9)
    kw = dict(gap_center=math.pi, gap_radius=radius, commute_tol=commute_tol, max_sweeps=max_sweeps, accept_unconverged=accept_unconverged)
    amp = [commuting_gapped_unitaries(b, vv, **kw) for b in pair.amp_blocks]
    path = [commuting_gapped_unitaries(b, vv, **kw) for b in pair.path_blocks[:-1]]
    path.append(commuting_gapped_unitaries(pair.path_blocks[-1], pair.v, **kw))
    diag = {
        "amp_oracle_dist_max": max(r.dist for r in amp),
        "path_oracle_dist_max": max(r.dist for r in path),
        "amp_gap_ratio_max": max(r.extra.get("gap_ratio", 0.0) for r in amp),
        "path_gap_ratio_max": max(r.extra.get("gap_ratio", 0.0) for r in path),
        "oracle_commutator_max": max(r.commutator_residual for r in amp + path),
        "unconverged_blocks": sum(not r.extra.get("converged", True) for r in amp + path),
    }
    res = CommutingAmplified(amp, path, diag)
    upath = [r.first for r in path]
    diff = pair.corner_sum(upath) - _block_diag_sparse([r.first for r in amp])
    diag["transition"] = large_op_norm(diff)
    diag["transition_budget"] = 7 * pair.eps + diag["amp_oracle_dist_max"] + diag["path_oracle_dist_max"]
    return res


def _stack_eigen(results: Sequence[OracleResult]):
    """Sparse block-diagonal eigenbasis and concatenated eigenvalues."""
    basis = sp.block_diag([sp.csr_matrix(r.basis) for r in results], format="csc")
    a = np.concatenate([r.first_eigs for r in results])
    b = np.concatenate([r.second_eigs for r in results])
    return basis, a, b


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class PipelineReport:
    """Measured quantities of one run; every number is recomputed from matrices."""

    n: int
    delta: float
    eps: float
    gamma: Optional[float]
    d: int
    N: Optional[int]
    distance_u: float
    distance_v: float
    commutator_residual: float
    unitarity_u: float
    unitarity_v: float
    mode: str
    route: str
    n_total: int
    flags: list = field(default_factory=list)
    stages: dict = field(default_factory=dict)
    runtime_ms: float = 0.0
    short_circuit: bool = False

    @property
    def distance(self) -> float:
        return self.distance_u + self.distance_v

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "n_total": self.n_total,
            "delta": self.delta,
            "eps": self.eps,
            "gamma": self.gamma,
            "d": self.d,
            "N": self.N,
            "distance_u": self.distance_u,
            "distance_v": self.distance_v,
            "commutator_residual": self.commutator_residual,
            "unitarity_u": self.unitarity_u,
            "unitarity_v": self.unitarity_v,
            "mode": self.mode,
            "route": self.route,
            "flags": list(self.flags),
            "stages": _jsonable(self.stages),
            "runtime_ms": self.runtime_ms,
            "short_circuit": self.short_circuit,
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class _Gate:
    """Stage precondition checks: raise in certified mode, flag otherwise."""

    def __init__(self, mode: str, flags: list):
        self.mode = mode
        self.flags = flags

    def check(self, stage: str, measured: float, bound: float) -> bool:
        if measured < bound:
            return True
        if self.mode == CERTIFIED:
            raise StagePreconditionFailed(stage, measured, bound)
        self.flags.append(f"{stage}: measured {measured:.3e} >= {bound:.3e}")
        return False


def _gapped(u, v, center: float, radius: float, gate: _Gate, stage: str, **kw) -> OracleResult:
    kw.setdefault("accept_unconverged", gate.mode != CERTIFIED)
    try:
        res = commuting_gapped_unitaries(u, v, center, radius, **kw)
    except NoSpectralGap as exc:
        gate.check(f"{stage}:gap", radius / max(exc.measured or 1e-300, 1e-300), 1.0)
        res = commuting_gapped_unitaries(u, v, center, radius, check_gap=False, **kw)
    if not res.extra.get("converged", True):
        gate.flags.append(f"{stage}: joint diagonalisation hit the sweep limit; last iterate used")
    return res


def _polar(x: np.ndarray, gate: _Gate, stage: str) -> tuple[np.ndarray, float]:
    rho = unitarity_defect(x) if x.size else 0.0
    gate.check(f"{stage}:almost-unitary", rho, 0.2)
    w, defect = nearest_unitary(x, check=False)
    return w, defect


def _angle_stats(s: np.ndarray) -> tuple[float, float]:
    """``sqrt(1 - s_min^2)`` and ``2 sin(theta_max / 2)`` for cosines ``s``."""
    if s.size == 0:
        return 0.0, 0.0
    smin = float(np.clip(s.min(), 0.0, 1.0))
    theta = math.acos(smin)
    return math.sqrt(max(0.0, 1.0 - smin * smin)), 2.0 * math.sin(theta / 2.0)


def _select_columns(weights: np.ndarray, cap: int, gate: _Gate, stage: str) -> np.ndarray:
    """Candidates that can be rotated into a target subspace of dimension ``cap``.

    ``weights[j]`` is the norm of the component of candidate ``j`` inside the
    target.  A candidate with ``weight^2 <= 1/2`` would be turned by more
    than ``pi/4``; the subspace as a whole must also fit.  In certified
    mode any exclusion is a failed hypothesis; in best-effort mode the
    excluded eigenvectors stay in the complement, which keeps the
    construction exact (any set of common eigenvectors spans a reducing
    subspace) and only affects the distance.
    """
    k = weights.size
    keep = np.flatnonzero(weights ** 2 > 0.5)
    if keep.size > cap:
        keep = keep[np.argsort(-weights[keep])[:cap]]
    dropped = k - keep.size
    if dropped:
        gate.check(f"{stage}:rank", float(dropped), 1.0)
    return np.sort(keep)


# ---------------------------------------------------------------------------
# structured reductions
# ---------------------------------------------------------------------------

@dataclass
class _FirstReduction:
    F: np.ndarray  # eigenbasis of g', h' in the coordinates of the basis of ran(p+q)
    a: np.ndarray
    b: np.ndarray
    K: int
    stats: dict


def _pq_basis(pair: AmplifiedPair, comm: CommutingAmplified):
    """Sparse isometry whose columns are e_1..e_n and the eigenvectors of u'_path with Re <= 0."""
    n = pair.n
    pb, pa, pbeta = _stack_eigen(comm.path)
    sel = np.real(pa) <= 0.0
    head = sp.identity(n, format="csc", dtype=complex)
    basis = sp.block_diag([head, pb[:, sel]], format="csc")
    return basis, pa[sel], pbeta[sel]


def _first_reduction_structured(pair, comm, gate: _Gate, max_sweeps: int) -> _FirstReduction:
    stats: dict = {}
    n = pair.n
    B, q_alpha, q_beta = _pq_basis(pair, comm)
    K = B.shape[1]
    Q, alpha, beta = _stack_eigen(comm.amp)
    C = (Q.conj().T @ B).tocsr()  # amplified eigen-coordinates of the basis of ran(p+q)
    cand = np.flatnonzero(np.real(alpha) <= OMEGA_MINUS)
    A = C[cand, :].conj().T.toarray()  # B* V, shape (K, #candidates)
    keep = _select_columns(np.linalg.norm(A, axis=0), K, gate, "first-reduction")
    sel = np.zeros(alpha.size, dtype=bool)
    sel[cand[keep]] = True
    A = A[:, keep]
    k = int(keep.size)
    stats.update(dim_pq=K, dim_s_minus=k, dim_omega_minus=int(cand.size), dim_q=K - n)
    Z, s, Yh = np.linalg.svd(A, full_matrices=True)
    overlap, sigma_dist = _angle_stats(s)
    stats.update(overlap=overlap, sigma_minus_one=sigma_dist, s_minus_contained=0.0)
    gate.check("first-reduction:disjoin", overlap, DISJOIN_LIMIT)
    gate.check("first-reduction:inheritance", overlap, INHERITANCE_LIMIT)
    Zk, Zc = Z[:, :k], Z[:, k:]
    a_sel, b_sel = alpha[sel], beta[sel]
    # s_- block: diag(a_sel), diag(b_sel) in the basis Yh of ran(B Zk); already commuting
    F_minus = Zk @ Yh
    # complement block: compress u'_amp to ran(B Zc), which the disjoining rotation fixes
    T = C @ Zc
    g_raw = dagger(T) @ (alpha[:, None] * T)
    h_raw = dagger(T) @ (beta[:, None] * T)
    g_plus, g_def = _polar(g_raw, gate, "first-reduction:g+")
    h_plus, h_def = _polar(h_raw, gate, "first-reduction:h+")
    stats.update(g_plus_defect=g_def, h_plus_defect=h_def, g_plus_commutator=comm_norm(g_plus, h_plus) if K - k else 0.0)
    if K - k:
        gap = float(np.min(np.abs(np.linalg.eigvals(g_plus) + 1.0)))
        stats["g_plus_gap"] = gap
        res = _gapped(g_plus, h_plus, math.pi, FIRST_GAP_RADIUS, gate, "first-reduction:g+", max_sweeps=max_sweeps)
        stats.update(g_plus_oracle_dist=res.dist, g_plus_gap_ratio=res.extra.get("gap_ratio", 0.0))
        F = np.hstack([F_minus, Zc @ res.basis])
        a = np.concatenate([a_sel, res.first_eigs])
        b = np.concatenate([b_sel, res.second_eigs])
    else:
        F, a, b = F_minus, a_sel, b_sel
        stats.update(g_plus_gap=math.inf, g_plus_oracle_dist=0.0)
    stats["g_minus_oracle_dist"] = 0.0
    # distance of (g', h') from (u ⊕ w'_-, v ⊕ v'_-), in the coordinates of B
    target_u = sp.block_diag([sp.csr_matrix(pair.u), sp.diags(q_alpha)], format="csr")
    target_v = sp.block_diag([sp.csr_matrix(pair.v), sp.diags(q_beta)], format="csr")
    stats["g_prime_error"] = _eig_minus_sparse_norm(F, a, target_u)
    stats["h_prime_error"] = _eig_minus_sparse_norm(F, b, target_v)
    return _FirstReduction(F, a, b, K, stats)


def _eig_minus_sparse_norm(F: np.ndarray, vals: np.ndarray, target: sp.spmatrix) -> float:
    """``|| F diag(vals) F* - target ||`` without forming the dense product for large sizes."""
    K = F.shape[0]
    if K <= 600:
        return op_norm((F * vals) @ dagger(F) - target.toarray())
    Fh = dagger(F)
    th = target.conj().T.tocsr()
    op = spla.LinearOperator(
        (K, K),
        matvec=lambda x: F @ (vals * (Fh @ x)) - target @ x,
        rmatvec=lambda x: F @ (np.conj(vals) * (Fh @ x)) - th @ x,
        dtype=complex,
    )
    return large_op_norm(op)


def _second_reduction(n: int, F: np.ndarray, a: np.ndarray, b: np.ndarray, gate: _Gate, max_sweeps: int):
    """Commuting pair on ``ran p`` (the first ``n`` coordinates) from the eigen-data of ``g', h'``."""
    stats: dict = {}
    Fp = F[:n, :]
    cand = np.flatnonzero(np.real(a) > OMEGA_PLUS)
    keep = _select_columns(np.linalg.norm(Fp[:, cand], axis=0), n, gate, "second-reduction")
    sel = np.zeros(a.size, dtype=bool)
    sel[cand[keep]] = True
    k2 = int(keep.size)
    stats.update(dim_s_plus=k2, dim_omega_plus=int(cand.size))
    Z2, s2, Y2h = np.linalg.svd(Fp[:, sel], full_matrices=True)
    overlap, tau_dist = _angle_stats(s2)
    stats.update(overlap=overlap, tau_minus_one=tau_dist, s_plus_contained=0.0)
    gate.check("second-reduction:disjoin", overlap, DISJOIN_LIMIT)
    gate.check("second-reduction:inheritance", overlap, INHERITANCE_LIMIT)
    Zk, Zc = Z2[:, :k2], Z2[:, k2:]
    E_plus = Zk @ Y2h
    if n - k2:
        W = dagger(Zc) @ Fp
        g_raw = (W * a) @ dagger(W)
        h_raw = (W * b) @ dagger(W)
        g, g_def = _polar(g_raw, gate, "second-reduction:g")
        h, h_def = _polar(h_raw, gate, "second-reduction:h")
        stats.update(g_defect=g_def, h_defect=h_def, gap=float(np.min(np.abs(np.linalg.eigvals(g) - 1.0))))
        res = _gapped(g, h, 0.0, SECOND_GAP_RADIUS, gate, "second-reduction", max_sweeps=max_sweeps)
        stats.update(oracle_dist=res.dist, gap_ratio=res.extra.get("gap_ratio", 0.0))
        E = np.hstack([E_plus, Zc @ res.basis])
        ea = np.concatenate([a[sel], res.first_eigs])
        eb = np.concatenate([b[sel], res.second_eigs])
    else:
        E, ea, eb = E_plus, a[sel], b[sel]
        stats.update(oracle_dist=0.0)
    return E, ea, eb, stats


# ---------------------------------------------------------------------------
# dense literal route
# ---------------------------------------------------------------------------

def _disjoiner(P_basis: np.ndarray, r: np.ndarray, gate: _Gate, stage: str, literal: bool) -> tuple[np.ndarray, float]:
    """Unitary moving ``ran P`` off ``ran r``; sharpen-then-intertwine when its hypothesis holds, else the direct rotation."""
    N = r.shape[0]
    P = P_basis @ dagger(P_basis)
    overlap = op_norm(P @ r) if P_basis.shape[1] else 0.0
    if literal:
        try:
            return disjoin_projections(P, r), overlap
        except NotAlmostOrthogonal:
            gate.flags.append(f"{stage}: literal disjoiner unavailable, used direct rotation")
    target = (np.eye(N) - r) @ P_basis
    if P_basis.shape[1]:
        x, _, yh = np.linalg.svd(target, full_matrices=False)
        target = x @ yh
    return direct_rotation(P_basis, target), overlap


def _spectral_basis(vecs: np.ndarray, vals: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return vecs[:, mask]


def _dense_route(pair: AmplifiedPair, comm: CommutingAmplified, gate: _Gate, max_sweeps: int, literal: bool):
    n, N = pair.n, pair.n_total
    stats: dict = {"first": {}, "second": {}}
    st1 = stats["first"]
    u_amp, v_amp = comm.dense_amp()
    Qa, alpha, beta = _stack_eigen(comm.amp)
    Qa = Qa.toarray()
    Qp, pa, _ = _stack_eigen(comm.path)
    Qp = Qp.toarray()
    # projections p, q, r on the amplified space
    q_basis = np.zeros((N, int(np.count_nonzero(np.real(pa) <= 0))), dtype=complex)
    q_basis[n:, :] = Qp[:, np.real(pa) <= 0]
    p_mat = np.zeros((N, N))
    p_mat[:n, :n] = np.eye(n)
    q_mat = q_basis @ dagger(q_basis)
    r_mat = np.eye(N) - p_mat - q_mat
    V = Qa[:, np.real(alpha) <= OMEGA_MINUS]
    sigma, overlap = _disjoiner(V, r_mat, gate, "first-reduction", literal)
    st1["overlap"] = overlap
    st1["sigma_minus_one"] = op_norm(sigma - np.eye(N))
    gate.check("first-reduction:disjoin", overlap, DISJOIN_LIMIT)
    w_dag = sigma @ u_amp @ dagger(sigma)
    v_dag = sigma @ v_amp @ dagger(sigma)
    s_minus = sigma @ V @ dagger(V) @ dagger(sigma)
    st1["s_minus_contained"] = op_norm(r_mat @ s_minus)
    st1["commutators"] = {
        "p_w": comm_norm(p_mat, w_dag), "q_w": comm_norm(q_mat, w_dag),
        "p_v": comm_norm(p_mat, v_dag), "q_v": comm_norm(q_mat, v_dag),
        "p_s": comm_norm(p_mat, s_minus), "q_s": comm_norm(q_mat, s_minus),
    }
    B = np.hstack([np.eye(N)[:, :n], q_basis])
    g, st1["g_defect"] = _polar(dagger(B) @ w_dag @ B, gate, "first-reduction:g")
    h, st1["h_defect"] = _polar(dagger(B) @ v_dag @ B, gate, "first-reduction:h")
    sB = hermitian_part(dagger(B) @ s_minus @ B)
    S_minus = range_basis(sB)
    S_plus = range_basis(np.eye(B.shape[1]) - sB)
    pieces = []
    for basis, center, tag in ((S_minus, 0.0, "g-"), (S_plus, math.pi, "g+")):
        if basis.shape[1] == 0:
            continue
        gg, dg = _polar(dagger(basis) @ g @ basis, gate, f"first-reduction:{tag}")
        hh, dh = _polar(dagger(basis) @ h @ basis, gate, f"first-reduction:{tag}")
        res = _gapped(gg, hh, center, FIRST_GAP_RADIUS, gate, f"first-reduction:{tag}", max_sweeps=max_sweeps)
        st1[f"{tag}_defect"] = max(dg, dh)
        st1[f"{tag}_oracle_dist"] = res.dist
        pieces.append((basis @ res.basis, res.first_eigs, res.second_eigs))
    F = np.hstack([x[0] for x in pieces])
    a = np.concatenate([x[1] for x in pieces])
    b = np.concatenate([x[2] for x in pieces])
    # second reduction, in the coordinates of B (p is the first n of them)
    st2 = stats["second"]
    K = B.shape[1]
    qK = np.diag(np.r_[np.zeros(n), np.ones(K - n)])
    V2 = F[:, np.real(a) > OMEGA_PLUS]
    g_prime = (F * a) @ dagger(F)
    h_prime = (F * b) @ dagger(F)
    tau, overlap2 = _disjoiner(V2, qK, gate, "second-reduction", literal)
    st2["overlap"] = overlap2
    st2["tau_minus_one"] = op_norm(tau - np.eye(K))
    gate.check("second-reduction:disjoin", overlap2, DISJOIN_LIMIT)
    g_dag = tau @ g_prime @ dagger(tau)
    h_dag = tau @ h_prime @ dagger(tau)
    s_plus = tau @ V2 @ dagger(V2) @ dagger(tau)
    st2["s_plus_contained"] = op_norm(qK @ s_plus)
    sp_ = hermitian_part(s_plus[:n, :n])
    Sp = range_basis(sp_)
    Sc = range_basis(np.eye(n) - sp_)
    pieces = []
    for basis, center, tag in ((Sp, math.pi, "s+"), (Sc, 0.0, "p-s+")):
        if basis.shape[1] == 0:
            continue
        gg, dg = _polar(dagger(basis) @ g_dag[:n, :n] @ basis, gate, f"second-reduction:{tag}")
        hh, dh = _polar(dagger(basis) @ h_dag[:n, :n] @ basis, gate, f"second-reduction:{tag}")
        res = _gapped(gg, hh, center, SECOND_GAP_RADIUS, gate, f"second-reduction:{tag}", max_sweeps=max_sweeps)
        st2[f"{tag}_defect"] = max(dg, dh)
        st2[f"{tag}_oracle_dist"] = res.dist
        pieces.append((basis @ res.basis, res.first_eigs, res.second_eigs))
    E = np.hstack([x[0] for x in pieces])
    ea = np.concatenate([x[1] for x in pieces])
    eb = np.concatenate([x[2] for x in pieces])
    return E, ea, eb, stats


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def _default_eps(delta: float, gate: _Gate) -> float:
    eps = delta ** (1.0 / 3.0) if delta > 0 else EPS_CAP
    if eps >= EPS_LIMIT:
        gate.check("epsilon", eps, EPS_LIMIT)
        gate.flags.append(f"eps clamped from {eps:.4f} to {EPS_CAP}")
        eps = EPS_CAP
    return eps


def _finish(u, v, u2, v2, report_kw: dict) -> PipelineReport:
    return PipelineReport(
        distance_u=op_norm(u - u2),
        distance_v=op_norm(v - v2),
        commutator_residual=comm_norm(u2, v2),
        unitarity_u=unitarity_defect(u2),
        unitarity_v=unitarity_defect(v2),
        **report_kw,
    )


def open_gap(
    u,
    v,
    path,
    eps: Optional[float] = None,
    *,
    mode: str = BEST_EFFORT,
    delta: Optional[float] = None,
    route: str = "structured",
    literal_disjoiner: bool = True,
    commute_tol: float = COMMUTE_TOL,
    max_sweeps: int = MAX_SWEEPS,
    sample_density: int = 16,
) -> tuple[np.ndarray, np.ndarray, PipelineReport]:
    """Exactly commuting unitaries near ``(u, v)``, given a path from ``u`` to 1.

    Parameters
    ----------
    u, v : array_like
        Unitary matrices.
    path : UnitaryPath or sequence of ndarray
        Path from ``u`` to the identity along which ``u_t`` almost commutes
        with ``v`` (or its samples at spacing at most ``eps``).
    eps : float, optional
        Rotation parameter.  Defaults to ``delta^{1/3}``, lowered to 0.0999
        (with a flag) when that is not below 1/10.
    mode : {"best-effort", "certified"}
        In certified mode a failed stage hypothesis raises
        :class:`StagePreconditionFailed`; otherwise it is flagged and the
        construction continues.
    delta : float, optional
        Commutator budget of the path; measured when omitted.
    route : {"structured", "dense"}
        Implementation of the two reductions.  ``"dense"`` builds every
        operator on the amplified space and is limited to small sizes.
    literal_disjoiner : bool
        Dense route only: use the two-projection disjoiner (sharpen, then
        intertwine) when its hypothesis holds.  Otherwise the direct
        rotation is used, as in the structured route.

    Returns
    -------
    u_prime, v_prime : ndarray
        Commuting unitaries.
    report : PipelineReport
    """
    start = time.perf_counter()
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    if mode not in (CERTIFIED, BEST_EFFORT):
        raise InvalidInput(f"unknown mode {mode!r}")
    if route not in ("structured", "dense"):
        raise InvalidInput(f"unknown route {route!r}")
    n = u.shape[0]
    flags: list = []
    gate = _Gate(mode, flags)
    base = comm_norm(u, v)
    if base <= commute_tol:
        rep = _finish(u, v, u, v, dict(
            n=n, delta=base, eps=0.0, gamma=0.0, d=0, N=None, mode=mode, route=route,
            n_total=n, flags=flags, stages={}, short_circuit=True,
        ))
        rep.runtime_ms = 1e3 * (time.perf_counter() - start)
        return u.copy(), v.copy(), rep
    if delta is None:
        if isinstance(path, UnitaryPath):
            delta = max_commutator_along(path, v, sample_density)
        else:
            delta = max(comm_norm(x, v) for x in path)
    eps = _default_eps(delta, gate) if eps is None else _check_eps(eps)
    pair = amplify(u, v, path, eps)
    stages: dict = {"amplify": dict(pair.diagnostics, d=pair.d, n_total=pair.n_total)}
    comm = commute_amplified(pair, max_sweeps=max_sweeps, commute_tol=commute_tol, accept_unconverged=mode != CERTIFIED)
    if comm.diagnostics["unconverged_blocks"]:
        flags.append(f"amplified oracle: {comm.diagnostics['unconverged_blocks']} blocks hit the sweep limit")
    stages["commute"] = comm.diagnostics
    if route == "dense":
        if pair.n_total > DENSE_ROUTE_LIMIT:
            raise InvalidInput(f"dense route limited to {DENSE_ROUTE_LIMIT} amplified dimensions, got {pair.n_total}")
        E, ea, eb, st = _dense_route(pair, comm, gate, max_sweeps, literal_disjoiner)
        stages.update(first_reduction=st["first"], second_reduction=st["second"])
        gamma = st["first"]["overlap"]
    else:
        first = _first_reduction_structured(pair, comm, gate, max_sweeps)
        E, ea, eb, st2 = _second_reduction(n, first.F, first.a, first.b, gate, max_sweeps)
        first.stats["commutators"] = None  # the full table needs the amplified matrices
        stages.update(first_reduction=first.stats, second_reduction=st2)
        gamma = first.stats["overlap"]
    u2 = (E * ea) @ dagger(E)
    v2 = (E * eb) @ dagger(E)
    rep = _finish(u, v, u2, v2, dict(
        n=n, delta=max(delta, pair.delta), eps=eps, gamma=gamma, d=pair.d, N=None, mode=mode,
        route=route, n_total=pair.n_total, flags=flags, stages=stages,
    ))
    rep.runtime_ms = 1e3 * (time.perf_counter() - start)
    return u2, v2, rep


def approximate(
    u,
    v,
    *,
    path=None,
    eps: Optional[float] = None,
    N: Optional[int] = None,
    mode: str = BEST_EFFORT,
    route: str = "structured",
    commute_tol: float = COMMUTE_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray, PipelineReport]:
    """Full pipeline: homotopy of ``v`` to 1, then gap opening with ``v`` as the gapped operand.

    When ``path`` is given it must run from ``v`` to 1 and stay almost
    commuting with ``u``.  The report's distances refer to ``u`` and ``v``
    in the caller's order.
    """
    start = time.perf_counter()
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    extra: dict = {}
    if comm_norm(u, v) <= commute_tol:
        v2, u2, rep = open_gap(v, u, [v, np.eye(u.shape[0])], mode=mode, commute_tol=commute_tol)
    else:
        if path is None:
            path, cert = build_homotopy(u, v, N, mode=mode)
            N = cert.N
            extra["homotopy"] = {
                "N": cert.N,
                "max_commutator_sampled": cert.max_commutator_sampled,
                "isospec": cert.diagnostics.get("isospec"),
                "length": path.total_parameter_length,
            }
        v2, u2, rep = open_gap(v, u, path, eps, mode=mode, route=route, commute_tol=commute_tol, max_sweeps=max_sweeps)
    rep.distance_u, rep.distance_v = rep.distance_v, rep.distance_u
    rep.unitarity_u, rep.unitarity_v = rep.unitarity_v, rep.unitarity_u
    rep.N = N
    rep.stages.update(extra)
    rep.stages["gapped_operand"] = "v"
    rep.runtime_ms = 1e3 * (time.perf_counter() - start)
    return u2, v2, rep
