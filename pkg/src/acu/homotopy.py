"""Paths of unitaries from ``v`` to the identity that stay almost commuting with ``u``.

The construction, when ``isospec(u, v) = 0``:

1. Cut the circle into ``2N`` half-open arcs and round ``u`` to ``u_tilde``,
   constant on each spectral block ``q_j = 1_{I_j}(u)``.
2. Transport the blocks by ``v``: ``p_j = v q_j v*``.  Pair them up into the
   cyclic families ``Q_k = q_{2k} + q_{2k+1}`` and ``P_k = p_{2k-1} + p_{2k}``.
3. Refine both families (:mod:`acu.quantbeek`) into halves ``p'_j, q'_j``
   and a unitary ``W`` near 1 with ``W q'_j W* = p'_j``.
4. Rotate ``q_j`` onto ``q'_j`` inside each ``Q_k`` (unitary ``z``), apply
   ``W``, and rotate ``p'_j`` onto ``p_j`` inside each ``P_k`` (unitary ``y``).
   With ``Gamma = y W z`` the unitary ``v_3 = Gamma* v`` commutes with
   ``u_tilde``.
5. Untwist ``v_3`` to 1 inside each eigenspace of ``u_tilde``.

Each step is a geodesic ``t -> exp(i t G) base``, stored as a
:class:`Segment`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInput, ObstructionNonzero, RankMismatch, StageFailure
from .invariants import BEST_EFFORT, CERTIFIED, isospec
from .linalg import (
    TWO_PI,
    angular_distance,
    check_unitary,
    comm_norm,
    dagger,
    eig_unitary,
    hermitian_part,
    op_norm,
    principal_log_unitary,
    unitarity_defect,
)
from .quantbeek import EPS_LIMIT, CyclicFamily, measure_family_defect, refine_intertwined

COMMUTE_TOL = 1e-12
ENDPOINT_TOL = 1e-9


@dataclass
class Segment:
    """Geodesic piece ``t -> exp(i t generator) @ base`` for ``t`` in ``[0, 1]``.

    ``kind`` is ``"exponential"`` or ``"block-exponential"``; the latter marks
    a generator assembled blockwise inside the eigenspaces of another matrix
    (it is still applied as one exponential).
    """

    base: np.ndarray
    generator: np.ndarray
    label: str = ""
    kind: str = "exponential"
    _eig: Optional[tuple] = field(default=None, repr=False)

    def _spectral(self):
        if self._eig is None:
            w, x = np.linalg.eigh(hermitian_part(self.generator))
            self._eig = (w, x, dagger(x) @ self.base)
        return self._eig

    @property
    def generator_norm(self) -> float:
        w, _, _ = self._spectral()
        return float(np.max(np.abs(w))) if w.size else 0.0

    def at(self, t: float) -> np.ndarray:
        w, x, xb = self._spectral()
        return (x * np.exp(1j * t * w)) @ xb

    @property
    def start(self) -> np.ndarray:
        return self.base

    @property
    def end(self) -> np.ndarray:
        return self.at(1.0)


@dataclass
class UnitaryPath:
    segments: list
    stage_boundaries: list = field(default_factory=list)

    @property
    def total_parameter_length(self) -> float:
        """Sum of generator norms, an upper bound for the path length."""
        return float(sum(s.generator_norm for s in self.segments))

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].start

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].end

    @property
    def n(self) -> int:
        return self.segments[0].base.shape[0]

    def at(self, s: float) -> np.ndarray:
        """Point at normalised parameter ``s`` in ``[0, 1]``; segments get equal parameter length."""
        k = len(self.segments)
        s = min(max(s, 0.0), 1.0)
        idx = min(int(s * k), k - 1)
        return self.segments[idx].at(s * k - idx)

    def continuity_defect(self) -> float:
        gaps = [op_norm(a.end - b.start) for a, b in zip(self.segments, self.segments[1:])]
        return max(gaps, default=0.0)


@dataclass
class HomotopyCertificate:
    N: int
    delta: float
    max_commutator_sampled: float
    sample_density: int
    tilde_u_error: float
    mode: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "delta": self.delta,
            "max_commutator_sampled": self.max_commutator_sampled,
            "sample_density": self.sample_density,
            "tilde_u_error": self.tilde_u_error,
            "mode": self.mode,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_path(path: UnitaryPath, density: int) -> list:
    """``density + 1`` equally spaced points on every segment, endpoints included.

    Joints appear twice (end of one segment, start of the next).  Two
    consecutive points on a segment with generator ``G`` differ by at most
    ``||G|| / density``.
    """
    if density < 1:
        raise InvalidInput("density must be at least 1")
    out = []
    for seg in path.segments:
        for t in np.linspace(0.0, 1.0, density + 1):
            out.append(seg.at(float(t)))
    return out


def segment_densities(path: UnitaryPath, step: float) -> list:
    """Smallest per-segment densities with consecutive samples at most ``step`` apart.

    On one segment ``||e^{iaG} - e^{ibG}|| = 2 sin(|a-b| ||G|| / 2)`` (for
    ``|a-b| ||G|| <= pi``), so ``ceil(||G|| / (2 arcsin(step/2)))`` points suffice.
    """
    if not (0 < step < 2):
        raise InvalidInput("step must lie in (0, 2)")
    angle = 2.0 * math.asin(step / 2.0)
    return [max(1, math.ceil(seg.generator_norm / angle - 1e-12)) for seg in path.segments]


def discretize_path(path: UnitaryPath, step: float) -> list:
    """Points ``u_0 = start, ..., u_d = end`` with ``||u_{j+1} - u_j|| <= step``; joints appear once."""
    out = [path.segments[0].start]
    for seg, dens in zip(path.segments, segment_densities(path, step)):
        if seg.generator_norm == 0.0:
            continue
        for t in np.linspace(0.0, 1.0, dens + 1)[1:]:
            out.append(seg.at(float(t)))
    return out


def max_commutator_along(path: UnitaryPath, u: np.ndarray, density: int) -> float:
    return max(comm_norm(x, u) for x in sample_path(path, density))


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def _circle_grid_offset(angles: np.ndarray, N: int, candidates: int = 64) -> float:
    """Rotation of the ``2N``-arc grid maximising the distance from grid points to the spectrum."""
    width = math.pi / N
    grid = np.arange(2 * N) * width
    best_phi, best_margin = 0.0, -1.0
    for phi in np.arange(candidates) * (width / candidates):
        if angles.size == 0:
            return 0.0
        margin = float(np.min(angular_distance(angles[:, None], (grid + phi)[None, :])))
        if margin > best_margin + 1e-15:
            best_phi, best_margin = float(phi), margin
    return best_phi


def _block_bases(dec, N: int, phi: float) -> list:
    """Orthonormal bases of ``ran q_j`` for the arcs ``[phi + j pi/N, phi + (j+1) pi/N)``."""
    width = math.pi / N
    idx = np.floor(np.mod(dec.angles - phi, TWO_PI) / width).astype(int)
    idx = np.clip(idx, 0, 2 * N - 1)
    n = dec.n
    bases = []
    for j in range(2 * N):
        chosen = [b for b, k in zip(dec.bases, idx) if k == j]
        bases.append(np.hstack(chosen) if chosen else np.zeros((n, 0), complex))
    return bases


def _proj(b: np.ndarray) -> np.ndarray:
    return b @ dagger(b)


def direct_rotation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unitary rotating ``ran a`` onto ``ran b`` through the principal angles.

    ``a`` and ``b`` are isometries with the same number of columns.  From the
    SVD ``b* a = X diag(cos theta) Y*`` take ``f_i = a y_i`` and
    ``g_i = b x_i``; the result rotates each plane ``span(f_i, g_i)`` by
    ``theta_i`` (so ``f_i -> g_i``) and is the identity on the orthogonal
    complement of those planes.  All eigenvalues are ``exp(+-i theta_i)``
    with ``theta_i <= pi/2``, so the generator has norm at most pi/2, even
    when some directions of the two subspaces are orthogonal.

    Raises
    ------
    RankMismatch
        If the subspaces have different dimensions.
    """
    n = a.shape[0]
    if a.shape[1] != b.shape[1]:
        raise RankMismatch(f"subspaces of dimensions {a.shape[1]} and {b.shape[1]} cannot be matched")
    out = np.eye(n, dtype=complex)
    if a.shape[1] == 0:
        return out
    x, c, yh = np.linalg.svd(dagger(b) @ a)
    c = np.clip(c, 0.0, 1.0)
    f = a @ dagger(yh)
    g = b @ x
    sin = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    moving = sin > 1e-14
    if not np.any(moving):
        return out
    f, g, c, sin = f[:, moving], g[:, moving], c[moving], sin[moving]
    f_perp = (g - f * c) / sin
    # plane rotation: f -> c f + s f_perp, f_perp -> -s f + c f_perp
    out += (f * (c - 1.0)) @ dagger(f) + (f_perp * (c - 1.0)) @ dagger(f_perp)
    out += (f_perp * sin) @ dagger(f) - (f * sin) @ dagger(f_perp)
    return out


def rotation_onto(src: list, dst: list) -> np.ndarray:
    """Product of the direct rotations ``ran src[i] -> ran dst[i]`` (their supports must be disjoint)."""
    n = src[0].shape[0]
    out = np.eye(n, dtype=complex)
    for a, b in zip(src, dst):
        out += direct_rotation(a, b) - np.eye(n)
    return out


def _range_basis_of(p: np.ndarray) -> np.ndarray:
    w, x = np.linalg.eigh(hermitian_part(p))
    return x[:, w > 0.5]


def blockwise_log(x: np.ndarray, bases: list) -> np.ndarray:
    """Hermitian ``H`` with ``exp(iH) = x`` built inside each block of ``bases`` (x must be block diagonal)."""
    n = x.shape[0]
    h = np.zeros((n, n), dtype=complex)
    for b in bases:
        if b.shape[1] == 0:
            continue
        blk = dagger(b) @ x @ b
        h += b @ principal_log_unitary(blk) @ dagger(b)
    return hermitian_part(h)


def default_N(delta: float) -> int:
    if delta <= 0:
        return 2
    return max(2, int(round(delta ** (-0.4))))


def _families(u_dec, v, N: int, phi: float):
    qb = _block_bases(u_dec, N, phi)
    q = [_proj(b) for b in qb]
    p = [v @ x @ dagger(v) for x in q]
    Q = CyclicFamily([q[2 * k] + q[2 * k + 1] for k in range(N)])
    P = CyclicFamily([p[(2 * k - 1) % (2 * N)] + p[2 * k] for k in range(N)])
    return qb, q, p, P, Q


def arc_families(u, v, N: int) -> tuple[CyclicFamily, CyclicFamily]:
    """The two intertwined families used by :func:`build_homotopy` for ``N`` arc pairs.

    ``Q_k`` is the spectral projection of ``u`` on two adjacent grid arcs and
    ``P_k`` is ``v`` times the half-shifted pair, conjugated by ``v``.
    """
    u = check_unitary(u, 1e-8, "u")
    dec = eig_unitary(u)
    phi = _circle_grid_offset(dec.angles, N)
    _, _, _, P, Q = _families(dec, np.asarray(v, dtype=complex), N, phi)
    return P, Q


# ---------------------------------------------------------------------------
# main entry point
# ---------------------------------------------------------------------------

def build_homotopy(
    u,
    v,
    N: Optional[int] = None,
    *,
    sample_density: int = 32,
    mode: str = BEST_EFFORT,
    c1: float = 10.0,
    check_invariant: bool = True,
) -> tuple[UnitaryPath, HomotopyCertificate]:
    """Path from ``v`` to 1 along which the commutator with ``u`` stays small.

    Parameters
    ----------
    u, v : array_like
        Unitary matrices with vanishing isospectral invariant.
    N : int, optional
        Number of arc pairs.  Defaults to ``round(||[u,v]||^{-2/5})`` (at
        least 2), lowered until the family defect is below 1/200.
    sample_density : int
        Points per segment used to measure the commutator along the path.
    mode : {"certified", "best-effort"}
        Passed to the invariant check.  A path built from a family whose
        defect is at least 1/200 is always labelled best-effort.

    Returns
    -------
    path : UnitaryPath
    certificate : HomotopyCertificate

    Raises
    ------
    ObstructionNonzero
        If the isospectral invariant is not 0.
    RankMismatch
        If refined and original blocks have different ranks.
    """
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    n = u.shape[0]
    delta = comm_norm(u, v)
    diag: dict = {}
    run_mode = mode
    if check_invariant:
        value, rep = isospec(u, v, mode=mode, c1=c1)
        diag["isospec"] = value
        diag["isospec_mode"] = rep.mode
        if rep.mode != CERTIFIED:
            run_mode = BEST_EFFORT
        if value != 0:
            raise ObstructionNonzero(value)

    u_dec = eig_unitary(u)

    if delta <= COMMUTE_TOL:
        # v preserves every eigenspace of u: untwist it blockwise
        h = blockwise_log(v, u_dec.bases)
        seg = Segment(v, -h, "untwist", "block-exponential")
        path = UnitaryPath([seg], [0.0, 1.0])
        cert = HomotopyCertificate(0, delta, max_commutator_along(path, u, sample_density), sample_density, 0.0, run_mode, {"short_circuit": True, **diag})
        return path, cert

    # choose N: start from the default and lower it until the families are admissible
    candidates = [N] if N is not None else list(range(default_N(delta), 1, -1))
    chosen = None
    for cand in candidates:
        phi = _circle_grid_offset(u_dec.angles, cand)
        qb, q, p, P, Q = _families(u_dec, v, cand, phi)
        eps = measure_family_defect(P, Q)
        chosen = (cand, phi, qb, q, p, P, Q, eps)
        if eps < EPS_LIMIT:
            break
    N, phi, qb, q, p, P, Q, eps = chosen
    if eps >= EPS_LIMIT:
        run_mode = BEST_EFFORT
        diag["note"] = "family defect >= 1/200; refinement run without its hypothesis"
    diag["family_defect"] = eps
    diag["grid_offset"] = phi

    lam = np.exp(1j * (phi + math.pi * np.arange(2 * N) / N))
    u_tilde = sum(l * x for l, x in zip(lam, q))
    tilde_err = op_norm(u_tilde - u)

    try:
        ref = refine_intertwined(P, Q, check=False)
    except StageFailure:
        raise
    diag["quantbeek_epsilon"] = ref.epsilon_measured
    diag["quantbeek"] = {k: v_ for k, v_ in ref.diagnostics.items() if k != "intermediate"}
    diag["W_minus_one"] = op_norm(ref.W - np.eye(n))

    for j in range(2 * N):
        rq = int(round(np.real(np.trace(ref.q_prime[j]))))
        rp = int(round(np.real(np.trace(ref.p_prime[j]))))
        if rq != qb[j].shape[1] or rp != qb[j].shape[1]:
            raise RankMismatch(f"block {j}: rank q = {qb[j].shape[1]}, rank q' = {rq}, rank p' = {rp}")

    # z: inside each Q_k, q_{2k} -> q'_{2k} and q_{2k+1} -> q'_{2k+1}
    # (each rotation lives in span(q_{2k}, q'_{2k}) inside ran Q_k, so the complement
    # q_{2k+1} is carried onto q'_{2k+1} automatically)
    qpb = [_range_basis_of(x) for x in ref.q_prime]
    z = rotation_onto([qb[2 * k] for k in range(N)], [qpb[2 * k] for k in range(N)])
    # y: inside each P_k, p'_{2k} -> p_{2k} (and so p'_{2k-1} -> p_{2k-1})
    pb = [v @ b for b in qb]
    ppb = [_range_basis_of(x) for x in ref.p_prime]
    y = rotation_onto([ppb[2 * k] for k in range(N)], [pb[2 * k] for k in range(N)])
    w = ref.W
    diag["z_unitarity"] = unitarity_defect(z)
    diag["y_unitarity"] = unitarity_defect(y)
    diag["z_matching"] = max(op_norm(z @ x @ dagger(z) - xp) for x, xp in zip(q, ref.q_prime))
    diag["y_matching"] = max(op_norm(y @ xp @ dagger(y) - x) for x, xp in zip(p, ref.p_prime))

    h = principal_log_unitary(z)
    L = principal_log_unitary(w)
    g = principal_log_unitary(y)
    wz = w @ z
    gamma3 = y @ wz
    v3 = dagger(gamma3) @ v
    H = blockwise_log(v3, qb)

    segs = [
        Segment(v, -h, "rotate-Q"),
        Segment(dagger(z) @ v, -(dagger(z) @ L @ z), "intertwine"),
        Segment(dagger(wz) @ v, -(dagger(wz) @ g @ wz), "rotate-P"),
        Segment(v3, -H, "untwist", "block-exponential"),
    ]
    path = UnitaryPath(segs, [0.0, 0.25, 0.5, 0.75, 1.0])

    diag.update(
        generator_norms=[s.generator_norm for s in segs],
        z_aux=op_norm(z @ u_tilde @ dagger(z) - u_tilde),
        y_aux=op_norm(y @ u_tilde @ dagger(y) - u_tilde),
        aux_bound=8 * math.pi / N,
        endpoint_gamma3=op_norm(gamma3 @ u_tilde @ dagger(gamma3) - v @ u_tilde @ dagger(v)),
        v3_commutator=comm_norm(v3, u_tilde),
        v3_block_leak=op_norm(v3 - sum(x @ v3 @ x for x in q)),
        start_error=op_norm(path.start - v),
        end_error=op_norm(path.end - np.eye(n)),
        continuity=path.continuity_defect(),
        path_length_bound=path.total_parameter_length,
    )
    mx = max_commutator_along(path, u, sample_density)
    cert = HomotopyCertificate(N, delta, mx, sample_density, tilde_err, run_mode, diag)
    return path, cert
