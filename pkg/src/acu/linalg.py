"""Dense complex matrix kernel.

Norms, polar factors, the spectral calculus of unitary matrices on arcs of
the unit circle, and the two elementary corrections used everywhere else:
pushing an almost unitary matrix onto the unitary group, and compressing a
unitary to the range of an almost commuting projection.

Functions
---------
op_norm, commutator, polar_unitary, nearest_unitary, eig_unitary,
spectral_projection, nudge_arc, apply_circle_function, range_basis,
compress_unitary, direct_sum, embed, principal_log_unitary
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import (
    BoundaryEigenvalue,
    DimensionCap,
    InvalidInput,
    NotAlmostUnitary,
    NumericalFailure,
    SingularInput,
)

TWO_PI = 2.0 * math.pi

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12
PROJ_TOL = 1e-10
CLUSTER_TOL = 1e-8
BOUNDARY_TOL = 1e-9
SINGULAR_FLOOR = 1e-12
DEFAULT_MAX_DIM = 8192


def max_dim() -> int:
    """Dimension cap, read from ``ACU_MAX_DIM`` on every call."""
    raw = os.environ.get("ACU_MAX_DIM")
    if raw is None or raw == "":
        return DEFAULT_MAX_DIM
    try:
        return int(raw)
    except ValueError as exc:
        raise InvalidInput(f"ACU_MAX_DIM must be an integer, got {raw!r}") from exc


def check_dimension(n: int) -> None:
    cap = max_dim()
    if n > cap:
        raise DimensionCap(n, cap)


def as_square(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a complex square array, rejecting bad shapes and non-finite data."""
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {arr.shape}")
    arr = arr.astype(complex, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    return arr


def _same_size(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InvalidInput(f"size mismatch: {a.shape} vs {b.shape}")


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


# ---------------------------------------------------------------------------
# norms and residuals
# ---------------------------------------------------------------------------

def op_norm(a) -> float:
    """Largest singular value.

    Parameters
    ----------
    a : array_like, shape (n, m)
        Any complex matrix; empty matrices have norm 0.

    Returns
    -------
    float
    """
    arr = np.asarray(a)
    if arr.size == 0:
        return 0.0
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("matrix has non-finite entries")
    if arr.ndim == 1:
        return float(np.linalg.norm(arr))
    return float(np.linalg.svd(arr, compute_uv=False)[0])


def large_op_norm(a, *, dense_limit: int = 600, tol: float = 1e-12) -> float:
    """Largest singular value of a big dense, sparse or linear-operator argument.

    Small dense matrices go through :func:`op_norm`; everything else uses a
    Lanczos iteration (``scipy.sparse.linalg.svds`` with one singular value).
    """
    if isinstance(a, np.ndarray) and (a.size == 0 or min(a.shape) <= dense_limit):
        return op_norm(a)
    shape = a.shape
    if min(shape) <= dense_limit:
        dense = a.toarray() if hasattr(a, "toarray") else a @ np.eye(shape[1])
        return op_norm(dense)
    val = spla.svds(a, k=1, return_singular_vectors=False, tol=tol, random_state=0)
    return float(val[0])


def commutator(a, b) -> np.ndarray:
    """``ab - ba``."""
    a = np.asarray(a)
    b = np.asarray(b)
    _same_size(a, b)
    return a @ b - b @ a


def comm_norm(a, b) -> float:
    return op_norm(commutator(a, b))


def unitarity_defect(u) -> float:
    u = np.asarray(u)
    if u.size == 0:
        return 0.0
    return op_norm(dagger(u) @ u - np.eye(u.shape[0]))


def hermitian_defect(t) -> float:
    t = np.asarray(t)
    return op_norm(t - dagger(t))


def idempotency_defect(p) -> float:
    p = np.asarray(p)
    return op_norm(p @ p - p)


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    return unitarity_defect(u) <= tol


def check_unitary(u, tol: float = UNITARY_TOL, name: str = "u") -> np.ndarray:
    arr = as_square(u, name)
    defect = unitarity_defect(arr)
    if defect > tol:
        raise InvalidInput(f"{name} is not unitary: ||u*u - 1|| = {defect:.3e}")
    return arr


def check_hermitian(t, tol: float = HERMITIAN_TOL, name: str = "t") -> np.ndarray:
    arr = as_square(t, name)
    scale = max(1.0, op_norm(arr))
    defect = hermitian_defect(arr)
    if defect > tol * scale:
        raise InvalidInput(f"{name} is not Hermitian: ||t - t*|| = {defect:.3e}")
    return arr


def check_projection(p, tol: float = PROJ_TOL, name: str = "p") -> np.ndarray:
    arr = check_hermitian(p, max(tol, HERMITIAN_TOL), name)
    defect = idempotency_defect(arr)
    if defect > tol:
        raise InvalidInput(f"{name} is not a projection: ||p^2 - p|| = {defect:.3e}")
    tr = float(np.real(np.trace(arr)))
    if abs(tr - round(tr)) > 1e-8:
        raise InvalidInput(f"{name} has non-integer trace {tr}")
    return arr


def projection_rank(p) -> int:
    return int(round(float(np.real(np.trace(p)))))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


# ---------------------------------------------------------------------------
# polar factor and unitary corrections
# ---------------------------------------------------------------------------

def polar_unitary(a, singular_floor: float = SINGULAR_FLOOR) -> np.ndarray:
    """Unitary factor of the polar decomposition ``a = U |a|``.

    Computed from the SVD ``a = X S Y*`` as ``U = X Y*``, which equals
    ``a (a*a)^{-1/2}`` for invertible ``a``.

    Raises
    ------
    SingularInput
        If the smallest singular value is at or below ``singular_floor``.
    """
    arr = as_square(a, "a")
    if arr.shape[0] == 0:
        return arr.copy()
    x, s, yh = np.linalg.svd(arr)
    smin = float(s[-1])
    if smin <= singular_floor:
        raise SingularInput(f"smallest singular value {smin:.3e} below floor", smin)
    return x @ yh


def nearest_unitary(w, *, check: bool = True) -> tuple[np.ndarray, float]:
    """Correct an almost unitary matrix.

    Parameters
    ----------
    w : array_like, shape (n, n)
        Matrix with ``rho = ||w*w - 1|| < 1/5``.
    check : bool
        Enforce the ``rho < 1/5`` hypothesis.

    Returns
    -------
    u : ndarray
        ``w |w*w|^{-1/2}``, the polar factor.
    defect : float
        ``||w - u||``; never above ``5 rho`` under the hypothesis.
    """
    arr = as_square(w, "w")
    if arr.shape[0] == 0:
        return arr.copy(), 0.0
    rho = unitarity_defect(arr)
    if check and rho >= 0.2:
        raise NotAlmostUnitary(f"||w*w - 1|| = {rho:.3e} >= 1/5", rho)
    u = polar_unitary(arr)
    return u, op_norm(arr - u)


# ---------------------------------------------------------------------------
# arcs and spectral calculus
# ---------------------------------------------------------------------------

def wrap_angle(theta):
    """Map angles into ``[0, 2pi)``."""
    out = np.mod(theta, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def angular_distance(a, b):
    """Distance along the circle between angles ``a`` and ``b``."""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), TWO_PI))
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class Arc:
    """Counterclockwise arc ``{e^{i(start + s)} : 0 <= s <= length}`` of the unit circle.

    ``start_closed`` / ``end_closed`` decide whether the endpoints belong to
    the arc.  A length of ``2pi`` is the whole circle.
    """

    start: float
    length: float
    start_closed: bool = True
    end_closed: bool = True

    def __post_init__(self):
        if not (self.length > 0.0) or self.length > TWO_PI + 1e-15:
            raise InvalidInput(f"arc length must lie in (0, 2pi], got {self.length}")
        object.__setattr__(self, "start", float(wrap_angle(self.start)))
        object.__setattr__(self, "length", float(min(self.length, TWO_PI)))

    @classmethod
    def between(cls, a: float, b: float, **flags) -> "Arc":
        """Arc running counterclockwise from angle ``a`` to angle ``b``."""
        length = float(np.mod(b - a, TWO_PI))
        if length == 0.0:
            length = TWO_PI
        return cls(a, length, **flags)

    @classmethod
    def full(cls) -> "Arc":
        return cls(0.0, TWO_PI)

    @property
    def end(self) -> float:
        return float(wrap_angle(self.start + self.length))

    @property
    def is_full(self) -> bool:
        return self.length >= TWO_PI

    @property
    def midpoint(self) -> float:
        return float(wrap_angle(self.start + self.length / 2))

    def boundary(self) -> tuple[float, ...]:
        return () if self.is_full else (self.start, self.end)

    def complement(self) -> "Arc":
        if self.is_full:
            raise InvalidInput("the full circle has an empty complement")
        return Arc(self.end, TWO_PI - self.length, not self.end_closed, not self.start_closed)

    def rotated(self, phi: float) -> "Arc":
        return Arc(self.start + phi, self.length, self.start_closed, self.end_closed)

    def contains(self, theta):
        """Vectorised membership test for angles (radians)."""
        theta = np.asarray(theta, dtype=float)
        if self.is_full:
            return np.ones(theta.shape, dtype=bool)
        rel = np.mod(theta - self.start, TWO_PI)
        inside = (rel > 0.0) & (rel < self.length)
        if self.start_closed:
            inside |= rel == 0.0
        if self.end_closed:
            inside |= rel == self.length
        return inside

    def contains_point(self, z):
        return self.contains(np.angle(z))

    def boundary_distance(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.is_full:
            return np.full(theta.shape, np.inf)
        return np.minimum(angular_distance(theta, self.start), angular_distance(theta, self.end))


@dataclass
class SpectralDecomposition:
    """Eigen-angles of a unitary with orthonormal bases of the eigenspaces.

    ``bases[j]`` has orthonormal columns spanning the eigenspace for the
    eigenvalue ``exp(1j * angles[j])``.  Angles are sorted in ``[0, 2pi)``.
    """

    angles: np.ndarray
    bases: list
    cluster_tol: float = CLUSTER_TOL
    _vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(sum(b.shape[1] for b in self.bases))

    @property
    def ranks(self) -> np.ndarray:
        return np.array([b.shape[1] for b in self.bases], dtype=int)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(1j * self.angles)

    @property
    def projectors(self) -> list:
        return [b @ dagger(b) for b in self.bases]

    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """All eigenvectors as one unitary, with the matching angle per column."""
        cols = np.hstack(self.bases) if self.bases else np.zeros((0, 0), complex)
        angles = np.repeat(self.angles, self.ranks)
        return cols, angles

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        vecs, angles = self.vectors()
        if values is None:
            vals = np.exp(1j * angles)
        else:
            vals = np.repeat(np.asarray(values), self.ranks)
        return (vecs * vals) @ dagger(vecs)


def _cluster_sorted_angles(angles: np.ndarray, tol: float) -> list[list[int]]:
    """Group sorted angles whose consecutive gaps are within ``tol`` (with wrap-around)."""
    if angles.size == 0:
        return []
    groups = [[0]]
    for i in range(1, angles.size):
        if angles[i] - angles[i - 1] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) > 1 and (angles[0] + TWO_PI - angles[-1]) <= tol:
        groups[0] = groups[-1] + groups[0]
        groups.pop()
    return groups


def eig_unitary(u, cluster_tol: float = CLUSTER_TOL, *, reconstruction_tol: float = 1e-8) -> SpectralDecomposition:
    """Spectral decomposition of a unitary matrix.

    A complex Schur form ``u = Z T Z*`` is computed; for a normal matrix
    ``T`` is diagonal up to rounding and the Schur vectors are
    eigenvectors.  Eigenvalues whose angles differ by at most
    ``cluster_tol`` are merged, and each merged eigenspace basis is
    re-orthonormalised with a QR step so that the projectors are exact.

    Raises
    ------
    NumericalFailure
        If the decomposition does not reproduce ``u`` to ``reconstruction_tol``.
    """
    arr = as_square(u, "u")
    n = arr.shape[0]
    if n == 0:
        return SpectralDecomposition(np.zeros(0), [], cluster_tol)
    t, z = sla.schur(arr, output="complex")
    raw = np.diag(t)
    angles = wrap_angle(np.angle(raw))
    order = np.argsort(angles, kind="stable")
    angles = angles[order]
    z = z[:, order]
    groups = _cluster_sorted_angles(angles, cluster_tol)
    out_angles = []
    bases = []
    for g in groups:
        g_angles = angles[g]
        mean = np.angle(np.mean(np.exp(1j * g_angles)))
        cols = z[:, g]
        if len(g) > 1:
            cols, _ = np.linalg.qr(cols)
        out_angles.append(float(wrap_angle(mean)))
        bases.append(cols)
    order = np.argsort(out_angles, kind="stable")
    dec = SpectralDecomposition(np.array(out_angles)[order], [bases[i] for i in order], cluster_tol)
    err = op_norm(dec.reconstruct() - arr)
    if err > reconstruction_tol * max(1.0, math.sqrt(n) / 4):
        raise NumericalFailure(f"eigendecomposition reconstruction error {err:.3e}")
    return dec


def _decomposition(u, decomposition: SpectralDecomposition | None) -> SpectralDecomposition:
    return decomposition if decomposition is not None else eig_unitary(u)


def spectral_projection(
    u,
    arc: Arc,
    *,
    decomposition: SpectralDecomposition | None = None,
    boundary_tol: float = BOUNDARY_TOL,
) -> np.ndarray:
    """Orthogonal projection onto the eigenspaces of ``u`` with eigenvalues in ``arc``.

    Raises
    ------
    BoundaryEigenvalue
        When an eigen-angle lies within ``boundary_tol`` of an endpoint; use
        :func:`nudge_arc` to move the endpoints into spectral gaps.
    """
    dec = _decomposition(u, decomposition)
    return dec_basis_projector(dec, arc, boundary_tol=boundary_tol)


def arc_basis(dec: SpectralDecomposition, arc: Arc, *, boundary_tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Orthonormal basis of ``ran 1_arc(u)`` from a decomposition."""
    if dec.angles.size and not arc.is_full:
        dist = arc.boundary_distance(dec.angles)
        k = int(np.argmin(dist))
        if dist[k] <= boundary_tol:
            raise BoundaryEigenvalue(
                f"eigen-angle {dec.angles[k]:.12f} within {dist[k]:.1e} of an arc endpoint",
                float(dist[k]),
                float(dec.angles[k]),
            )
    mask = arc.contains(dec.angles)
    chosen = [b for b, keep in zip(dec.bases, mask) if keep]
    if not chosen:
        return np.zeros((dec.n, 0), dtype=complex)
    return np.hstack(chosen)


def dec_basis_projector(dec: SpectralDecomposition, arc: Arc, *, boundary_tol: float = BOUNDARY_TOL) -> np.ndarray:
    b = arc_basis(dec, arc, boundary_tol=boundary_tol)
    return b @ dagger(b)


def nudge_arc(arc: Arc, angles: Iterable[float], tol: float = BOUNDARY_TOL) -> Arc:
    """Move endpoints that sit on eigen-angles into the middle of a spectral gap.

    An endpoint closer than ``tol`` to an eigen-angle is moved to the
    midpoint of the larger of the two gaps adjacent to that eigen-angle.
    Endpoints already clear of the spectrum are left alone.
    """
    if arc.is_full:
        return arc
    ang = np.unique(wrap_angle(np.asarray(list(angles), dtype=float)))
    if ang.size == 0:
        return arc

    def fix(b: float) -> float:
        d = angular_distance(ang, b)
        k = int(np.argmin(d))
        if d[k] > tol:
            return b
        if ang.size == 1:
            return float(wrap_angle(ang[0] + math.pi))
        nxt = ang[(k + 1) % ang.size]
        prv = ang[(k - 1) % ang.size]
        gap_up = float(np.mod(nxt - ang[k], TWO_PI))
        gap_down = float(np.mod(ang[k] - prv, TWO_PI))
        if gap_up >= gap_down:
            return float(wrap_angle(ang[k] + gap_up / 2))
        return float(wrap_angle(ang[k] - gap_down / 2))

    a = fix(arc.start)
    b = fix(arc.end)
    return Arc.between(a, b, start_closed=arc.start_closed, end_closed=arc.end_closed)


def apply_circle_function(
    u,
    f: Callable[[np.ndarray], np.ndarray],
    *,
    decomposition: SpectralDecomposition | None = None,
) -> np.ndarray:
    """``f(u) = sum_j f(lambda_j) P_j`` over the spectral decomposition of ``u``.

    ``f`` receives a 1-d array of eigenvalues on the unit circle and must
    return values of the same shape.
    """
    dec = _decomposition(u, decomposition)
    vals = np.asarray(f(dec.eigenvalues), dtype=complex)
    return dec.reconstruct(vals)


def principal_log_unitary(u, *, decomposition: SpectralDecomposition | None = None) -> np.ndarray:
    """Hermitian ``h`` with ``exp(ih) = u`` and spectrum in ``(-pi, pi]``.

    Every eigenspace is treated as one block (the cluster's mean angle), so
    an eigenvalue sitting at ``-1`` maps to ``+pi`` consistently and
    ``||h|| <= pi``; this is the shortest geodesic from 1 to ``u``.
    """
    dec = _decomposition(u, decomposition)
    if dec.angles.size == 0:
        return np.zeros((0, 0), complex)
    ang = np.mod(dec.angles + math.pi, TWO_PI) - math.pi
    ang[ang <= -math.pi] += TWO_PI
    return hermitian_part(dec.reconstruct(ang.astype(complex)))


def widest_gap_center(angles) -> float:
    """Centre of the widest gap between consecutive angles on the circle."""
    ang = np.sort(wrap_angle(np.asarray(angles, dtype=float)))
    if ang.size == 0:
        return math.pi
    if ang.size == 1:
        return float(wrap_angle(ang[0] + math.pi))
    gaps = np.diff(np.concatenate([ang, [ang[0] + TWO_PI]]))
    k = int(np.argmax(gaps))
    return float(wrap_angle(ang[k] + gaps[k] / 2))


def min_distance_to_point(u_or_eigs, z: complex) -> float:
    """``min |lambda - z|`` over the spectrum (eigenvalues may be passed directly)."""
    arr = np.asarray(u_or_eigs)
    eigs = np.linalg.eigvals(arr) if arr.ndim == 2 else arr
    if eigs.size == 0:
        return math.inf
    return float(np.min(np.abs(eigs - z)))


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(i t h)`` for Hermitian ``h`` via its eigendecomposition (exactly unitary up to rounding)."""
    w, x = np.linalg.eigh(hermitian_part(np.asarray(h)))
    return (x * np.exp(1j * t * w)) @ dagger(x)


# ---------------------------------------------------------------------------
# compressions and block placement
# ---------------------------------------------------------------------------

def range_basis(p) -> np.ndarray:
    """Orthonormal basis (as columns) of the range of a projection."""
    arr = as_square(p, "p")
    w, x = np.linalg.eigh(hermitian_part(arr))
    return x[:, w > 0.5]


def compress_unitary(u, p=None, *, basis: np.ndarray | None = None) -> tuple[np.ndarray, float, np.ndarray]:
    """Unitary on ``ran p`` closest to the compression ``(p u p)|_{ran p}``.

    Parameters
    ----------
    u : array_like
        Unitary matrix.
    p : array_like, optional
        Projection; ignored when ``basis`` is given.
    basis : ndarray, optional
        Isometry whose columns span ``ran p``.

    Returns
    -------
    w : ndarray, shape (r, r)
        Unitary in the coordinates of ``basis``.
    defect : float
        ``||B* u B - w||``.
    basis : ndarray, shape (n, r)
        The isometry used.

    Raises
    ------
    NotAlmostUnitary
        With ``measured`` set to ``||[p, u]||`` when the compression is too
        far from unitary.
    """
    arr = as_square(u, "u")
    if basis is None:
        if p is None:
            raise InvalidInput("compress_unitary needs a projection or a basis")
        basis = range_basis(p)
    c = dagger(basis) @ arr @ basis
    try:
        w, defect = nearest_unitary(c)
    except NotAlmostUnitary as exc:
        pmat = basis @ dagger(basis)
        kappa = comm_norm(pmat, arr)
        raise NotAlmostUnitary(f"compression too far from unitary; ||[p,u]|| = {kappa:.3e}", kappa) from exc
    return w, defect, basis


def direct_sum(*blocks) -> np.ndarray:
    """Block-diagonal matrix; zero-size blocks are allowed and vanish."""
    mats = [np.atleast_2d(np.asarray(b, dtype=complex)) if np.asarray(b).size else np.zeros((0, 0), complex) for b in blocks]
    total = sum(m.shape[0] for m in mats)
    check_dimension(total)
    return sla.block_diag(*mats).astype(complex) if mats else np.zeros((0, 0), complex)


def embed(a, total_n: int, offset: int) -> np.ndarray:
    """Place ``a`` on the diagonal of a ``total_n`` zero matrix, starting at ``offset``."""
    arr = np.asarray(a, dtype=complex)
    k = arr.shape[0]
    if offset < 0 or offset + k > total_n:
        raise InvalidInput(f"block of size {k} at offset {offset} does not fit in {total_n}")
    check_dimension(total_n)
    out = np.zeros((total_n, total_n), dtype=complex)
    out[offset:offset + k, offset:offset + k] = arr
    return out


def block_diag_norm(blocks: Sequence[np.ndarray]) -> float:
    return max((op_norm(b) for b in blocks), default=0.0)
