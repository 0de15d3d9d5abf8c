"""Topological obstructions for a pair of almost commuting unitaries.

Two integers are computed.

* The winding number of the closed curve ``t -> det(t uv + (1-t) vu)``,
  ``t`` in ``[0, 1]``, about the origin (defined while ``||[u,v]|| < 2``).
* The isospectral invariant, built from two overlapping arcs ``I`` (first)
  and ``J`` (second, starting inside ``I`` and ending past it):

      isospec(u, v) = rank_+(1_I(v u v*) 1_J(u)) - rank(1_I(u) 1_J(u)).

  With this sign both invariants of the clock/shift pair are -1 and they
  agree on every pair tested (see ``invariants_agree``).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BoundaryEigenvalue,
    CommutatorTooLarge,
    CurveNearZero,
    InvalidInput,
    NotAlmostProjection,
    PreconditionUnsatisfiable,
    Undefined,
)
from .linalg import (
    TWO_PI,
    Arc,
    SpectralDecomposition,
    angular_distance,
    arc_basis,
    check_unitary,
    comm_norm,
    dagger,
    eig_unitary,
    hermitian_part,
    nudge_arc,
)
from .projections import projection_defect, rank_plus

CERTIFIED = "certified"
BEST_EFFORT = "best-effort"
MODES = (CERTIFIED, BEST_EFFORT)

DEFAULT_C1 = 10.0
MAX_SEPARATION = 0.1
OMEGA_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Voiculescu pair
# ---------------------------------------------------------------------------

def voiculescu(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Clock and shift matrices of size ``m``.

    The clock is ``diag(w, w^2, ..., w^m)`` with ``w = exp(2 pi i / m)``; the
    shift has ones on the superdiagonal and in the bottom-left corner.
    """
    if m < 2:
        raise InvalidInput("voiculescu needs m >= 2")
    k = np.arange(1, m + 1)
    clock = np.diag(np.exp(2j * np.pi * k / m))
    # exact values at the real and imaginary axes keep small cases bit-exact
    diag = np.diag(clock).copy()
    for idx, kk in enumerate(k):
        if (4 * kk) % m == 0:
            diag[idx] = [1, 1j, -1, -1j][(4 * kk // m) % 4]
    clock = np.diag(diag)
    shift = np.zeros((m, m), dtype=complex)
    shift[np.arange(m - 1), np.arange(1, m)] = 1.0
    shift[m - 1, 0] = 1.0
    return clock, shift


# ---------------------------------------------------------------------------
# winding number
# ---------------------------------------------------------------------------

def _curve_phase(uv: np.ndarray, vu: np.ndarray, t: float, log_floor: float) -> float:
    sign, logabs = np.linalg.slogdet(t * uv + (1.0 - t) * vu)
    if not np.isfinite(logabs) or logabs < log_floor:
        raise CurveNearZero(f"|det| underflow near t = {t:.6f}")
    return cmath.phase(sign)


def _wrap(x: float) -> float:
    return (x + math.pi) % TWO_PI - math.pi


def winding_number(u, v, *, omega_floor: float = OMEGA_FLOOR, max_depth: int = 50) -> int:
    """Winding number of ``t -> det(t uv + (1-t) vu)`` about 0.

    The phase is tracked by adaptive bisection: an interval is accepted
    once its phase increment is below pi/2 and agrees with the sum of the
    increments over its two halves.  Determinants are taken as
    (sign, log|det|) pairs so large sizes do not overflow.

    Raises
    ------
    CommutatorTooLarge
        If ``||[u, v]|| >= 2``.
    CurveNearZero
        If the geometric mean of the curve's factors drops below
        ``omega_floor`` at a sample point.
    """
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    delta = comm_norm(u, v)
    if delta >= 2.0:
        raise CommutatorTooLarge(f"||[u,v]|| = {delta:.4f} >= 2", delta)
    n = u.shape[0]
    if n == 0:
        return 0
    uv = u @ v
    vu = v @ u
    log_floor = n * math.log(omega_floor)

    phase = lambda t: _curve_phase(uv, vu, t, log_floor)

    grid = np.linspace(0.0, 1.0, 17)
    phases = [phase(t) for t in grid]
    total = 0.0

    def walk(a: float, b: float, pa: float, pb: float, depth: int) -> float:
        m = 0.5 * (a + b)
        pm = phase(m)
        d1 = _wrap(pm - pa)
        d2 = _wrap(pb - pm)
        whole = _wrap(pb - pa)
        if abs(d1) < math.pi / 2 and abs(d2) < math.pi / 2 and abs(_wrap(d1 + d2 - whole)) < 1e-9 and abs(d1 + d2) < math.pi / 2:
            return d1 + d2
        if depth >= max_depth:
            raise CurveNearZero(f"phase not resolved on [{a:.3e}, {b:.3e}]")
        return walk(a, m, pa, pm, depth + 1) + walk(m, b, pm, pb, depth + 1)

    for i in range(len(grid) - 1):
        total += walk(grid[i], grid[i + 1], phases[i], phases[i + 1], 0)
    w = total / TWO_PI
    k = int(round(w))
    if abs(w - k) > 1e-6:
        raise CurveNearZero(f"curve did not close: accumulated {w:.6f} turns")
    return k


# ---------------------------------------------------------------------------
# isospectral invariant
# ---------------------------------------------------------------------------

@dataclass
class InvariantReport:
    winding: Optional[int]
    isospec: Optional[int]
    arcs_used: Optional[tuple]
    delta: float
    mode: str
    notes: list = field(default_factory=list)
    separation: Optional[float] = None
    eigen_margin: Optional[float] = None
    rank_product: Optional[int] = None
    rank_plus_product: Optional[int] = None
    almost_projection_defect: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.arcs_used is not None:
            d["arcs_used"] = [
                {"start": a.start, "length": a.length, "start_closed": a.start_closed, "end_closed": a.end_closed}
                for a in self.arcs_used
            ]
        return d


def arc_pair_separation(I: Arc, J: Arc) -> float:
    """Smallest circular distance between an endpoint of ``I`` and one of ``J``."""
    return float(min(angular_distance(a, b) for a in I.boundary() for b in J.boundary()))


def is_counterclockwise_pair(I: Arc, J: Arc) -> bool:
    """``J`` starts strictly inside ``I`` and ends outside it, so ``I`` leads ``J``."""
    if I.is_full or J.is_full:
        return False
    rel_start = (J.start - I.start) % TWO_PI
    rel_end = (J.end - I.start) % TWO_PI
    return 0 < rel_start < I.length and not (0 <= rel_end <= I.length) and rel_start + J.length > I.length


def overlapping_arcs(start: float, length: float, overlap: float) -> tuple[Arc, Arc]:
    """``I = [a, a+L]`` and ``J = [a+L-s, a+2L-s]``, both closed."""
    I = Arc(start, length)
    J = Arc(start + length - overlap, length)
    return I, J


def _eigen_margin(I: Arc, J: Arc, angles: np.ndarray) -> float:
    pts = np.array(I.boundary() + J.boundary())
    if angles.size == 0:
        return math.inf
    return float(np.min(angular_distance(angles[:, None], pts[None, :])))


def select_arcs(
    angles: np.ndarray,
    delta: float,
    *,
    mode: str = BEST_EFFORT,
    c1: float = DEFAULT_C1,
    candidates: int = 720,
) -> tuple[Arc, Arc, str]:
    """Choose a counterclockwise pair of arcs whose endpoints avoid the spectrum.

    In certified mode the endpoint separation is 1/10 (the largest value
    allowed), which is admissible only if ``c1 * delta <= 1/10``.  The
    best-effort layout uses quarter circles overlapping in an eighth of the
    circle.  Either layout is rotated over ``candidates`` offsets and the one
    maximising the distance from the four endpoints to the spectrum wins.
    """
    if mode not in MODES:
        raise InvalidInput(f"unknown mode {mode!r}")
    if mode == CERTIFIED:
        if c1 * delta > MAX_SEPARATION:
            raise PreconditionUnsatisfiable(
                f"no arcs with {c1} * ||[u,v]|| = {c1 * delta:.3e} <= dist <= 1/10", c1 * delta
            )
        length, overlap = math.pi / 2, MAX_SEPARATION
    else:
        length, overlap = math.pi / 2, math.pi / 4
    offsets = np.arange(candidates) * (TWO_PI / candidates)
    best = None
    for a in offsets:
        I, J = overlapping_arcs(float(a), length, overlap)
        margin = _eigen_margin(I, J, angles)
        if best is None or margin > best[0] + 1e-15:
            best = (margin, I, J)
    margin, I, J = best
    if margin <= 1e-9:
        I = nudge_arc(I, angles)
        J = nudge_arc(J, angles)
    return I, J, mode


def isospec(
    u,
    v,
    arcs: Optional[tuple[Arc, Arc]] = None,
    *,
    mode: str = BEST_EFFORT,
    c1: float = DEFAULT_C1,
    decomposition: SpectralDecomposition | None = None,
) -> tuple[int, InvariantReport]:
    """Isospectral invariant with the arcs used and the admissibility status.

    Parameters
    ----------
    u, v : array_like
        Unitary matrices of equal size.
    arcs : (Arc, Arc), optional
        Counterclockwise pair ``(I, J)``; selected automatically if omitted.
    mode : {"certified", "best-effort"}
        Certified requires ``1/10 >= dist(dI, dJ) >= c1 ||[u,v]||``.
    c1 : float
        Constant in the admissibility condition.

    Returns
    -------
    value : int
    report : InvariantReport
        ``winding`` is left as ``None``; see :func:`invariant_report`.

    Raises
    ------
    PreconditionUnsatisfiable
        Certified mode without admissible arcs.
    NotAlmostProjection
        If ``1_I(vuv*) 1_J(u)`` is not an almost projection.
    """
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    if mode not in MODES:
        raise InvalidInput(f"unknown mode {mode!r}")
    delta = comm_norm(u, v)
    dec = decomposition if decomposition is not None else eig_unitary(u)
    notes = []
    if arcs is None:
        I, J, used_mode = select_arcs(dec.angles, delta, mode=mode, c1=c1)
    else:
        I, J = arcs
        if not is_counterclockwise_pair(I, J):
            raise InvalidInput("arcs must be a counterclockwise oriented pair (I leading J)")
        sep = arc_pair_separation(I, J)
        ok = MAX_SEPARATION >= sep >= c1 * delta
        if mode == CERTIFIED and not ok:
            raise PreconditionUnsatisfiable(
                f"supplied arcs violate 1/10 >= {sep:.3e} >= {c1 * delta:.3e}", sep
            )
        used_mode = CERTIFIED if ok else BEST_EFFORT
    sep = arc_pair_separation(I, J)
    if used_mode == BEST_EFFORT:
        notes.append("interval condition relaxed: endpoint separation not tied to c1*||[u,v]||")

    bi = arc_basis(dec, I)  # raises BoundaryEigenvalue if an endpoint touches the spectrum
    bj = arc_basis(dec, J)
    pi_u = bi @ dagger(bi)
    pj_u = bj @ dagger(bj)
    # u commutes with its own spectral projections: the rank of the product is the count in I n J
    in_both = I.contains(dec.angles) & J.contains(dec.angles)
    rank_prod = int(np.sum(dec.ranks[in_both]))
    prod = (v @ pi_u @ dagger(v)) @ pj_u
    t0 = hermitian_part(prod)
    defect = projection_defect(t0)
    rp = rank_plus(t0)  # raises NotAlmostProjection for defect >= 1/10
    value = rp - rank_prod
    report = InvariantReport(
        winding=None,
        isospec=int(value),
        arcs_used=(I, J),
        delta=float(delta),
        mode=used_mode,
        notes=notes,
        separation=sep,
        eigen_margin=_eigen_margin(I, J, dec.angles),
        rank_product=rank_prod,
        rank_plus_product=rp,
        almost_projection_defect=defect,
    )
    return int(value), report


def invariant_report(u, v, *, mode: str = BEST_EFFORT, c1: float = DEFAULT_C1) -> InvariantReport:
    """Both invariants; an invariant that is undefined is reported as ``None`` with a note."""
    u = check_unitary(u, 1e-8, "u")
    v = check_unitary(v, 1e-8, "v")
    delta = comm_norm(u, v)
    try:
        _, report = isospec(u, v, mode=mode, c1=c1)
    except (PreconditionUnsatisfiable, NotAlmostProjection, BoundaryEigenvalue) as exc:
        if mode == CERTIFIED:
            raise
        report = InvariantReport(None, None, None, float(delta), mode, [f"isospec undefined: {exc}"])
    try:
        report.winding = winding_number(u, v)
    except (CommutatorTooLarge, CurveNearZero) as exc:
        report.notes.append(f"winding undefined: {exc}")
    return report


def invariants_agree(u, v, *, mode: str = BEST_EFFORT, c1: float = DEFAULT_C1) -> tuple[bool, InvariantReport]:
    """Compare the two invariants under the module's sign convention.

    Raises
    ------
    Undefined
        If either invariant cannot be computed.
    """
    report = invariant_report(u, v, mode=mode, c1=c1)
    if report.winding is None or report.isospec is None:
        raise Undefined("; ".join(report.notes) or "invariant undefined")
    return report.winding == report.isospec, report
