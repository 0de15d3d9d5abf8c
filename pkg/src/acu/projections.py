"""Almost projections and pairs of projections.

Sharpening a Hermitian matrix whose spectrum clusters at 0 and 1 into an
exact projection, counting its "positive rank", conjugating one projection
onto a nearby one with the Kato intertwiner, and rotating a projection away
from an almost orthogonal one.
"""

from __future__ import annotations

import numpy as np

from .errors import NotAlmostOrthogonal, NotAlmostProjection, ProjectionsTooFar
from .linalg import (
    as_square,
    dagger,
    hermitian_part,
    op_norm,
    polar_unitary,
)

SHARPEN_LIMIT = 0.1
DISJOIN_LIMIT = 0.01


def projection_defect(t0) -> float:
    """``||t0^2 - t0||``."""
    t0 = np.asarray(t0)
    return op_norm(t0 @ t0 - t0)


def _checked(t0, limit: float = SHARPEN_LIMIT) -> tuple[np.ndarray, float]:
    arr = hermitian_part(as_square(t0, "t0"))
    defect = projection_defect(arr)
    if defect >= limit:
        raise NotAlmostProjection(f"||t0^2 - t0|| = {defect:.3e} >= {limit}", defect)
    return arr, defect


def sharpen_projection(t0, *, check: bool = True) -> tuple[np.ndarray, float]:
    """Exact projection closest in spirit to an almost projection.

    The result is the spectral projection of ``t0`` onto its eigenvalues
    above 1/2.

    Parameters
    ----------
    t0 : array_like
        Hermitian with ``||t0^2 - t0|| < 1/10``.
    check : bool
        Enforce the defect bound.

    Returns
    -------
    t : ndarray
        Orthogonal projection.
    dist : float
        ``||t - t0||``, at most four times the defect.
    """
    if check:
        arr, _ = _checked(t0)
    else:
        arr = hermitian_part(as_square(t0, "t0"))
    w, x = np.linalg.eigh(arr)
    keep = x[:, w > 0.5]
    t = keep @ dagger(keep)
    return t, op_norm(t - arr)


def sharpen_projection_polar(t0) -> np.ndarray:
    """Same projection, computed as ``(1 + Arg(2 t0 - 1)) / 2`` with the polar factor."""
    arr, _ = _checked(t0)
    n = arr.shape[0]
    t = 0.5 * (np.eye(n) + polar_unitary(2.0 * arr - np.eye(n)))
    return hermitian_part(t)


def rank_plus(t0, *, check: bool = True) -> int:
    """Number of eigenvalues of the almost projection ``t0`` above 1/2."""
    if check:
        arr, _ = _checked(t0)
    else:
        arr = hermitian_part(as_square(t0, "t0"))
    return int(np.count_nonzero(np.linalg.eigvalsh(arr) > 0.5))


def _inv_sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, x = np.linalg.eigh(hermitian_part(a))
    return (x / np.sqrt(w)) @ dagger(x)


def intertwine_projections(p, q) -> tuple[np.ndarray, float]:
    """Kato intertwiner between two close projections.

    ``sigma = (qp + (1-q)(1-p)) (1 - (p-q)^2)^{-1/2}`` is unitary and
    satisfies ``sigma p sigma* = q``.

    Returns
    -------
    sigma : ndarray
    dist : float
        ``||sigma - 1||``; at most ``4 ||p - q||`` when ``||p - q|| <= 1/10``.

    Raises
    ------
    ProjectionsTooFar
        If ``||p - q|| >= 1``.
    """
    p = as_square(p, "p")
    q = as_square(q, "q")
    gap = op_norm(p - q)
    if gap >= 1.0:
        raise ProjectionsTooFar(f"||p - q|| = {gap:.6f} >= 1", gap)
    n = p.shape[0]
    one = np.eye(n)
    d = p - q
    sigma = (q @ p + (one - q) @ (one - p)) @ _inv_sqrt_psd(one - d @ d)
    return sigma, op_norm(sigma - one)


def disjoin_projections(p, q) -> np.ndarray:
    """Unitary ``sigma`` close to 1 with ``sigma p sigma*`` orthogonal to ``q``.

    Built by sharpening ``(1-q) p (1-q)`` and intertwining ``p`` with the
    result, so ``||sigma - 1|| <= 5 ||pq||``.

    Raises
    ------
    NotAlmostOrthogonal
        If ``||pq|| >= 1/100``.
    """
    sigma, _ = disjoin_with_target(p, q)
    return sigma


def disjoin_with_target(p, q) -> tuple[np.ndarray, np.ndarray]:
    """As :func:`disjoin_projections`, also returning ``sigma p sigma*``."""
    p = as_square(p, "p")
    q = as_square(q, "q")
    overlap = op_norm(p @ q)
    if overlap >= DISJOIN_LIMIT:
        raise NotAlmostOrthogonal(f"||pq|| = {overlap:.3e} >= 1/100", overlap)
    if overlap == 0.0:
        return np.eye(p.shape[0], dtype=complex), p.copy()
    one = np.eye(p.shape[0])
    t0 = (one - q) @ p @ (one - q)
    t, _ = sharpen_projection(t0)
    sigma, _ = intertwine_projections(p, t)
    return sigma, t
