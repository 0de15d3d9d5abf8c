"""Smooth scalar functions on the circle and the plane.

* :func:`smooth_step` and :func:`smooth_sign`: C-infinity transitions built
  from ``exp(-1/x)``.
* :func:`plateau_bump`: a function on the circle that is constant on
  given arcs and vanishes away from them.
* :func:`arg_rho`: a smooth function on the plane that agrees with the
  principal argument on the circle minus a small arc around -1.
* :func:`commutator_ratio_probe`: empirical ``||[f(u), v]|| / ||[u, v]||``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import ArcsTooClose, InvalidInput
from .linalg import TWO_PI, Arc, angular_distance, comm_norm, dagger, expm_hermitian

# ---------------------------------------------------------------------------
# one-dimensional building blocks
# ---------------------------------------------------------------------------


def _h(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``.

    ``h(x) / (h(x) + h(1 - x))`` with ``h(x) = exp(-1/x)`` for ``x > 0``.
    Its derivative is a bump supported in ``[0, 1]`` whose logarithm
    behaves like ``-1 / (x (1 - x))`` at both ends.
    """
    x = np.asarray(x, dtype=float)
    a = _h(x)
    b = _h(1.0 - x)
    return a / (a + b)


def smooth_sign(x) -> np.ndarray:
    """C-infinity function equal to -1 for ``x <= -1`` and 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    return 2.0 * smooth_step((x + 1.0) / 2.0) - 1.0


# ---------------------------------------------------------------------------
# functions on the circle
# ---------------------------------------------------------------------------


def distance_to_arc(theta, arc: Arc) -> np.ndarray:
    """Arc-length distance from angles ``theta`` to ``arc`` (0 inside)."""
    theta = np.asarray(theta, dtype=float)
    if arc.is_full:
        return np.zeros(theta.shape)
    inside = arc.contains(theta) | (angular_distance(theta, arc.start) == 0) | (angular_distance(theta, arc.end) == 0)
    d = np.minimum(angular_distance(theta, arc.start), angular_distance(theta, arc.end))
    return np.where(inside, 0.0, d)


def arc_gap(a: Arc, b: Arc) -> float:
    """Arc-length distance between two arcs (0 if they meet)."""
    if a.is_full or b.is_full:
        return 0.0
    ends_b = np.array([b.start, b.end])
    ends_a = np.array([a.start, a.end])
    if np.any(a.contains(ends_b)) or np.any(b.contains(ends_a)):
        return 0.0
    return float(min(distance_to_arc(ends_b, a).min(), distance_to_arc(ends_a, b).min()))


@dataclass
class CircleFunction:
    """Function on the unit circle given through its angle.

    Attributes
    ----------
    func : callable
        Maps an array of angles to real values.
    smoothness : str
        Declared smoothness class.
    support : list of Arc
        Arcs outside which the function vanishes (empty: no claim).
    plateaus : list of (Arc, float)
        Arcs on which the function is constant, with the value.
    sup_bound : float
        Declared bound for ``|f|``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    smoothness: str = "C-infinity"
    support: list = field(default_factory=list)
    plateaus: list = field(default_factory=list)
    sup_bound: float = 1.0

    def of_angle(self, theta) -> np.ndarray:
        return self.func(np.asarray(theta, dtype=float))

    def __call__(self, z) -> np.ndarray:
        """Evaluate at points of the circle (the modulus is ignored)."""
        return self.of_angle(np.angle(np.asarray(z, dtype=complex)))

    def apply(self, u) -> np.ndarray:
        """``f(u)`` for a unitary (or normal) matrix ``u`` via its eigendecomposition."""
        return apply_normal(u, self)


def plateau_bump(arcs: Sequence[Arc], values: Sequence[float], beta: float) -> CircleFunction:
    """Smooth ``f`` with ``f = values[j]`` on ``arcs[j]`` and ``|f| <= 1``.

    Around each arc the function drops to 0 over a transition of width
    ``beta / 2`` (arc length), so the supports of different arcs do not
    overlap when the arcs are at least ``beta`` apart.

    Raises
    ------
    ArcsTooClose
        If two arcs are closer than ``beta``.
    InvalidInput
        On mismatched lengths, values outside ``[-1, 1]`` or ``beta <= 0``.
    """
    arcs = list(arcs)
    values = [float(x) for x in values]
    if len(arcs) != len(values):
        raise InvalidInput("one value per arc is required")
    if beta <= 0:
        raise InvalidInput("beta must be positive")
    if any(abs(x) > 1 for x in values):
        raise InvalidInput("plateau values must lie in [-1, 1]")
    for i in range(len(arcs)):
        for j in range(i + 1, len(arcs)):
            gap = arc_gap(arcs[i], arcs[j])
            if gap < beta:
                raise ArcsTooClose(f"arcs {i} and {j} are {gap:.4f} apart, need {beta:.4f}", gap)
    width = beta / 2.0

    def f(theta):
        out = np.zeros(np.shape(theta))
        for arc, val in zip(arcs, values):
            out = out + val * (1.0 - smooth_step(distance_to_arc(theta, arc) / width))
        return out

    support = [arc if arc.is_full else Arc(arc.start - width, min(arc.length + 2 * width, TWO_PI)) for arc in arcs]
    return CircleFunction(f, "C-infinity", support, list(zip(arcs, values)), 1.0)


OMEGA_MINUS_ARC = Arc(2 * math.pi / 3, 2 * math.pi / 3)  # {Re z <= -1/2}


def eta_minus(neighborhood: float = 0.1) -> CircleFunction:
    """1 on ``{Re z <= -1/2}``, 0 outside its ``neighborhood`` (arc length)."""
    return plateau_bump([OMEGA_MINUS_ARC], [1.0], 2.0 * neighborhood)


# ---------------------------------------------------------------------------
# the smooth argument
# ---------------------------------------------------------------------------


def arg_minus(z) -> np.ndarray:
    """Principal argument, continuous off ``(-inf, 0]``, values in ``(-pi, pi]``."""
    return np.angle(np.asarray(z, dtype=complex))


def arg_plus(z) -> np.ndarray:
    """Argument with values in ``[0, 2pi)``, continuous off ``[0, inf)``."""
    return np.mod(np.angle(np.asarray(z, dtype=complex)), TWO_PI)


def cut_near_minus_one(z) -> np.ndarray:
    """Smooth cut-off: 1 for ``|z + 1| <= 1/10``, 0 for ``|z + 1| >= 1/5``."""
    r = np.abs(np.asarray(z, dtype=complex) + 1.0)
    return 1.0 - smooth_step((r - 0.1) / 0.1)


def cut_near_circle(z) -> np.ndarray:
    """Smooth cut-off: 1 on the unit circle, 0 at distance at least 1/10 from it."""
    dist = np.abs(np.abs(np.asarray(z, dtype=complex)) - 1.0)
    return 1.0 - smooth_step(dist / 0.1)


@dataclass(frozen=True)
class ArgRho:
    """Smooth function on the plane equal to :func:`arg_minus` on ``{|z| = 1, |z + 1| >= rho}``.

    Near -1 it uses the argument branch that is continuous there and
    subtracts ``pi (1 - s(2 Im z / rho))`` with :func:`smooth_sign` ``s``;
    on the circle at distance at least ``rho`` from -1 that correction is
    exactly ``0`` above the real axis and ``2 pi`` below it.
    """

    rho: float

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        phi = cut_near_minus_one(z)
        psi = cut_near_circle(z)
        s = smooth_sign(2.0 * z.imag / self.rho)
        near = np.where(phi > 0, arg_plus(z) - math.pi * (1.0 - s), 0.0)
        far = np.where(phi < 1, psi * arg_minus(z), 0.0)
        return phi * near + (1.0 - phi) * far

    def apply(self, u) -> np.ndarray:
        return apply_normal(u, self)


def arg_rho(rho: float) -> ArgRho:
    """Smooth argument adapted to a gap of radius ``rho`` around -1, ``0 < rho < 2``."""
    if not (0.0 < rho < 2.0):
        raise InvalidInput("rho must lie in (0, 2)")
    return ArgRho(float(rho))


def sample_circle_minus_gap(rho: float, count: int) -> np.ndarray:
    """``count`` equally spaced points of ``{|z| = 1, |z + 1| >= rho}``."""
    half = 2.0 * math.asin(min(rho / 2.0, 1.0))  # angular half-width of the removed arc
    theta = np.linspace(-math.pi + half, math.pi - half, count)
    return np.exp(1j * theta)


# ---------------------------------------------------------------------------
# commutator ratios
# ---------------------------------------------------------------------------


def apply_normal(u, f: Callable) -> np.ndarray:
    """``f(u)`` for a normal matrix ``u`` (Schur form, which is diagonal up to rounding)."""
    u = np.asarray(u, dtype=complex)
    w, x = np.linalg.eig(u)
    q, _ = np.linalg.qr(x)
    lam = np.diagonal(dagger(q) @ u @ q)
    return (q * np.asarray(f(lam), dtype=complex)) @ dagger(q)


def _random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + dagger(a)) / 2.0


def commutator_ratio_probe(
    f: Callable,
    trials: int = 200,
    n: int = 16,
    scale: float = 1e-3,
    *,
    gap_rho: Optional[float] = None,
    seed: int = 0,
) -> dict:
    """Distribution of ``||[f(u), v]|| / ||[u, v]||`` over random pairs.

    ``u = X diag(lambda) X*`` with Haar ``X``; the eigenvalues are uniform on
    the circle, or, when ``gap_rho`` is given, on the circle minus the
    ``gap_rho``-arc around -1 with half of them placed within ``gap_rho``
    of the gap edges (where a cut-sensitive ``f`` is stressed most).
    ``v = exp(i scale H)`` for a random Hermitian ``H``.

    Returns
    -------
    dict
        ``ratios`` (array) and their ``max``, ``mean``, ``median``, ``min``.
    """
    rng = np.random.default_rng(seed)
    ratios = np.empty(trials)
    for k in range(trials):
        if gap_rho is None:
            theta = rng.uniform(-math.pi, math.pi, n)
        else:
            half = 2.0 * math.asin(min(gap_rho / 2.0, 1.0))
            lo, hi = -math.pi + half, math.pi - half
            theta = rng.uniform(lo, hi, n)
            m = n // 2
            edge = rng.uniform(0.0, gap_rho, m)
            sign = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
            theta[:m] = np.where(sign > 0, hi - edge, lo + edge)
        x = unitary_group.rvs(n, random_state=rng)
        lam = np.exp(1j * theta)
        u = (x * lam) @ dagger(x)
        fu = (x * np.asarray(f(lam), dtype=complex)) @ dagger(x)
        v = expm_hermitian(_random_hermitian(rng, n), scale)
        base = comm_norm(u, v)
        ratios[k] = comm_norm(fu, v) / base if base > 0 else 0.0
    return {
        "ratios": ratios,
        "max": float(ratios.max()),
        "mean": float(ratios.mean()),
        "median": float(np.median(ratios)),
        "min": float(ratios.min()),
    }
