"""Reproducible test instances.

Every instance is a pair of unitaries together with a metadata dict holding
the measured commutator norm and, where they are known in closed form, the
expected values of the two integer invariants.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInput
from .invariants import voiculescu
from .linalg import check_unitary, comm_norm, dagger, direct_sum, expm_hermitian

KINDS = ("voiculescu", "doubled", "perturbed_commuting", "custom")


@dataclass(frozen=True)
class InstanceSpec:
    """Description of a test pair.

    Parameters
    ----------
    kind : str
        One of ``voiculescu``, ``doubled``, ``perturbed_commuting``, ``custom``.
    size : int
        ``m`` for the clock/shift kinds (``doubled`` has side ``2m``), ``n``
        for ``perturbed_commuting``.
    scale : float
        Strength of the conjugating perturbation (``perturbed_commuting`` only).
    seed : int
        Seed for :func:`numpy.random.default_rng`.
    """

    kind: str
    size: int
    scale: float = 1e-3
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def label(self) -> str:
        if self.kind == "perturbed_commuting":
            return f"{self.kind}(n={self.size},scale={self.scale:g},seed={self.seed})"
        return f"{self.kind}(m={self.size})"


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    """Gaussian Hermitian matrix (GUE up to normalisation)."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + dagger(a)) / 2.0


def random_phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(1j * rng.uniform(-np.pi, np.pi, n))


def doubled_voiculescu(m: int) -> tuple[np.ndarray, np.ndarray]:
    """``(clock + clock*, shift + shift)`` as block-diagonal direct sums."""
    clock, shift = voiculescu(m)
    return direct_sum(clock, dagger(clock)), direct_sum(shift, shift)


def make_instance(spec: InstanceSpec, matrices: Optional[tuple] = None) -> tuple[np.ndarray, np.ndarray, dict]:
    """Build the pair described by ``spec``.

    ``custom`` takes the pair from ``matrices`` and only validates and
    measures it.

    Raises
    ------
    InvalidInput
        Unknown kind, non-positive size, or missing matrices for ``custom``.
    """
    if spec.kind not in KINDS:
        raise InvalidInput(f"unknown instance kind {spec.kind!r}; expected one of {KINDS}")
    if spec.kind != "custom" and spec.size < 2:
        raise InvalidInput("instance size must be at least 2")
    expected: dict = {}
    if spec.kind == "voiculescu":
        u, v = voiculescu(spec.size)
        expected = {"isospec": -1, "winding": -1}
    elif spec.kind == "doubled":
        u, v = doubled_voiculescu(spec.size)
        expected = {"isospec": 0, "winding": 0}
    elif spec.kind == "perturbed_commuting":
        rng = np.random.default_rng(spec.seed)
        n = spec.size
        u = np.diag(random_phases(rng, n))
        d = np.diag(random_phases(rng, n))
        w = expm_hermitian(random_hermitian(rng, n), spec.scale)
        v = w @ d @ dagger(w)
        expected = {"isospec": 0, "winding": 0}
    else:
        if matrices is None:
            raise InvalidInput("custom instances need explicit matrices")
        u = check_unitary(matrices[0], 1e-8, "u")
        v = check_unitary(matrices[1], 1e-8, "v")
    meta = {
        "spec": spec.to_dict(),
        "label": spec.label(),
        "n": int(u.shape[0]),
        "delta": comm_norm(u, v),
        "expected": expected,
    }
    return u, v, meta


def intertwined_families(block: int, N: int, scale: float, seed: int = 0) -> tuple[list, list]:
    """Two cyclic families of ``N`` projections on ``C^(2 N block)`` with defect of order ``scale``.

    Start from an orthogonal splitting into ``2N`` blocks ``E_j`` of size
    ``block`` (indices mod ``2N``) and set ``P_k = E_{2k-1} + E_{2k}``,
    ``Q_k = E_{2k} + E_{2k+1}``.  The ``P`` family is then conjugated by
    ``exp(i scale H)``, which keeps it a partition of unity while making
    the two families only approximately aligned.
    """
    if N < 2 or block < 1:
        raise InvalidInput("need N >= 2 and block >= 1")
    rng = np.random.default_rng(seed)
    n = 2 * N * block
    frame = expm_hermitian(random_hermitian(rng, n), 1.0)
    cols = [frame[:, j * block:(j + 1) * block] for j in range(2 * N)]
    e = [c @ dagger(c) for c in cols]
    w = expm_hermitian(random_hermitian(rng, n) / np.sqrt(n), scale)
    P = [w @ (e[(2 * k - 1) % (2 * N)] + e[2 * k]) @ dagger(w) for k in range(N)]
    Q = [e[2 * k] + e[(2 * k + 1) % (2 * N)] for k in range(N)]
    return P, Q
