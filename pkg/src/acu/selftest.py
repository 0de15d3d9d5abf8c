"""Quick randomized checks of every construction, one suite per building block.

Each suite draws a handful of small random instances, runs the
construction and compares measured norms with the bound the construction
advertises.  The full-size versions of these checks live in the test
suite; this module backs the ``selftest`` command.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gap_opening import approximate, rotate_double
from .generators import InstanceSpec, intertwined_families, make_instance, random_hermitian
from .homotopy import build_homotopy
from .invariants import invariant_report
from .lin_oracle import commuting_hermitian_pair
from .linalg import comm_norm, dagger, expm_hermitian, nearest_unitary, op_norm, unitarity_defect
from .projections import disjoin_with_target, intertwine_projections, sharpen_projection
from .quantbeek import conjugation_residual, families_from_list, refine_intertwined
from .scalar_functions import arg_minus, arg_rho, sample_circle_minus_gap

SLACK = 1e-10


@dataclass
class SuiteResult:
    name: str
    passed: bool
    trials: int
    worst_ratio: float
    seconds: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "worst_ratio": self.worst_ratio,
            "seconds": self.seconds,
            "notes": self.notes,
        }


def _haar(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def _random_projection(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    b = _haar(rng, n)[:, :k]
    return b @ dagger(b)


def _suite_polar(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 12))
        w = _haar(rng, n) + rng.uniform(1e-4, 0.05) * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        rho = unitarity_defect(w)
        if rho >= 0.2:
            continue
        _, dist = nearest_unitary(w)
        worst = max(worst, dist / (5 * rho + SLACK))
    return worst, []


def _suite_sharpen(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 12))
        p = _random_projection(rng, n, int(rng.integers(1, n)))
        h = random_hermitian(rng, n)
        t0 = p + rng.uniform(1e-4, 0.02) * h / op_norm(h)
        defect = op_norm(t0 @ t0 - t0)
        if defect >= 0.1:
            continue
        t, _ = sharpen_projection(t0)
        worst = max(worst, op_norm(t - t0) / (4 * defect + SLACK))
    return worst, []


def _suite_kato(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 12))
        p = _random_projection(rng, n, int(rng.integers(1, n)))
        w = expm_hermitian(random_hermitian(rng, n), rng.uniform(1e-4, 0.02))
        q = w @ p @ dagger(w)
        gap = op_norm(p - q)
        if gap > 0.1:
            continue
        sigma, dist = intertwine_projections(p, q)
        conj = op_norm(sigma @ p @ dagger(sigma) - q)
        worst = max(worst, dist / (4 * gap + SLACK), conj / 1e-9)
    return worst, []


def _suite_disjoin(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(4, 12))
        k = int(rng.integers(1, n // 2 + 1))
        # p starts orthogonal to q and is then rotated slightly
        basis = _haar(rng, n)
        b_q = basis[:, k:2 * k] if 2 * k <= n else basis[:, k:]
        q = b_q @ dagger(b_q)
        w = expm_hermitian(random_hermitian(rng, n), rng.uniform(1e-5, 5e-4))
        p = w @ basis[:, :k] @ dagger(basis[:, :k]) @ dagger(w)
        overlap = op_norm(p @ q)
        if overlap >= 0.01:
            continue
        sigma, target = disjoin_with_target(p, q)
        contain = op_norm(sigma @ p @ dagger(sigma) @ q)
        worst = max(worst, op_norm(sigma - np.eye(n)) / (5 * overlap + SLACK), contain / 1e-9)
    return worst, []


def _suite_quantbeek(rng, trials):
    worst = 0.0
    for t in range(trials):
        N = [2, 3, 4, 6][t % 4]
        P, Q = intertwined_families(int(rng.integers(1, 4)), N, 1e-3, int(rng.integers(1 << 30)))
        res = refine_intertwined(*families_from_list(P, Q))
        eps = res.epsilon_measured
        n = P[0].shape[0]
        worst = max(
            worst,
            max(op_norm(a - b) for a, b in zip(res.p_prime, res.q_prime)) / (200 * eps + SLACK),
            op_norm(res.W - np.eye(n)) / (100 * eps * math.sqrt(N) + SLACK),
            conjugation_residual(res) / 1e-9,
        )
    return worst, []


def _suite_rotation(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 12))
        eps = float(rng.choice([0.01, 0.05, 0.09]))
        u = _haar(rng, n)
        v = u @ expm_hermitian(random_hermitian(rng, n), 0.01)
        w = rotate_double(u, eps)
        base = np.block([[u, np.zeros((n, n))], [np.zeros((n, n)), dagger(u)]])
        vv = np.kron(np.eye(2), v)
        res = np.linalg.inv(w + np.eye(2 * n))
        worst = max(
            worst,
            op_norm(w - base) / (3 * eps + SLACK),
            op_norm(res) / (1 / eps + SLACK),
            comm_norm(w, vv) / (2 * comm_norm(u, v) + SLACK),
        )
    return worst, []


def _suite_invariants(rng, trials):
    notes = []
    worst = 0.0
    for m in (8, 12):
        u, v, _ = make_instance(InstanceSpec("voiculescu", m))
        rep = invariant_report(u, v)
        ok = rep.isospec == -1 and rep.winding == -1
        notes.append(f"voiculescu m={m}: isospec {rep.isospec}, winding {rep.winding}")
        worst = max(worst, 0.0 if ok else math.inf)
    return worst, notes


def _suite_homotopy(rng, trials):
    u, v, _ = make_instance(InstanceSpec("doubled", 8))
    path, cert = build_homotopy(u, v)
    start = op_norm(path.start - v)
    end = op_norm(path.end - np.eye(u.shape[0]))
    notes = [f"N={cert.N}, max sampled commutator {cert.max_commutator_sampled:.3g}"]
    return max(start, end) / 1e-9, notes


def _suite_lin_oracle(rng, trials):
    worst = 0.0
    for _ in range(max(1, trials // 4)):
        n = 12
        a = random_hermitian(rng, n)
        b = a @ a / op_norm(a) + 1e-3 * random_hermitian(rng, n)
        a, b = a / op_norm(a), b / op_norm(b)
        res = commuting_hermitian_pair(a, b)
        worst = max(worst, res.commutator_residual / 1e-9)
    return worst, []


def _suite_arg_rho(rng, trials):
    worst = 0.0
    for rho in (0.4, 0.2, 0.1, 0.05):
        z = sample_circle_minus_gap(rho, 2000)
        worst = max(worst, float(np.max(np.abs(arg_rho(rho)(z) - arg_minus(z)))) / 1e-10)
    return worst, []


def _suite_pipeline(rng, trials):
    u, v, _ = make_instance(InstanceSpec("perturbed_commuting", 6, 1e-3, int(rng.integers(1 << 30))))
    u2, v2, rep = approximate(u, v, route="dense")
    worst = max(comm_norm(u2, v2) / 1e-9, unitarity_defect(u2) / 1e-10, unitarity_defect(v2) / 1e-10)
    return worst, [f"distance {rep.distance:.3g}, flags {len(rep.flags)}"]


SUITES: dict[str, Callable] = {
    "polar": _suite_polar,
    "sharpen": _suite_sharpen,
    "kato": _suite_kato,
    "disjoin": _suite_disjoin,
    "quantbeek": _suite_quantbeek,
    "rotation": _suite_rotation,
    "invariants": _suite_invariants,
    "homotopy": _suite_homotopy,
    "lin-oracle": _suite_lin_oracle,
    "arg-rho": _suite_arg_rho,
    "pipeline": _suite_pipeline,
}


def run_selftest(trials: int = 20, seed: int = 0, only=None) -> list[SuiteResult]:
    """Run the suites (all, or those named in ``only``).

    A suite passes when every measured quantity is within its bound, that
    is, when the worst ratio measured / bound is at most 1.
    """
    rng = np.random.default_rng(seed)
    results = []
    for name, suite in SUITES.items():
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            worst, notes = suite(rng, trials)
            passed = worst <= 1.0
        except Exception as exc:  # a crash is a failed suite, reported with its message
            worst, notes, passed = math.inf, [f"{type(exc).__name__}: {exc}"], False
        results.append(SuiteResult(name, passed, trials, float(worst), time.perf_counter() - t0, notes))
    return results
