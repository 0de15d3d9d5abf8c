"""Acceptance criteria 1 to 9.

Each test prints one line ``criterion k: PASS`` or ``criterion k: FAIL``
with the measured numbers, then asserts the same verdict.  Run with

    pytest tests/test_acceptance.py -v -s

(``-s`` is not required: the lines are written with capture disabled).
"""

import math
import os
import time

import numpy as np
import pytest

from acu.gap_opening import approximate, rotate_double
from acu.generators import doubled_voiculescu, intertwined_families
from acu.homotopy import arc_families, build_homotopy
from acu.invariants import invariants_agree, isospec, voiculescu, winding_number
from acu.lin_oracle import commuting_hermitian_pair
from acu.linalg import (
    Arc,
    compress_unitary,
    direct_sum,
    eig_unitary,
    idempotency_defect,
    max_dim,
    nearest_unitary,
    spectral_projection,
)
from acu.projections import disjoin_with_target, intertwine_projections, projection_defect, sharpen_projection
from acu.quantbeek import families_from_list, measure_family_defect, refine_intertwined
from acu.scalar_functions import arg_minus, arg_rho, commutator_ratio_probe, plateau_bump, sample_circle_minus_gap
from conftest import expi, gue, haar, opnorm

SLACK = 1e-10


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def commuting_plus(rng, n, scale):
    """Unitary pair obtained by conjugating one member of a commuting pair by exp(i scale H)."""
    x = haar(rng, n)
    u = (x * np.exp(1j * rng.uniform(-np.pi, np.pi, n))) @ x.conj().T
    v = (x * np.exp(1j * rng.uniform(-np.pi, np.pi, n))) @ x.conj().T
    h = gue(rng, n)
    y = expi(h / opnorm(h), scale)
    return u, y @ v @ y.conj().T


# ---------------------------------------------------------------------------


def test_criterion_1_rotation_bounds(verdict):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = {"dist": 0.0, "resolvent": 0.0, "commutator": 0.0}
    violations = 0
    trials = 0
    for eps in (0.01, 0.05, 0.09):
        for k in range(167 if eps != 0.09 else 166):
            n = int(rng.integers(1, 33))
            u = haar(rng, n)
            if k % 4 == 0:
                v = haar(rng, n)
            else:
                # v near a unitary commuting with u
                vecs, _ = eig_unitary(u).vectors()
                h = gue(rng, n)
                base = (vecs * np.exp(1j * rng.uniform(-np.pi, np.pi, n))) @ vecs.conj().T
                v = expi(h / opnorm(h), 10.0 ** rng.uniform(-6, -1)) @ base
            w = rotate_double(u, eps)
            vv = direct_sum(v, v)
            measured = {
                "dist": (opnorm(w - direct_sum(u, u.conj().T)), 3 * eps),
                "resolvent": (opnorm(np.linalg.inv(w + np.eye(2 * n))), 1 / eps),
                "commutator": (opnorm(w @ vv - vv @ w), 2 * opnorm(u @ v - v @ u)),
            }
            for key, (lhs, bound) in measured.items():
                violations += int(lhs > bound + SLACK)
                if bound > 0:
                    worst[key] = max(worst[key], lhs / bound)
            trials += 1
    seconds = time.perf_counter() - start
    ok = trials == 500 and violations == 0 and seconds < 30
    worst = {key: round(x, 6) for key, x in worst.items()}
    verdict(1, ok, f"{trials} trials, {violations} violations, worst measured/bound {worst}, {seconds:.1f}s")


def test_criterion_2_toolkit_constants(verdict):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    violations = {"sharpen": 0, "intertwine": 0, "disjoin": 0, "nearest": 0, "gap": 0}
    counts = dict.fromkeys(violations, 0)

    # projection sharpening: dist <= 4 defect
    while counts["sharpen"] < 1000:
        n = int(rng.integers(1, 13))
        k = int(rng.integers(0, n + 1))
        x = haar(rng, n)
        spread = rng.uniform(0, 0.09)
        vals = np.concatenate([np.ones(k), np.zeros(n - k)]) + rng.uniform(-spread, spread, n)
        t0 = (x * vals) @ x.conj().T
        defect = projection_defect(t0)
        if defect >= 0.1:
            continue
        t, d = sharpen_projection(t0)
        counts["sharpen"] += 1
        violations["sharpen"] += int(d > 4 * defect + SLACK or idempotency_defect(t) > 1e-10)

    # Kato intertwiner: exact conjugation, ||sigma - 1|| <= 4 ||p - q|| for ||p - q|| <= 1/10
    while counts["intertwine"] < 1000:
        n = int(rng.integers(2, 13))
        b = haar(rng, n)[:, : int(rng.integers(1, n))]
        p = b @ b.conj().T
        h = gue(rng, n)
        y = expi(h / opnorm(h), 10.0 ** rng.uniform(-5, -1.2))
        q = y @ p @ y.conj().T
        if opnorm(p - q) > 0.1:
            continue
        sigma, d = intertwine_projections(p, q)
        counts["intertwine"] += 1
        bad = opnorm(sigma @ p @ sigma.conj().T - q) > 1e-9 or d > 4 * opnorm(p - q) + SLACK
        violations["intertwine"] += int(bad)

    # disjoiner: containment and ||sigma - 1|| <= 5 ||pq||
    while counts["disjoin"] < 1000:
        n = int(rng.integers(3, 13))
        x = haar(rng, n)
        k = int(rng.integers(1, n // 2 + 1))
        q = x[:, k : 2 * k] @ x[:, k : 2 * k].conj().T
        h = gue(rng, n)
        y = expi(h / opnorm(h), 10.0 ** rng.uniform(-6, -2.5))
        p = y @ x[:, :k] @ x[:, :k].conj().T @ y.conj().T
        overlap = opnorm(p @ q)
        if overlap >= 0.01:
            continue
        sigma, _ = disjoin_with_target(p, q)
        moved = sigma @ p @ sigma.conj().T
        counts["disjoin"] += 1
        bad = opnorm(moved @ q) > 1e-9 or opnorm(sigma - np.eye(n)) > 5 * overlap + SLACK
        violations["disjoin"] += int(bad)

    # almost-unitary correction: ||w - u|| <= 5 rho
    while counts["nearest"] < 1000:
        n = int(rng.integers(1, 11))
        w = haar(rng, n) + 10.0 ** rng.uniform(-5, -1.5) * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        rho = opnorm(w.conj().T @ w - np.eye(n))
        if rho >= 0.2:
            continue
        _, d = nearest_unitary(w)
        counts["nearest"] += 1
        violations["nearest"] += int(d > 5 * rho + SLACK)

    # gapped compression: gap of the compression >= R - 10 kappa
    while counts["gap"] < 1000:
        n = int(rng.integers(4, 13))
        radius = rng.uniform(0.1, 0.8)
        half = 2 * math.asin(radius / 2)
        x = haar(rng, n)
        u = (x * np.exp(1j * rng.uniform(-np.pi + half + 1e-3, np.pi - half - 1e-3, n))) @ x.conj().T
        R = float(np.min(np.abs(np.linalg.eigvals(u) + 1)))
        b = np.hstack(eig_unitary(u).bases)[:, : int(rng.integers(1, n))]
        h = gue(rng, n)
        y = expi(h / opnorm(h), 10.0 ** rng.uniform(-5, -2.3))
        p = y @ b @ b.conj().T @ y.conj().T
        kappa = opnorm(p @ u - u @ p)
        if kappa > 0.01:
            continue
        w, _, _ = compress_unitary(u, p)
        counts["gap"] += 1
        violations["gap"] += int(np.min(np.abs(np.linalg.eigvals(w) + 1)) < R - 10 * kappa - SLACK)

    seconds = time.perf_counter() - start
    ok = sum(violations.values()) == 0 and all(c == 1000 for c in counts.values()) and seconds < 120
    verdict(2, ok, f"trials {counts}, violations {violations}, {seconds:.1f}s")


def _refinement_violations(P, Q):
    res = refine_intertwined(*families_from_list(P, Q))
    N, n = len(P), P[0].shape[0]
    eps = res.epsilon_measured
    pp, qq, W = res.p_prime, res.q_prime, res.W
    bad = []
    if max(idempotency_defect(x) for x in pp + qq) > 1e-10:
        bad.append("idempotency")
    if max(opnorm(pp[j] - qq[j]) for j in range(2 * N)) > 200 * eps + SLACK:
        bad.append("p'-q'")
    sums = max(
        max(opnorm(pp[(2 * k - 1) % (2 * N)] + pp[2 * k] - P[k]), opnorm(qq[2 * k] + qq[(2 * k + 1) % (2 * N)] - Q[k]))
        for k in range(N)
    )
    if sums > 1e-9:
        bad.append("sums")
    if max(opnorm(W @ qq[j] @ W.conj().T - pp[j]) for j in range(2 * N)) > 1e-9:
        bad.append("conjugation")
    if opnorm(W - np.eye(n)) > 100 * eps * math.sqrt(N) + SLACK:
        bad.append("W-1")
    return bad


def test_criterion_3_refinement(verdict):
    start = time.perf_counter()
    failures = []
    cases = 0
    for N in (2, 3, 4, 6):
        for block in (1, 2, 4):
            if 2 * N * block > 64:
                continue
            for seed, scale in enumerate((1e-5, 1e-4, 1e-3)):
                P, Q = intertwined_families(block, N, scale, seed)
                if measure_family_defect(*families_from_list(P, Q)) >= 1 / 200:
                    continue
                cases += 1
                bad = _refinement_violations(P, Q)
                if bad:
                    failures.append((N, block, scale, bad))
    arc_cases = 0
    for m in (16, 32):
        u, v = doubled_voiculescu(m)
        for N in (2, 3):
            Pf, Qf = arc_families(u, v, N)
            if measure_family_defect(Pf, Qf) >= 1 / 200:
                continue
            arc_cases += 1
            bad = _refinement_violations(Pf.projections, Qf.projections)
            if bad:
                failures.append(("arc", m, N, bad))
    seconds = time.perf_counter() - start
    ok = not failures and cases > 0 and arc_cases > 0 and seconds < 120
    verdict(3, ok, f"{cases} synthetic and {arc_cases} arc-family cases, failures {failures}, {seconds:.1f}s")


def test_criterion_4_invariants(verdict):
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    problems = []
    signs = set()
    for m in range(8, 33):
        clock, shift = voiculescu(m)
        if isospec(clock, shift)[0] != -1:
            problems.append(("isospec", m))
        w = winding_number(clock, shift)
        if abs(w) != 1:
            problems.append(("winding", m, w))
        signs.add(w)
    if len(signs) != 1:
        problems.append(("winding sign", sorted(signs)))
    for m in (8, 16):
        u, v = doubled_voiculescu(m)
        if (winding_number(u, v), isospec(u, v)[0]) != (0, 0):
            problems.append(("doubled", m))
    for _ in range(100):
        pieces = []
        expected = 0
        for _ in range(int(rng.integers(2, 4))):
            choice = int(rng.integers(0, 3))
            m = int(rng.integers(8, 14))
            clock, shift = voiculescu(m)
            if choice == 0:
                pieces.append((clock, shift))
                expected -= 1
            elif choice == 1:
                pieces.append((clock.conj().T, shift.conj().T))
                expected -= 1
            else:
                pieces.append(commuting_plus(rng, int(rng.integers(2, 7)), 1e-3))
        u = direct_sum(*[a for a, _ in pieces])
        v = direct_sum(*[b for _, b in pieces])
        got = isospec(u, v)[0]
        parts = sum(isospec(a, b)[0] for a, b in pieces)
        if got != parts or got != expected:
            problems.append(("additivity", got, parts, expected))
    agree = 0
    for _ in range(200):
        u, v = commuting_plus(rng, int(rng.integers(2, 11)), 10.0 ** rng.uniform(-5, -1.5))
        ok, rep = invariants_agree(u, v)
        agree += int(ok)
    if agree != 200:
        problems.append(("agreement", agree))
    seconds = time.perf_counter() - start
    ok = not problems and seconds < 300
    verdict(4, ok, f"winding sign {sorted(signs)}, agreement {agree}/200, problems {problems[:5]}, {seconds:.1f}s")


def test_criterion_5_homotopy(verdict):
    start = time.perf_counter()
    rows = {}
    problems = []
    for m in (16, 32, 64):
        u, v = doubled_voiculescu(m)
        n = u.shape[0]
        path, cert = build_homotopy(u, v)
        delta = opnorm(u @ v - v @ u)
        rows[m] = (delta, cert.max_commutator_sampled, cert.N)
        if not np.array_equal(path.start, v) or opnorm(path.end - np.eye(n)) > 1e-9:
            problems.append(("endpoints", m))
        if cert.tilde_u_error > 2 * math.pi / cert.N + SLACK:
            problems.append(("tilde", m, cert.tilde_u_error))
    c_hom = rows[16][1] / rows[16][0] ** 0.4
    ratios = {m: rows[m][1] / (c_hom * rows[m][0] ** 0.4) for m in rows}
    for m in (32, 64):
        if ratios[m] > 2.0:
            problems.append(("trend", m, ratios[m]))
    seconds = time.perf_counter() - start
    ok = not problems and seconds < 600
    verdict(5, ok, f"C_hom = {c_hom:.4f}, sampled/(C_hom delta^0.4) = "
            f"{ {m: round(r, 4) for m, r in ratios.items()} }, problems {problems}, {seconds:.1f}s")


def test_criterion_6_end_to_end(verdict):
    sizes = [int(s) for s in os.environ.get("ACU_ACCEPT_SIZES", "8,16,32").split(",")]
    rows = {}
    problems = []
    for m in sizes:
        u, v = doubled_voiculescu(m)
        t0 = time.perf_counter()
        u2, v2, rep = approximate(u, v)
        seconds = time.perf_counter() - t0
        D = opnorm(u - u2) + opnorm(v - v2)
        delta = opnorm(u @ v - v @ u)
        rows[m] = {"D": D, "delta": delta, "ratio": D / delta ** (1 / 30), "n_total": rep.n_total, "seconds": seconds}
        if opnorm(u2 @ v2 - v2 @ u2) > 1e-9:
            problems.append(("residual", m))
        n = u.shape[0]
        if max(opnorm(u2.conj().T @ u2 - np.eye(n)), opnorm(v2.conj().T @ v2 - np.eye(n))) > 1e-10:
            problems.append(("unitarity", m))
        if not math.isfinite(D):
            problems.append(("finite", m))
        if rep.n_total > max_dim():
            problems.append(("dimension", m))
        if seconds > (900 if m <= 16 else 3600):
            problems.append(("runtime", m, seconds))
    ms = sorted(rows)
    for a, b in zip(ms, ms[1:]):
        if rows[b]["D"] > rows[a]["D"]:
            problems.append(("D increases", a, b, rows[a]["D"], rows[b]["D"]))
    base = rows[ms[0]]["ratio"]
    for m in ms:
        if rows[m]["ratio"] > 10 * base:
            problems.append(("ratio", m))
    summary = {m: {k: (round(x, 6) if isinstance(x, float) else x) for k, x in r.items()} for m, r in rows.items()}
    verdict(6, not problems, f"{summary}, problems {problems}")


def test_criterion_7_lin_oracle_scaling(verdict):
    rng = np.random.default_rng(707)
    start = time.perf_counter()
    comms, dists = [], []
    exact = True
    n = 16
    for target in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        for _ in range(4):
            x = haar(rng, n)
            t = (x * rng.uniform(-1, 1, n)) @ x.conj().T
            s = (x * rng.uniform(-1, 1, n)) @ x.conj().T
            h = gue(rng, n)
            h /= opnorm(h)
            # the commutator scales with the conjugation angle, so it tracks the target
            y = expi(h, target)
            s = y @ s @ y.conj().T
            res = commuting_hermitian_pair(t, s)
            exact &= opnorm(res.first @ res.second - res.second @ res.first) <= 1e-10
            comms.append(res.input_commutator)
            dists.append(res.dist)
    slope = loglog_slope(comms, dists)
    decades = math.log10(max(comms) / min(comms))
    seconds = time.perf_counter() - start
    ok = exact and slope >= 0.4 and decades >= 4 and seconds < 300
    verdict(7, ok, f"slope {slope:.3f} over {decades:.1f} decades, exact commutation {exact}, {seconds:.1f}s")


def test_criterion_8_arg_rho(verdict):
    start = time.perf_counter()
    rhos = (0.4, 0.2, 0.1, 0.05)
    worst = 0.0
    ratios = {}
    for rho in rhos:
        z = sample_circle_minus_gap(rho, 10_000)
        worst = max(worst, float(np.max(np.abs(arg_rho(rho)(z) - arg_minus(z)))))
        ratios[rho] = commutator_ratio_probe(arg_rho(rho), trials=100, n=16, gap_rho=rho)["max"]
    c = max(ratios[r] * r for r in rhos)
    within = all(ratios[r] <= c / r for r in rhos)
    slope = loglog_slope(list(rhos), [ratios[r] for r in rhos])
    seconds = time.perf_counter() - start
    ok = worst <= 1e-10 and within and slope >= -1.0 and seconds < 120
    verdict(8, ok, f"max |arg_rho - arg_-| = {worst:.2e}, fitted c = {c:.3f}, "
            f"ratio slope in rho {slope:.3f}, max ratios {ratios}, {seconds:.1f}s")


def _arc_configuration(rng):
    """Two overlapping arcs with all four endpoints at least 0.2 apart, plus eigen-angles
    kept 0.3 away from every endpoint."""
    while True:
        a = rng.uniform(-np.pi, np.pi)
        I = Arc(a, rng.uniform(1.0, 2.0))
        J = Arc(a + rng.uniform(0.4, I.length - 0.4), rng.uniform(1.0, 2.0))
        ends = np.array([I.start, I.end, J.start, J.end])
        d = np.abs(np.angle(np.exp(1j * (ends[:, None] - ends[None, :]))))
        if np.min(d[np.triu_indices(4, 1)]) >= 0.2:
            return I, J, ends


def _angles_away(rng, n, ends, margin=0.3):
    out = []
    while len(out) < n:
        t = rng.uniform(-np.pi, np.pi)
        if np.min(np.abs(np.angle(np.exp(1j * (t - ends))))) >= margin:
            out.append(t)
    return np.array(out)


def test_criterion_9_perturbation(verdict):
    rng = np.random.default_rng(909)
    start = time.perf_counter()
    sizes = (1e-1, 1e-2, 1e-3)
    bump_vals = {s: [] for s in sizes}
    comm_vals = {s: [] for s in sizes}
    trials = 0
    for k in range(500):
        size = sizes[k % 3]
        n = int(rng.integers(3, 13))
        I, J, ends = _arc_configuration(rng)
        x = haar(rng, n)
        u1 = (x * np.exp(1j * _angles_away(rng, n, ends))) @ x.conj().T
        h = gue(rng, n)
        u2 = expi(h / opnorm(h), 2 * math.asin(size / 2)) @ u1
        dist = opnorm(u1 - u2)
        # bumps with supports 0.2 apart: plateaus on I and on an arc opposite to it
        far = Arc(I.end + 0.4, 2 * np.pi - I.length - 0.8)
        g1 = plateau_bump([I], [1.0], 0.2)
        g2 = plateau_bump([far], [1.0], 0.2)
        bump = opnorm(g1.apply(u1) @ g2.apply(u2))
        p = spectral_projection(u1, I)
        q = spectral_projection(u2, J)
        comm = opnorm(p @ q - q @ p)
        bump_vals[size].append(bump / dist * size)
        comm_vals[size].append(comm / dist * size)
        trials += 1
    xs = list(sizes)
    bump_slope = loglog_slope(xs, [max(np.mean(bump_vals[s]), 1e-300) for s in xs])
    comm_slope = loglog_slope(xs, [np.mean(comm_vals[s]) for s in xs])
    seconds = time.perf_counter() - start
    ok = trials == 500 and bump_slope >= 0.9 and comm_slope >= 0.9 and seconds < 180
    verdict(9, ok, f"{trials} trials, slope of ||g1(u1) g2(u2)|| {bump_slope:.3f}, "
            f"slope of ||[1_I(u1), 1_J(u2)]|| {comm_slope:.3f}, {seconds:.1f}s")
