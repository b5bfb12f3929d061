"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import filecmp
import math
import time
from contextlib import contextmanager

import numpy as np

from conftest import ACCEPTANCE_LINES
from polarflow.assignment import (
    brute_force_assignment,
    solve_assignment,
    sorted_assignment_1d,
    squared_distance_costs,
    verify_optimality,
)
from polarflow.cli import main
from polarflow.dynamics import (
    ParticleState,
    ScenarioConfig,
    evolve,
    pressure_estimate,
    pressure_slope,
    spring_force,
    spring_potential,
    step_verlet,
)
from polarflow.polar import PointCloud, empirical_density, make_grid, monge_ampere_residual, project_to_s
from polarflow.reference import (
    acceleration_residual,
    generalized_action,
    generalized_quadrature,
    rotation_action,
    verify_generalized_solution,
)
from polarflow.vp1d import cold_oscillation_period, sheet_force, uniform_background

from test_cli import CONFIGS


@contextmanager
def criterion(tag, title, limit):
    """Time the body, then record and assert one PASS/FAIL line.

    The body yields a dict; it sets ``ok`` and an optional ``detail``.
    """
    out = {"ok": False, "detail": ""}
    start = time.perf_counter()
    try:
        yield out
    finally:
        elapsed = time.perf_counter() - start
        in_time = limit is None or elapsed < limit
        ok = out["ok"] and in_time
        budget = f"{elapsed:.1f}s" + (f" / {limit:.0f}s" if limit else "")
        line = f"{tag} {'PASS' if ok else 'FAIL'} {title}: {out['detail']} [{budget}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
    assert out["ok"], line
    assert in_time, line


def test_ac1_assignment_exactness():
    rng = np.random.default_rng(1)
    with criterion("AC1", "assignment exactness", 10) as r:
        mismatches = failed_certs = 0
        for n in range(2, 9):
            for _ in range(200):
                C = rng.random((n, n)) * rng.choice([1.0, 10.0, 100.0])
                res = solve_assignment(C)
                mismatches += res.total_cost != brute_force_assignment(C).total_cost
                failed_certs += not verify_optimality(C, res, tol=1e-9 * (1 + C.max())).passed
        r["ok"] = mismatches == 0 and failed_certs == 0
        r["detail"] = f"{mismatches} cost mismatches, {failed_certs} failed certificates over 1400 instances"


def test_ac2_monotone_rearrangement_1d():
    rng = np.random.default_rng(2)
    with criterion("AC2", "1D monotone rearrangement", 1) as r:
        bad = 0
        for _ in range(100):
            n = int(rng.integers(2, 9))
            x, y = rng.normal(size=n), rng.normal(size=n)
            C = squared_distance_costs(x, y)
            a = solve_assignment(C).sigma.tolist()
            b = sorted_assignment_1d(x, y).sigma.tolist()
            c = brute_force_assignment(C).sigma.tolist()
            bad += not (a == b == c)
        r["ok"] = bad == 0
        r["detail"] = f"{bad}/100 disagreements"


def test_ac3_projection_idempotence():
    rng = np.random.default_rng(3)
    with criterion("AC3", "projection idempotence and zero-cost arrangements", 1) as r:
        issues = []
        for domain, n in [("square", 6), ("disk", 8), ("cube", 3)]:
            g = make_grid(domain, n)
            M = rng.normal(size=(g.n_points, g.dim))
            R, _ = project_to_s(M, g)
            R2, res2 = project_to_s(R, g)
            if res2.total_cost != 0.0 or not np.array_equal(R, R2):
                issues.append(f"idempotence {domain}")
            perm = rng.permutation(g.n_points)
            _, res = project_to_s(g.points[perm], g)
            if res.total_cost != 0.0 or not np.array_equal(res.sigma, perm):
                issues.append(f"permutation {domain}")
        n = 8
        g = make_grid("square", n)
        i, j = g.lattice_index.T
        turn = (n - 1 - j) + n * i
        _, res = project_to_s(g.points[turn], g)
        if res.total_cost != 0.0 or not np.array_equal(res.sigma, turn):
            issues.append("quarter turn")
        r["ok"] = not issues
        r["detail"] = "all exact" if not issues else ", ".join(issues)


def _inverse_gradient(y, amp):
    # solve x - 2 pi amp sin(2 pi x) = y by Newton
    x = y.copy()
    for _ in range(50):
        f = x - 2 * math.pi * amp * np.sin(2 * math.pi * x) - y
        x -= f / (1 - 4 * math.pi ** 2 * amp * np.cos(2 * math.pi * x))
    return x


def _ma_residual(n, amp=0.01):
    g = make_grid("square", n)
    phi = 0.5 * (g.points ** 2).sum(axis=1) + amp * np.cos(2 * math.pi * g.points[:, 0])
    # samples of the measure pushed to uniform by grad Phi, n per cell and axis
    m = n * n
    u = (np.arange(m) + 0.5) / m
    x1, x2 = np.meshgrid(_inverse_gradient(u, amp), u, indexing="ij")
    density = empirical_density(np.stack([x1.ravel(), x2.ravel()], axis=1), g)
    return monge_ampere_residual(phi, density)


def test_ac4_monge_ampere_trend():
    with criterion("AC4", "Monge-Ampere residual trend", 30) as r:
        r16, r32 = _ma_residual(16), _ma_residual(32)
        r["ok"] = r32 <= r16 / 1.5
        r["detail"] = f"residual n=16 {r16:.4g}, n=32 {r32:.4g}, ratio {r16 / r32:.2f} (need >= 1.5)"


def _single_oscillator_period(eps, d=0.1):
    grid = PointCloud("custom", 1, np.zeros((1, 2)), np.zeros((1, 2), dtype=np.int64),
                      -np.ones(2), np.ones(2))
    dt = 2 * math.pi * eps / 200
    s = ParticleState(np.array([[d, 0.0]]), np.zeros((1, 2)), 0.0, eps, np.array([0]))
    xs = [d]
    for _ in range(450):
        s = step_verlet(s, grid, dt)
        xs.append(s.positions[0, 0])
    x = np.array(xs)
    k = np.nonzero(np.sign(x[1:]) != np.sign(x[:-1]))[0]
    cross = (k + x[k] / (x[k] - x[k + 1])) * dt
    return cross[2] - cross[0]


def test_ac5_oscillator_period():
    with criterion("AC5", "oscillator period", 5) as r:
        parts, ok = [], True
        for eps in (0.05, 0.1):
            expected = 2 * math.pi * eps
            e1 = abs(_single_oscillator_period(eps) / expected - 1)
            beam = cold_oscillation_period(1e-3, eps, expected / 200)
            ok &= e1 < 0.01 and beam.relative_error < 0.01 and not beam.reordered
            parts.append(f"eps={eps}: N=1 err {e1:.1e}, beam err {beam.relative_error:.1e}")
        r["ok"] = ok
        r["detail"] = "; ".join(parts)


def test_ac6_sheet_equivalence():
    rng = np.random.default_rng(6)
    with criterion("AC6", "1D sheet/assignment force equivalence", 5) as r:
        b = uniform_background(100)
        worst = 0.0
        for _ in range(50):
            x = rng.random(100)
            sigma = solve_assignment(squared_distance_costs(x, b)).sigma
            ref = spring_force(x[:, None], b[sigma][:, None], 0.1)[:, 0]
            worst = max(worst, float(np.max(np.abs(sheet_force(x, b, 0.1) - ref))))
        r["ok"] = worst <= 1e-12
        r["detail"] = f"max discrepancy {worst:.2e}"


def _rotation_drift(dt, n=12):
    g = make_grid("disk", n)
    eps = 2.0 / n
    cfg = ScenarioConfig(domain="disk", n_per_axis=n, epsilon=eps, dt=dt, t_final=1.0,
                         velocity_field="rigid_rotation", switching="event")
    _, diag = evolve(cfg, g)
    h = 2.0 / n
    return diag.relative_drift(max(diag.hamiltonian[0], h ** 2 / eps ** 2))


def _frozen_oscillator_error(dt, eps=0.1, d=0.05):
    grid = PointCloud("custom", 1, np.zeros((1, 2)), np.zeros((1, 2), dtype=np.int64),
                      -np.ones(2), np.ones(2))
    s = ParticleState(np.array([[d, 0.0]]), np.zeros((1, 2)), 0.0, eps, np.array([0]))
    E0 = d ** 2 / (2 * eps ** 2)
    worst = 0.0
    for _ in range(int(round(1.0 / dt))):
        s = step_verlet(s, grid, dt, policy="every_k_steps(inf)")
        E = 0.5 * np.sum(s.velocities ** 2) + spring_potential(s.positions, grid.points[s.sigma], eps)
        worst = max(worst, abs(E - E0) / E0)
    return worst


def test_ac7_energy_behaviour():
    with criterion("AC7", "energy drift order", 120) as r:
        base = 2 * math.pi * (2.0 / 12) / 200
        drifts = [_rotation_drift(base / 2 ** k) for k in range(3)]
        orders = [math.log2(drifts[k] / drifts[k + 1]) for k in range(2)]
        fbase = 2 * math.pi * 0.1 / 50
        frozen = [_frozen_oscillator_error(fbase / 2 ** k) for k in range(3)]
        forders = [math.log2(frozen[k] / frozen[k + 1]) for k in range(2)]
        r["ok"] = min(orders) >= 1.9 and min(forders) >= 1.9
        r["detail"] = (f"rotation orders {orders[0]:.3f}, {orders[1]:.3f}; "
                       f"frozen oscillator orders {forders[0]:.3f}, {forders[1]:.3f}")


def test_ac8_euler_limit_trend():
    with criterion("AC8", "Euler-limit deviation trend", 300) as r:
        devs = []
        for n in (8, 12, 16):
            cfg = ScenarioConfig(domain="disk", n_per_axis=n, t_final=1.0,
                                 velocity_field="rigid_rotation", switching="event")
            _, diag = evolve(cfg)
            devs.append(diag.deviation[-1])
        r["ok"] = devs[0] > devs[1] > devs[2]
        r["detail"] = "L2 deviation n=8,12,16: " + ", ".join(f"{d:.4f}" for d in devs)


def test_ac9_pressure_slope():
    with criterion("AC9", "pressure slope", 120) as r:
        n = 16
        cfg = ScenarioConfig(domain="disk", n_per_axis=n, t_final=1.0, velocity_field="rigid_rotation",
                             switching="event", snapshot_every=1)
        traj, _ = evolve(cfg)
        g, eps = traj.grid, cfg.resolved().epsilon
        slopes = []
        for snap in traj.snapshots[1:]:
            st = ParticleState(snap.positions, snap.velocities, snap.time, eps, snap.sigma)
            slopes.append(pressure_slope(*pressure_estimate(st, g)))
        ratio = float(np.mean(slopes)) / math.pi ** 2
        r["ok"] = abs(ratio - 1) <= 0.15
        r["detail"] = f"time-averaged slope / pi^2 = {ratio:.3f} (need 0.85..1.15)"


def test_ac10_generalized_verifier():
    with criterion("AC10", "generalized solution verifier", 30) as r:
        samples = generalized_quadrature(32, 32)
        report = verify_generalized_solution(samples, dt_fd=1e-3, tol=1e-4)
        endpoint = next(c.max_residual for c in report.checks if c.name == "endpoint")
        res = [acceleration_residual(samples, 4e-3 / 2 ** k) for k in range(3)]
        orders = [math.log2(res[k] / res[k + 1]) for k in range(2)]
        classical = rotation_action(64, 200)
        general = generalized_action(64, 64, 200)
        target = math.pi ** 2 / 4
        agree = abs(general / classical - 1)
        r["ok"] = (report.passed and endpoint <= 1e-12 and all(1.8 <= o <= 2.2 for o in orders)
                   and agree <= 0.02 and abs(classical / target - 1) <= 0.02
                   and abs(general / target - 1) <= 0.02)
        r["detail"] = (f"endpoint {endpoint:.1e}, fd orders {orders[0]:.2f}/{orders[1]:.2f}, "
                       f"actions {classical:.4f} vs {general:.4f} (rel {agree:.2e}; pi^2/4 = {target:.4f})")


def test_ac11_reproducibility(tmp_path):
    with criterion("AC11", "byte-identical reruns", None) as r:
        runs = [tmp_path / "a", tmp_path / "b"]
        codes = [main(["evolve", "--config", str(CONFIGS / "rotation_disk.cfg"), "--out", str(d), "--quiet"])
                 for d in runs]
        files = sorted(p.relative_to(runs[0]) for p in runs[0].rglob("*.csv"))
        same = [filecmp.cmp(runs[0] / f, runs[1] / f, shallow=False) for f in files]
        r["ok"] = codes == [0, 0] and len(files) > 1 and all(same)
        r["detail"] = f"{sum(same)}/{len(files)} CSV files identical"
