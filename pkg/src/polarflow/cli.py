"""Command line entry point: ``polarflow <command> [options]``."""

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assignment import solve_assignment, squared_distance_costs, verify_optimality
from .dynamics import ConfigError, evolve, spring_force
from .io import axis_names, load_config, read_points_csv, sha256, write_csv, write_json
from .polar import DOMAINS, convex_potential, make_grid, project_to_s
from .reference import (
    VerificationReport,
    action_of_discrete_path,
    generalized_action,
    generalized_quadrature,
    rotation_flow,
    rotation_path,
    rotation_pressure_gradient,
    verify_generalized_solution,
)
from .vp1d import cold_oscillation_period, sheet_force, uniform_background


class _Output:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, *args):
        if not self.quiet:
            print(*args)

    def warn(self, msg):
        print(f"WARNING: {msg}", file=sys.stderr)


def _grid_from_args(args):
    return make_grid(args.domain, args.n_per_axis)


def cmd_grid(args, out):
    grid = _grid_from_args(args)
    d = Path(args.out)
    csv_path = write_csv(d / "grid.csv", ["index", *"xyz"[:grid.dim]],
                         ([k, *p] for k, p in enumerate(grid.points)))
    meta = {
        "domain": grid.domain,
        "n_per_axis": grid.n_per_axis,
        "n_points": grid.n_points,
        "dim": grid.dim,
        "spacing": grid.spacing.tolist(),
        "cell_measure": grid.cell_measure,
        "csv_sha256": sha256(csv_path),
    }
    write_json(d / "grid.json", meta)
    out(f"wrote {grid.n_points} points to {csv_path}")
    return 0


def cmd_project(args, out):
    grid = _grid_from_args(args)
    M = read_points_csv(args.map)
    if M.shape != (grid.n_points, grid.dim):
        raise ValueError(f"{args.map}: map has shape {M.shape}, grid needs ({grid.n_points}, {grid.dim})")
    _, result = project_to_s(M, grid)
    phi = convex_potential(M, result).phi_values
    costs = squared_distance_costs(M, grid.points)
    report = verify_optimality(costs, result)
    d = Path(args.out)
    header = ["index"] + axis_names("a", grid.dim) + axis_names("m", grid.dim) + ["sigma", "u", "phi"]
    rows = ([k, *grid.points[k], *M[k], result.sigma[k], result.u[k], phi[k]] for k in range(grid.n_points))
    write_csv(d / "pairing.csv", header, rows)
    cert = report.to_dict()
    cert["total_cost"] = result.total_cost
    cert["n_points"] = grid.n_points
    write_json(d / "certificate.json", cert)
    out(f"total cost {result.total_cost:.17g}; certificate {'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def cmd_evolve(args, out):
    if not args.config:
        raise ConfigError("config", "evolve needs --config PATH")
    cfg = load_config(args.config)
    started = time.perf_counter()
    traj, diag = evolve(cfg)
    elapsed = time.perf_counter() - started
    grid = traj.grid
    d = Path(args.out)
    written = []
    header = ["time", "alpha"] + axis_names("a", grid.dim) + axis_names("m", grid.dim) \
        + axis_names("v", grid.dim) + ["sigma"]
    for k, snap in enumerate(traj.snapshots):
        rows = ([snap.time, a, *grid.points[a], *snap.positions[a], *snap.velocities[a], snap.sigma[a]]
                for a in range(grid.n_points))
        written.append(write_csv(d / "snapshots" / f"snapshot_{k:05d}.csv", header, rows))
    diag_header = ["time", "H", "K", "U", "switches"]
    columns = [diag.time, diag.hamiltonian, diag.kinetic, diag.potential, diag.switches]
    if diag.deviation is not None:
        diag_header.append("l2_deviation")
        columns.append(diag.deviation)
    written.append(write_csv(d / "diagnostics.csv", diag_header, zip(*columns)))
    manifest = {
        "version": __version__,
        "config": cfg.as_dict(),
        "artifacts": {str(p.relative_to(d)): sha256(p) for p in written},
        "duration_seconds": elapsed,
        "n_points": grid.n_points,
        "final_hamiltonian": diag.hamiltonian[-1],
        "final_l2_deviation": diag.deviation[-1] if diag.deviation else None,
    }
    write_json(d / "manifest.json", manifest)
    out(f"evolved {grid.n_points} particles to t={cfg.t_final} in {elapsed:.2f}s; outputs in {d}")
    if diag.deviation:
        out(f"final L2 deviation from rotation: {diag.deviation[-1]:.17g}")
    return 0


def _rotation_report(n_per_axis, dt_fd=1e-3, tol=1e-4):
    report = VerificationReport()
    pts = make_grid("disk", n_per_axis).points
    z = pts[:, 0] + 1j * pts[:, 1]
    for sign in (1, -1):
        end = np.abs(rotation_flow(1.0, z, sign) + z).max()
        report.add(f"endpoint_{'+' if sign > 0 else '-'}", end, end <= 1e-12)
    half = np.abs(rotation_flow(0.5, z, 1) - 1j * z).max()
    report.add("quarter_turn", half, half <= 1e-12)
    # acceleration of both solutions equals minus the common pressure gradient
    worst = 0.0
    for sign in (1, -1):
        for t in np.linspace(0.1, 0.9, 9):
            acc = (rotation_flow(t + dt_fd, z, sign) - 2 * rotation_flow(t, z, sign)
                   + rotation_flow(t - dt_fd, z, sign)) / dt_fd ** 2
            g = rotation_flow(t, z, sign)
            grad = rotation_pressure_gradient(np.stack([g.real, g.imag], axis=1))
            worst = max(worst, np.abs(acc + (grad[:, 0] + 1j * grad[:, 1])).max())
    report.add("pressure_law", worst, worst <= tol)
    a_plus = action_of_discrete_path(rotation_path(pts, 200, 1))
    a_minus = action_of_discrete_path(rotation_path(pts, 200, -1))
    report.add("equal_actions", abs(a_plus - a_minus), abs(a_plus - a_minus) <= 1e-12 * a_plus)
    return report


def cmd_verify_reference(args, out):
    if args.which == "rotation":
        report = _rotation_report(args.n_per_axis)
    elif args.which == "generalized":
        samples = generalized_quadrature(args.n_per_axis, args.angles, radius_scale=args.corrupt_radius)
        report = verify_generalized_solution(samples, dt_fd=args.dt_fd, tol=args.tol)
    else:
        pts = make_grid("disk", args.n_per_axis).points
        classical = action_of_discrete_path(rotation_path(pts, args.frames))
        general = generalized_action(args.n_per_axis, args.angles, args.frames)
        target = math.pi ** 2 / 4
        report = VerificationReport()
        report.add("rotation_action_vs_pi2_over_4", abs(classical / target - 1), abs(classical / target - 1) <= 0.02)
        report.add("generalized_vs_rotation", abs(general / classical - 1), abs(general / classical - 1) <= 0.02)
        out(f"rotation action {classical:.17g} (pi^2/4 = {target:.17g})")
        out(f"generalized action {general:.17g}")
    payload = report.to_dict()
    payload["which"] = args.which
    if args.out:
        write_json(Path(args.out) / f"verify_{args.which}.json", payload)
    out(json.dumps(payload, indent=2))
    return 0 if report.passed else 1


def cmd_vp1d(args, out):
    if args.which == "period":
        res = cold_oscillation_period(args.amplitude, args.epsilon,
                                      args.dt or 2 * math.pi * args.epsilon / 200, args.particles)
        out(f"measured period {res.period:.17g}")
        out(f"expected 2*pi*eps {res.expected:.17g}")
        out(f"relative error {res.relative_error:.3e}")
        if res.reordered:
            out.warn("particle order changed during the run; the period is not guaranteed")
        payload = {"period": res.period, "expected": res.expected,
                   "relative_error": res.relative_error, "reordered": res.reordered}
        ok = not res.reordered and res.relative_error < 0.01
    else:
        rng = np.random.default_rng(args.seed)
        b = uniform_background(args.particles)
        worst = 0.0
        for _ in range(args.states):
            x = rng.random(args.particles)
            sigma = solve_assignment(squared_distance_costs(x, b)).sigma
            f_assign = spring_force(x[:, None], b[sigma][:, None], args.epsilon)[:, 0]
            worst = max(worst, float(np.max(np.abs(sheet_force(x, b, args.epsilon) - f_assign))))
        out(f"max force discrepancy over {args.states} states: {worst:.3e}")
        payload = {"max_discrepancy": worst, "states": args.states, "particles": args.particles}
        ok = worst <= 1e-12
    if args.out:
        write_json(Path(args.out) / f"vp1d_{args.which}.json", payload)
    return 0 if ok else 1


def _common(p):
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--quiet", action="store_true", help="suppress normal output")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="polarflow", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = _common(sub.add_parser("grid", help="write grid points"))
    p.add_argument("--domain", choices=DOMAINS, default="square")
    p.add_argument("--n-per-axis", type=int, default=8)
    p.set_defaults(func=cmd_grid, out_required=True)

    p = _common(sub.add_parser("project", help="project a map onto grid rearrangements"))
    p.add_argument("--map", required=True, help="CSV of map samples, one row per grid point")
    p.add_argument("--domain", choices=DOMAINS, default="square")
    p.add_argument("--n-per-axis", type=int, default=8)
    p.set_defaults(func=cmd_project, out_required=True)

    p = _common(sub.add_parser("evolve", help="integrate a particle scenario"))
    p.add_argument("--config", help="flat key = value scenario file")
    p.set_defaults(func=cmd_evolve, out_required=True)

    p = _common(sub.add_parser("verify-reference", help="check closed-form reference solutions"))
    p.add_argument("which", choices=("rotation", "generalized", "action"))
    p.add_argument("--n-per-axis", type=int, default=None)
    p.add_argument("--angles", type=int, default=None)
    p.add_argument("--dt-fd", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--corrupt-radius", type=float, default=1.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_reference, out_required=False)

    p = _common(sub.add_parser("vp1d", help="one-dimensional sheet model checks"))
    p.add_argument("which", choices=("period", "equivalence"))
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--amplitude", type=float, default=1e-3)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--particles", type=int, default=None)
    p.add_argument("--states", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_vp1d, out_required=False)
    return parser


_DEFAULTS = {
    "rotation": {"n_per_axis": 16, "angles": 32},
    "generalized": {"n_per_axis": 32, "angles": 32},
    "action": {"n_per_axis": 64, "angles": 64},
    "period": {"particles": 64},
    "equivalence": {"particles": 100},
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, value in _DEFAULTS.get(getattr(args, "which", None), {}).items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    if args.out_required and not args.out:
        parser.error(f"{args.command} needs --out DIR")
    out = _Output(args.quiet)
    try:
        return args.func(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
