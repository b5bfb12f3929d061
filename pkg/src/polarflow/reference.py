"""Closed-form reference flows on the disk and cylinder, with verifiers.

Complex numbers stand for horizontal positions on the unit disk.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, SizeError
from .polar import make_grid

PI2 = math.pi ** 2


def rotation_flow(t, z, orientation=1):
    """Rigid half-turn paths from the identity to ``z -> -z``."""
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    return np.asarray(z) * np.exp(orientation * 1j * math.pi * np.asarray(t))


def rotation_pressure_gradient(x):
    """Gradient of ``p = pi^2 |z|^2 / 2``; the vertical component is zero."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    g[..., :2] = PI2 * x[..., :2]
    return g


@dataclass
class GeneralizedSample:
    """One split fluid particle of the cylinder solution.

    The horizontal position spreads over a circle of radius
    ``sqrt(1 - |z|^2) sin(pi t)`` centred at ``z cos(pi t)``; ``omega`` picks
    the point on that circle. ``radius_scale`` exists only to build
    deliberately corrupted samples.
    """

    z: complex
    s: float
    omega: complex
    radius_scale: float = 1.0

    def position(self, t):
        t = np.asarray(t, dtype=float)
        radius = self.radius_scale * math.sqrt(max(0.0, 1.0 - abs(self.z) ** 2))
        return self.z * np.cos(math.pi * t) + radius * np.sin(math.pi * t) * self.omega

    def elevation(self, t):
        return np.full(np.shape(t), self.s, dtype=float)

    __call__ = position


def generalized_cylinder_sample(z, s, omega, radius_scale=1.0):
    z = complex(z)
    omega = complex(omega)
    if abs(z) > 1.0 + 1e-12:
        raise DomainError(f"|z| = {abs(z)} exceeds 1")
    if abs(abs(omega) - 1.0) > 1e-12:
        raise DomainError(f"omega must be a unit complex number, |omega| = {abs(omega)}")
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"elevation {s} outside [0, 1]")
    return GeneralizedSample(z=z, s=float(s), omega=omega, radius_scale=radius_scale)


def generalized_quadrature(n_per_axis=32, n_angles=32, s=0.5, radius_scale=1.0):
    """Samples on the retained-cell disk grid times uniform splitting angles."""
    disk = make_grid("disk", n_per_axis).points
    zs = disk[:, 0] + 1j * disk[:, 1]
    omegas = np.exp(2j * math.pi * np.arange(n_angles) / n_angles)
    return [GeneralizedSample(complex(z), s, complex(w), radius_scale) for z in zs for w in omegas]


@dataclass
class CheckResult:
    name: str
    max_residual: float
    passed: bool


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, residual, passed):
        self.checks.append(CheckResult(name, float(residual), bool(passed)))

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "max_residual": c.max_residual, "pass": c.passed}
                       for c in self.checks],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _stack(samples):
    z = np.array([smp.z for smp in samples])
    w = np.array([smp.omega for smp in samples])
    r = np.array([smp.radius_scale * math.sqrt(max(0.0, 1.0 - abs(smp.z) ** 2)) for smp in samples])
    s = np.array([smp.s for smp in samples])
    return z, w, r, s


def verify_generalized_solution(samples, dt_fd=1e-3, tol=1e-4, n_times=101, endpoint_tol=1e-12):
    """Check endpoint, acceleration law, circle radius and elevation.

    The acceleration residual ``|X'' + pi^2 X|`` uses a centred second
    difference with step ``dt_fd`` at ``n_times`` points of ``[dt_fd, 1-dt_fd]``.
    """
    z, w, r, s = _stack(samples)
    t = np.linspace(dt_fd, 1.0 - dt_fd, n_times)[:, None]

    def X(tt):
        return z * np.cos(math.pi * tt) + r * np.sin(math.pi * tt) * w

    report = VerificationReport()
    end = np.abs(X(np.array([[1.0]]))[0] + z)
    report.add("endpoint", end.max(), end.max() <= endpoint_tol)

    acc = (X(t + dt_fd) - 2.0 * X(t) + X(t - dt_fd)) / dt_fd ** 2
    res = np.abs(acc + PI2 * X(t))
    report.add("acceleration", res.max(), res.max() <= tol)

    expected = np.sqrt(np.clip(1.0 - np.abs(z) ** 2, 0.0, None)) * np.sin(math.pi * t)
    rad = np.abs(np.abs(X(t) - z * np.cos(math.pi * t)) - expected)
    report.add("radius", rad.max(), rad.max() <= endpoint_tol)

    tt = t.ravel()
    elev = max(float(np.max(np.abs(smp.elevation(tt) - s0))) for smp, s0 in zip(samples, s))
    in_range = bool(np.all((s >= 0.0) & (s <= 1.0)))
    report.add("elevation", elev, in_range and elev == 0.0)
    return report


def acceleration_residual(samples, dt_fd, n_times=101):
    """Largest ``|X''_fd + pi^2 X|`` over samples and interior times."""
    report = verify_generalized_solution(samples, dt_fd=dt_fd, tol=np.inf, n_times=n_times)
    return next(c.max_residual for c in report.checks if c.name == "acceleration")


@dataclass
class DiscretePath:
    """Particle positions ``frames[k]`` (N x d) at increasing ``times[k]``."""

    times: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        frames = np.asarray(self.frames)
        if np.iscomplexobj(frames):
            frames = np.stack([frames.real, frames.imag], axis=-1)
        if frames.ndim == 2:
            frames = frames[..., None]
        self.frames = frames.astype(float)
        if self.times.ndim != 1 or len(self.times) != len(self.frames):
            raise SizeError("one frame per time is required")
        if len(self.times) < 2:
            raise ValueError("a path needs at least two frames")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def _interval_energy(a, b, dt, weights):
    vel = (b - a) / dt
    return 0.5 * dt * np.dot(weights, np.sum(vel * vel, axis=-1))


def action_of_discrete_path(path, weights=None):
    """Kinetic action ``1/2 int sum_a w_a |dM_a/dt|^2 dt``, midpoint rule.

    Each interval contributes its chord velocity, i.e. the velocity at the
    interval midpoint.
    """
    n = path.frames.shape[1]
    if weights is None:
        weights = np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise SizeError("one weight per particle is required")
    total = 0.0
    for k in range(len(path.times) - 1):
        total += _interval_energy(path.frames[k], path.frames[k + 1],
                                  path.times[k + 1] - path.times[k], weights)
    return float(total)


def rotation_path(points, n_frames=200, orientation=1):
    """Discrete path of the rigid half-turn applied to 2D points."""
    z = points[:, 0] + 1j * points[:, 1]
    times = np.linspace(0.0, 1.0, n_frames)
    return DiscretePath(times, rotation_flow(times[:, None], z[None, :], orientation))


def rotation_action(n_per_axis=16, n_frames=200, orientation=1):
    return action_of_discrete_path(rotation_path(make_grid("disk", n_per_axis).points,
                                                 n_frames, orientation))


def generalized_action(n_per_axis=64, n_angles=64, n_frames=200):
    """Action of the split-particle solution with uniform weights over
    (disk cell, splitting angle), accumulated interval by interval."""
    disk = make_grid("disk", n_per_axis).points
    z = (disk[:, 0] + 1j * disk[:, 1])[:, None]
    w = np.exp(2j * math.pi * np.arange(n_angles) / n_angles)[None, :]
    r = np.sqrt(np.clip(1.0 - np.abs(z) ** 2, 0.0, None))
    times = np.linspace(0.0, 1.0, n_frames)
    weights = np.full(z.size * n_angles, 1.0 / (z.size * n_angles))

    def frame(t):
        X = (z * math.cos(math.pi * t) + r * math.sin(math.pi * t) * w).ravel()
        return np.stack([X.real, X.imag], axis=-1)

    total = 0.0
    prev = frame(times[0])
    for k in range(1, n_frames):
        cur = frame(times[k])
        total += _interval_energy(prev, cur, times[k] - times[k - 1], weights)
        prev = cur
    return float(total)


def lift_2d_map(H, grid3d):
    """Extend a horizontal map to a 3D grid: ``h(x, s) = (H(x), s)``.

    ``H`` lists the image of each point of one horizontal layer of
    ``grid3d`` (same order); the result covers every layer.
    """
    if grid3d.dim != 3:
        raise SizeError("lift_2d_map needs a three-dimensional grid")
    H = np.asarray(H, dtype=float)
    layers = grid3d.n_per_axis
    per_layer = grid3d.n_points // layers
    if H.shape != (per_layer, 2) or per_layer * layers != grid3d.n_points:
        raise SizeError(f"H must have shape ({per_layer}, 2) to match the grid layers, got {H.shape}")
    out = grid3d.points.copy()
    out[:, :2] = np.tile(H, (layers, 1))
    return out


def layer_trace(grid3d):
    """Horizontal coordinates of the bottom layer of a 3D grid."""
    per_layer = grid3d.n_points // grid3d.n_per_axis
    return grid3d.points[:per_layer, :2].copy()
