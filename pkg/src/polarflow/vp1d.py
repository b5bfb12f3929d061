"""One-dimensional sheet model.

In one dimension the optimal pairing of particles with background points is
the sorted one, so the spring system is an electrostatic sheet model: the
k-th particle from the left is pulled toward the k-th background point.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import SizeError


@dataclass
class PhaseSamples:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.xi = np.asarray(self.xi, dtype=float).ravel()
        if self.x.shape != self.xi.shape:
            raise SizeError("positions and velocities must have the same length")

    @property
    def weights(self):
        return np.full(self.x.size, 1.0 / self.x.size)


def _check_background(background):
    b = np.asarray(background, dtype=float).ravel()
    if np.any(np.diff(b) <= 0):
        raise ValueError("background points must be sorted and distinct")
    return b


def sheet_force(x, background, epsilon):
    """Force ``-(x_a - b_rank(a)) / eps^2`` with particles ranked by position."""
    x = np.asarray(x, dtype=float).ravel()
    b = _check_background(background)
    if x.shape != b.shape:
        raise SizeError(f"{x.size} particles for {b.size} background points")
    order = np.argsort(x, kind="stable")
    matched = np.empty_like(b)
    matched[order] = b
    return -(x - matched) / epsilon ** 2


def uniform_background(n):
    return (np.arange(n) + 0.5) / n


def evolve_sheets(x, xi, background, epsilon, dt, n_steps, callback=None):
    """Velocity Verlet for the sheet model, ranks frozen within each step.

    Returns ``(PhaseSamples, reordered)`` where ``reordered`` reports whether
    the left-to-right order of the particles ever changed. ``callback(k, x,
    xi)`` is called after every step.
    """
    b = _check_background(background)
    x = np.asarray(x, dtype=float).copy()
    xi = np.asarray(xi, dtype=float).copy()
    initial = np.argsort(x, kind="stable")
    reordered = False
    for k in range(1, n_steps + 1):
        order = np.argsort(x, kind="stable")
        matched = np.empty_like(b)
        matched[order] = b
        F = -(x - matched) / epsilon ** 2
        x = x + dt * xi + 0.5 * dt * dt * F
        xi = xi + 0.5 * dt * (F - (x - matched) / epsilon ** 2)
        if not reordered and not np.array_equal(np.argsort(x, kind="stable"), initial):
            reordered = True
        if callback is not None:
            callback(k, x, xi)
    return PhaseSamples(x, xi), reordered


@dataclass
class OscillationResult:
    period: float
    expected: float
    reordered: bool

    @property
    def relative_error(self):
        return abs(self.period - self.expected) / self.expected


def cold_oscillation_period(amplitude, epsilon, dt, n_particles=64, max_periods=3.0):
    """Period of a cold beam displaced by ``amplitude * sin(2 pi b)``.

    The tracked signal is the projection of the displacement on the initial
    profile, ``D(t) = amplitude * cos(t / eps)`` while the order is kept.
    The period is the time between its first and third zero crossings,
    located by linear interpolation.
    """
    b = uniform_background(n_particles)
    profile = np.sin(2.0 * math.pi * b)
    norm = float(profile @ profile)
    x0 = b + amplitude * profile
    expected = 2.0 * math.pi * epsilon
    n_steps = int(math.ceil(max_periods * expected / dt))
    crossings = []
    prev = [0.0, 1.0]

    def track(k, x, xi):
        d = float((x - b) @ profile) / norm / amplitude
        t = k * dt
        if len(crossings) < 3 and (prev[1] > 0) != (d > 0):
            crossings.append(prev[0] + dt * prev[1] / (prev[1] - d))
        prev[0], prev[1] = t, d

    _, reordered = evolve_sheets(x0, np.zeros(n_particles), b, epsilon, dt, n_steps, track)
    period = crossings[2] - crossings[0] if len(crossings) >= 3 else float("nan")
    return OscillationResult(period=period, expected=expected, reordered=reordered)


@dataclass
class PhaseHistogram:
    mass: np.ndarray
    x_edges: np.ndarray
    xi_edges: np.ndarray
    clipped_mass: float

    @property
    def inside_mass(self):
        return float(self.mass.sum())

    def sidecar(self):
        return {
            "x_edges": self.x_edges.tolist(),
            "xi_edges": self.xi_edges.tolist(),
            "inside_mass": self.inside_mass,
            "clipped_mass": self.clipped_mass,
        }


def phase_histogram(samples, x_bins, xi_bins, xi_range, x_range=(0.0, 1.0)):
    """Normalized (x, xi) histogram; rows are x bins, columns xi bins.

    Samples outside the ranges are not binned; their share is
    ``clipped_mass``.
    """
    if x_bins < 1 or xi_bins < 1:
        raise ValueError("bin counts must be >= 1")
    lo, hi = xi_range
    if not hi > lo:
        raise ValueError("xi_range must be increasing")
    counts, xe, ve = np.histogram2d(samples.x, samples.xi, bins=[x_bins, xi_bins],
                                    range=[list(x_range), [lo, hi]])
    total = samples.x.size
    inside = int(counts.sum())
    return PhaseHistogram(counts / total, xe, ve, (total - inside) / total)


def histogram_moments(hist):
    """Mean and standard deviation of xi from a phase histogram."""
    centers = 0.5 * (hist.xi_edges[:-1] + hist.xi_edges[1:])
    w = hist.mass.sum(axis=0)
    mean = float(w @ centers / w.sum())
    var = float(w @ (centers - mean) ** 2 / w.sum())
    return mean, math.sqrt(var)
