"""Permutation-coupled harmonic oscillators.

Each particle ``M_a`` is tied by a spring of stiffness ``1/eps^2`` to the
grid point ``A[sigma_a]``, where ``sigma`` minimizes the total spring
energy. Integration is velocity Verlet with ``sigma`` frozen inside a step.
"""

import math
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .assignment import AssignmentResult, solve_assignment, squared_distance_costs
from .polar import canonical_domain, make_grid
from .reference import rotation_flow

VELOCITY_FIELDS = ("zero", "rigid_rotation", "table")
SWITCHING_MODES = ("boundary", "event")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RefreshPolicy:
    """Re-solve the assignment every ``every`` steps; ``None`` means never
    after the initial one."""

    every: int | None = 1

    @classmethod
    def parse(cls, text):
        if isinstance(text, RefreshPolicy):
            return text
        key = str(text).strip().lower()
        if key == "every_step":
            return cls(1)
        if key in ("never", "every_k_steps(inf)"):
            return cls(None)
        m = re.fullmatch(r"every_k_steps\(\s*(\d+)\s*\)", key)
        if m and int(m.group(1)) >= 1:
            return cls(int(m.group(1)))
        raise ValueError(f"unknown refresh policy {text!r}")

    def due(self, step):
        return self.every is not None and step % self.every == 0

    def __str__(self):
        if self.every is None:
            return "never"
        return "every_step" if self.every == 1 else f"every_k_steps({self.every})"


@dataclass
class ScenarioConfig:
    domain: str = "disk"
    n_per_axis: int = 12
    epsilon: float | None = None
    dt: float | None = None
    t_final: float = 1.0
    velocity_field: str = "zero"
    omega: float = math.pi
    velocity_table: np.ndarray | None = field(default=None, repr=False)
    velocity_noise: float = 0.0
    refresh: str = "every_step"
    switching: str = "boundary"
    seed: int = 0
    snapshot_every: int = 0
    diagnostic_every: int = 1

    def grid(self):
        return make_grid(self.domain, self.n_per_axis)

    def resolved(self):
        """Copy with defaults filled in (``epsilon = h``, ``dt = 2 pi eps / 100``)
        and every field validated."""
        try:
            domain = canonical_domain(self.domain)
        except ValueError as exc:
            raise ConfigError("domain", str(exc)) from None
        if int(self.n_per_axis) != self.n_per_axis or self.n_per_axis < 2:
            raise ConfigError("n_per_axis", f"must be an integer >= 2, got {self.n_per_axis}")
        cfg = replace(self, domain=domain, n_per_axis=int(self.n_per_axis))
        if cfg.epsilon is None:
            cfg.epsilon = float(np.min(cfg.grid().spacing))
        if not (math.isfinite(cfg.epsilon) and cfg.epsilon > 0):
            raise ConfigError("epsilon", f"must be positive and finite, got {cfg.epsilon}")
        period = 2.0 * math.pi * cfg.epsilon
        if cfg.dt is None:
            cfg.dt = period / 100.0
        if not (math.isfinite(cfg.dt) and cfg.dt > 0):
            raise ConfigError("dt", f"must be positive, got {cfg.dt}")
        if cfg.dt > 0.1 * period * (1 + 1e-12):
            raise ConfigError("dt", f"{cfg.dt} does not resolve the spring period (max {0.1 * period})")
        if not (math.isfinite(cfg.t_final) and cfg.t_final >= 0):
            raise ConfigError("t_final", f"must be >= 0, got {cfg.t_final}")
        if cfg.velocity_field not in VELOCITY_FIELDS:
            raise ConfigError("velocity_field", f"unknown field {cfg.velocity_field!r}")
        if cfg.velocity_field == "table" and cfg.velocity_table is None:
            raise ConfigError("velocity_table", "required when velocity_field = table")
        try:
            RefreshPolicy.parse(cfg.refresh)
        except ValueError as exc:
            raise ConfigError("refresh", str(exc)) from None
        if cfg.switching not in SWITCHING_MODES:
            raise ConfigError("switching", f"must be one of {SWITCHING_MODES}")
        for name in ("snapshot_every", "diagnostic_every"):
            if getattr(cfg, name) < 0:
                raise ConfigError(name, "must be >= 0")
        return cfg

    def as_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                value = value.tolist()
            out[f.name] = value
        return out


@dataclass
class ParticleState:
    positions: np.ndarray
    velocities: np.ndarray
    time: float
    epsilon: float
    sigma: np.ndarray
    steps: int = 0
    assignment: AssignmentResult | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.positions.shape[0]


def velocity_field(name, points, omega=math.pi, table=None):
    points = np.asarray(points, dtype=float)
    if name == "zero":
        return np.zeros_like(points)
    if name == "rigid_rotation":
        if points.shape[1] < 2:
            raise ValueError("rigid rotation needs at least two dimensions")
        v = np.zeros_like(points)
        v[:, 0] = -omega * points[:, 1]
        v[:, 1] = omega * points[:, 0]
        return v
    if name == "table":
        v = np.asarray(table, dtype=float)
        if v.shape != points.shape:
            raise ValueError(f"velocity table shape {v.shape} does not match grid {points.shape}")
        return v.copy()
    raise ValueError(f"unknown velocity field {name!r}")


def init_state(config, grid=None):
    """Particles on the grid points with the configured initial velocity."""
    cfg = config.resolved()
    grid = grid if grid is not None else cfg.grid()
    V = velocity_field(cfg.velocity_field, grid.points, cfg.omega, cfg.velocity_table)
    if cfg.velocity_noise:
        V = V + cfg.velocity_noise * np.random.default_rng(cfg.seed).standard_normal(V.shape)
    n = grid.n_points
    return ParticleState(positions=grid.points.copy(), velocities=V, time=0.0,
                         epsilon=cfg.epsilon, sigma=np.arange(n))


def optimal_assignment(positions, grid, warm_start=None):
    return solve_assignment(squared_distance_costs(positions, grid.points), warm_start=warm_start)


def spring_potential(positions, targets, epsilon):
    d = positions - targets
    return math.fsum(np.einsum("ak,ak->a", d, d)) / (2.0 * epsilon ** 2)


def hamiltonian(state, grid):
    """``(total, kinetic, potential)`` with the potential minimized over all
    pairings by a fresh solve (``state.sigma`` is not used)."""
    kinetic = 0.5 * math.fsum(np.einsum("ak,ak->a", state.velocities, state.velocities))
    result = optimal_assignment(state.positions, grid)
    potential = result.total_cost / (2.0 * state.epsilon ** 2)
    return kinetic + potential, kinetic, potential


def spring_force(positions, targets, epsilon):
    return -(positions - targets) / epsilon ** 2


def verlet_substep(M, V, targets, epsilon, dt):
    """One velocity-Verlet step for springs to fixed ``targets``.

    Exactly time-reversible: a step of ``-dt`` from the output returns the
    input up to round-off.
    """
    F = spring_force(M, targets, epsilon)
    M1 = M + dt * V + 0.5 * dt * dt * F
    V1 = V + 0.5 * dt * (F + spring_force(M1, targets, epsilon))
    return M1, V1


def _first_crossing(M, V, F, D, s_max):
    # f(s) = -2 sum (M + sV + s^2/2 F) . D; returns the first s in [0, s_max]
    # where f becomes positive.
    c0 = -2.0 * np.sum(M * D)
    c1 = -2.0 * np.sum(V * D)
    c2 = -np.sum(F * D)
    if c0 >= 0.0:
        return 0.0
    roots = np.roots([c2, c1, c0]) if c2 != 0.0 else (np.array([-c0 / c1]) if c1 != 0.0 else np.array([]))
    roots = np.sort(roots[np.isreal(roots)].real)
    roots = roots[(roots >= 0.0) & (roots <= s_max)]
    return float(roots[0]) if roots.size else s_max


def _event_step(M, V, grid, epsilon, dt, result, max_events=10_000):
    """Verlet step that switches the pairing where the optimal one changes,
    located on the quadratic Verlet position path."""
    A = grid.points
    remaining = dt
    switches = 0
    for _ in range(max_events):
        targets = A[result.sigma]
        M1, V1 = verlet_substep(M, V, targets, epsilon, remaining)
        new = optimal_assignment(M1, grid, warm_start=result)
        if np.array_equal(new.sigma, result.sigma):
            return M1, V1, new, switches
        F = spring_force(M, targets, epsilon)
        s = remaining
        candidate = new
        while True:
            s = _first_crossing(M, V, F, targets - A[candidate.sigma], s)
            Ms = M + s * V + 0.5 * s * s * F
            check = optimal_assignment(Ms, grid, warm_start=candidate)
            tol = 1e-9 * (1.0 + check.total_cost)
            frozen = math.fsum(np.einsum("ak,ak->a", Ms - targets, Ms - targets))
            if check.total_cost >= frozen - tol or s == 0.0:
                break
            candidate = check
        M, V = verlet_substep(M, V, targets, epsilon, s)
        remaining -= s
        result = candidate
        switches += 1
        if remaining <= 1e-15 * dt:
            return M, V, optimal_assignment(M, grid, warm_start=result), switches
    raise RuntimeError("too many pairing switches inside one step")


def step_verlet(state, grid, dt, policy="every_step", switching="boundary", assignment=None):
    """Advance one step of size ``dt``.

    With ``switching="boundary"`` the pairing is re-solved (per ``policy``)
    before the step and held fixed through both force evaluations. With
    ``switching="event"`` the step is further split at the times where the
    optimal pairing changes. ``assignment`` may pass a solve already done at
    the current positions.
    """
    policy = RefreshPolicy.parse(policy)
    result = state.assignment
    if policy.due(state.steps):
        result = assignment if assignment is not None else optimal_assignment(
            state.positions, grid, warm_start=state.assignment)
    if result is None:
        result = AssignmentResult(state.sigma, None, None, float("nan"))
    if switching == "event" and policy.every == 1:
        M1, V1, after, _ = _event_step(state.positions, state.velocities, grid,
                                       state.epsilon, dt, result)
        return ParticleState(M1, V1, state.time + dt, state.epsilon, after.sigma,
                             state.steps + 1, after)
    M1, V1 = verlet_substep(state.positions, state.velocities, grid.points[result.sigma],
                            state.epsilon, dt)
    return ParticleState(M1, V1, state.time + dt, state.epsilon, np.asarray(result.sigma),
                         state.steps + 1, result if result.v is not None else None)


def pressure_estimate(state, grid, refresh=True):
    """Samples ``(M_a, (M_a - A[sigma_a]) / eps^2)`` of the pressure gradient."""
    sigma = state.sigma
    if refresh:
        sigma = optimal_assignment(state.positions, grid, warm_start=state.assignment).sigma
    vectors = (state.positions - grid.points[sigma]) / state.epsilon ** 2
    return state.positions.copy(), vectors


def pressure_slope(locations, vectors, dims=2):
    """Least-squares slope ``k`` of ``vectors ~ k * locations`` (horizontal
    components, fit through the origin)."""
    x = np.asarray(locations)[:, :dims]
    g = np.asarray(vectors)[:, :dims]
    return float(np.sum(x * g) / np.sum(x * x))


@dataclass
class Snapshot:
    time: float
    positions: np.ndarray
    velocities: np.ndarray
    sigma: np.ndarray


@dataclass
class DiagnosticSeries:
    time: list = field(default_factory=list)
    hamiltonian: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    potential: list = field(default_factory=list)
    switches: list = field(default_factory=list)
    deviation: list | None = None

    def record(self, t, kinetic, potential, switches, deviation=None):
        self.time.append(t)
        self.kinetic.append(kinetic)
        self.potential.append(potential)
        self.hamiltonian.append(kinetic + potential)
        self.switches.append(switches)
        if deviation is not None:
            if self.deviation is None:
                self.deviation = []
            self.deviation.append(deviation)

    def relative_drift(self, scale):
        H = np.asarray(self.hamiltonian)
        return float(np.max(np.abs(H - H[0])) / scale)


@dataclass
class Trajectory:
    grid: object
    config: ScenarioConfig
    snapshots: list = field(default_factory=list)
    final: ParticleState | None = None


def reference_positions(config, grid, t):
    """Rigid-rotation image of the grid at time ``t`` (None for other fields)."""
    if config.velocity_field != "rigid_rotation":
        return None
    A = grid.points
    z = rotation_flow(config.omega * t / math.pi, A[:, 0] + 1j * A[:, 1])
    ref = A.copy()
    ref[:, 0], ref[:, 1] = z.real, z.imag
    return ref


def l2_deviation(positions, reference):
    d = positions - reference
    return math.sqrt(math.fsum(np.einsum("ak,ak->a", d, d)) / len(d))


def evolve(config, grid=None):
    """Integrate the scenario to ``t_final``.

    Returns ``(trajectory, diagnostics)``. Diagnostics are recorded every
    ``diagnostic_every`` steps (0: first and last only) and snapshots every
    ``snapshot_every`` steps (0: first and last only).
    """
    cfg = config.resolved()
    grid = grid if grid is not None else cfg.grid()
    policy = RefreshPolicy.parse(cfg.refresh)
    state = init_state(cfg, grid)
    state.assignment = optimal_assignment(state.positions, grid)
    state.sigma = state.assignment.sigma

    n_full = int(math.floor(cfg.t_final / cfg.dt + 1e-9))
    steps = [cfg.dt] * n_full
    rest = cfg.t_final - n_full * cfg.dt
    if rest > 1e-12 * cfg.dt:
        steps.append(rest)
    n_steps = len(steps)

    traj = Trajectory(grid=grid, config=cfg)
    diag = DiagnosticSeries()
    switches = 0

    def due(every, k):
        return k == 0 or k == n_steps or (every > 0 and k % every == 0)

    def record(k, st, current):
        kinetic = 0.5 * math.fsum(np.einsum("ak,ak->a", st.velocities, st.velocities))
        potential = current.total_cost / (2.0 * st.epsilon ** 2)
        ref = reference_positions(cfg, grid, st.time)
        dev = l2_deviation(st.positions, ref) if ref is not None else None
        diag.record(st.time, kinetic, potential, switches, dev)

    def snap(st):
        traj.snapshots.append(Snapshot(st.time, st.positions.copy(), st.velocities.copy(),
                                       np.asarray(st.sigma).copy()))

    current = state.assignment
    record(0, state, current)
    snap(state)
    for k, h in enumerate(steps, start=1):
        prev_sigma = np.asarray(state.sigma)
        fresh = current if policy.due(state.steps) else None
        state = step_verlet(state, grid, h, policy, cfg.switching, assignment=fresh)
        # the time is reset from the step count to avoid drift from summation
        state.time = cfg.t_final if k == n_steps else k * cfg.dt
        need_diag = due(cfg.diagnostic_every, k)
        if policy.due(state.steps) or need_diag:
            current = optimal_assignment(state.positions, grid, warm_start=state.assignment or current)
        if not np.array_equal(prev_sigma, state.sigma):
            switches += 1
        if need_diag:
            record(k, state, current)
        if due(cfg.snapshot_every, k):
            snap(state)
        if policy.due(state.steps):
            state.assignment = current
    traj.final = state
    return traj, diag
