"""Particle approximation of incompressible Euler flow by optimal assignment."""

__version__ = "0.1.0"

from .assignment import (
    AssignmentResult,
    brute_force_assignment,
    solve_assignment,
    sorted_assignment_1d,
    squared_distance_costs,
    verify_optimality,
)
from .dynamics import (
    ParticleState,
    RefreshPolicy,
    ScenarioConfig,
    evolve,
    hamiltonian,
    init_state,
    pressure_estimate,
    step_verlet,
)
from .polar import (
    PointCloud,
    PolarProjector,
    convex_potential,
    empirical_density,
    make_grid,
    monge_ampere_residual,
    project_to_s,
)

__all__ = [
    "AssignmentResult",
    "ParticleState",
    "PointCloud",
    "PolarProjector",
    "RefreshPolicy",
    "ScenarioConfig",
    "brute_force_assignment",
    "convex_potential",
    "empirical_density",
    "evolve",
    "hamiltonian",
    "init_state",
    "make_grid",
    "monge_ampere_residual",
    "pressure_estimate",
    "project_to_s",
    "solve_assignment",
    "sorted_assignment_1d",
    "squared_distance_costs",
    "step_verlet",
    "verify_optimality",
]
