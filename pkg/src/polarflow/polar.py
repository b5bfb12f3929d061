"""Discrete closest-point problem: grids, projection onto rearrangements of
the grid, convex potentials from assignment duals, and Monge-Ampere
diagnostics.

Sign convention for the potential: expanding ``|M - A|^2`` turns the
squared-distance duals into inner-product duals, giving

    Phi(M_a)  = (|M_a|^2 - u_a) / 2
    Phi*(A_b) = (|A_b|^2 - v_b) / 2

with ``Phi(M_a) + Phi*(A_b) >= M_a . A_b`` and equality on matched pairs.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import SizeError, check_points
from .assignment import (
    assignment_cost,
    solve_assignment,
    squared_distance_costs,
)

# name -> (dim, lower corner, upper corner, curved)
_DOMAINS = {
    "interval": (1, (0.0,), (1.0,), False),
    "square": (2, (0.0, 0.0), (1.0, 1.0), False),
    "cube": (3, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), False),
    "disk": (2, (-1.0, -1.0), (1.0, 1.0), True),
    "cylinder": (3, (-1.0, -1.0, 0.0), (1.0, 1.0, 1.0), True),
}
_ALIASES = {
    "unit_interval": "interval",
    "unit_square": "square",
    "unit_cube": "cube",
    "unit_disk": "disk",
    "disk_cylinder": "cylinder",
}
DOMAINS = tuple(_DOMAINS)


def canonical_domain(name):
    key = str(name).strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in _DOMAINS:
        raise ValueError(f"unsupported domain {name!r}; expected one of {', '.join(DOMAINS)}")
    return key


@dataclass
class PointCloud:
    """Cell centers of a tensor lattice, restricted to the domain.

    ``lattice_index[k]`` holds the integer lattice coordinates of point k in
    the bounding-box lattice (x index first).
    """

    domain: str
    n_per_axis: int
    points: np.ndarray
    lattice_index: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def spacing(self):
        return (self.upper - self.lower) / self.n_per_axis

    @property
    def cell_measure(self):
        # normalized so that the domain has unit measure
        return 1.0 / self.n_points

    @property
    def is_tensor(self):
        return not _DOMAINS[self.domain][3]


def _inside(domain, pts):
    if domain in ("disk", "cylinder"):
        return pts[:, 0] ** 2 + pts[:, 1] ** 2 <= 1.0
    return np.ones(len(pts), dtype=bool)


def make_grid(domain, n_per_axis):
    """Lattice of cell centers, ordered x fastest, then y, then vertical layer."""
    domain = canonical_domain(domain)
    n = int(n_per_axis)
    if n < 2:
        raise ValueError(f"n_per_axis must be >= 2, got {n_per_axis}")
    dim, lo, hi, _ = _DOMAINS[domain]
    lo = np.array(lo)
    hi = np.array(hi)
    h = (hi - lo) / n
    axes = [lo[k] + (np.arange(n) + 0.5) * h[k] for k in range(dim)]
    # meshgrid with reversed axes so the first coordinate varies fastest
    mesh = np.meshgrid(*axes[::-1], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh[::-1]], axis=1)
    imesh = np.meshgrid(*[np.arange(n)] * dim, indexing="ij")
    idx = np.stack([m.ravel() for m in imesh[::-1]], axis=1)
    keep = _inside(domain, pts)
    return PointCloud(domain, n, pts[keep], idx[keep], lo, hi)


def project_to_s(M, grid):
    """Closest rearrangement of the grid to the map samples ``M``.

    Returns ``(rearrangement, assignment)`` with
    ``rearrangement[a] = grid.points[assignment.sigma[a]]``.
    """
    M = check_points(M, dim=grid.dim, name="M")
    if M.shape[0] != grid.n_points:
        raise SizeError(f"map has {M.shape[0]} samples, grid has {grid.n_points} points")
    result = solve_assignment(squared_distance_costs(M, grid.points))
    return grid.points[result.sigma], result


@dataclass
class PotentialSamples:
    locations: np.ndarray
    phi_values: np.ndarray


def convex_potential(M, assignment, grid=None):
    """Samples of the convex potential whose gradient maps M onto the grid.

    If ``grid`` is given, the assignment is checked against the squared
    distance costs of ``M`` versus ``grid`` first.
    """
    M = check_points(M, name="M")
    u = np.asarray(assignment.u, dtype=float)
    if u.shape != (M.shape[0],):
        raise SizeError(f"assignment covers {u.size} points, map has {M.shape[0]}")
    if grid is not None:
        if grid.n_points != M.shape[0]:
            raise SizeError("grid and map sizes differ")
        C = squared_distance_costs(M, grid.points)
        recomputed = assignment_cost(C, assignment.sigma)
        if abs(recomputed - assignment.total_cost) > 1e-9 * (1.0 + abs(recomputed)) * M.shape[0]:
            raise ValueError("assignment does not belong to these costs")
    phi = 0.5 * (np.einsum("ak,ak->a", M, M) - u)
    return PotentialSamples(locations=M, phi_values=phi)


def conjugate_potential(grid, assignment):
    """Legendre-dual potential sampled on the grid points themselves."""
    A = grid.points
    return PotentialSamples(locations=A, phi_values=0.5 * (np.einsum("ak,ak->a", A, A) - assignment.v))


@dataclass
class DensityHistogram:
    counts: np.ndarray
    total: int
    grid: PointCloud

    @property
    def mass(self):
        return self.counts / self.total

    @property
    def density(self):
        """Mass per unit (normalized) cell measure."""
        return self.mass / self.grid.cell_measure


def _lattice_coords(grid, X):
    return np.floor((X - grid.lower) / grid.spacing).astype(np.int64)


def _flat_lattice(grid, idx):
    n = grid.n_per_axis
    return sum(idx[:, k] * n ** k for k in range(grid.dim))


def _cell_lookup(grid):
    table = np.full(grid.n_per_axis ** grid.dim, -1, dtype=np.int64)
    table[_flat_lattice(grid, grid.lattice_index)] = np.arange(grid.n_points)
    return table


def nearest_cells(grid, X):
    """Index of the grid cell containing each point (nearest retained cell on
    curved domains). Points outside the bounding box are clamped."""
    X = check_points(X, dim=grid.dim, name="points")
    outside = np.any((X < grid.lower) | (X > grid.upper), axis=1)
    if np.any(outside):
        warnings.warn(f"{int(outside.sum())} points outside the domain bounding box were clamped",
                      stacklevel=3)
    idx = np.clip(_lattice_coords(grid, X), 0, grid.n_per_axis - 1)
    cells = _cell_lookup(grid)[_flat_lattice(grid, idx)]
    missing = cells < 0
    if np.any(missing):
        from scipy.spatial import cKDTree

        _, cells[missing] = cKDTree(grid.points).query(X[missing])
    return cells


def empirical_density(M, grid):
    """Histogram of the samples ``M`` over the grid cells, total mass one."""
    cells = nearest_cells(grid, M)
    counts = np.bincount(cells, minlength=grid.n_points)
    return DensityHistogram(counts=counts, total=int(counts.sum()), grid=grid)


def potential_on_lattice(samples, grid):
    """Move potential samples to their nearest lattice nodes.

    Valid only when every node receives exactly one sample, which holds for
    maps displacing points by less than half a cell.
    """
    locs = check_points(samples.locations, dim=grid.dim, name="locations")
    idx = np.rint((locs - grid.lower) / grid.spacing - 0.5).astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= grid.n_per_axis):
        raise ValueError("potential samples fall outside the lattice")
    nodes = _cell_lookup(grid)[_flat_lattice(grid, idx)]
    if np.any(nodes < 0) or len(np.unique(nodes)) != grid.n_points or len(nodes) != grid.n_points:
        raise ValueError("nearest-node transfer is not one-to-one; displacement too large")
    values = np.empty(grid.n_points)
    values[nodes] = samples.phi_values
    return values


def _hessian_determinant(Phi, h):
    """Centered finite-difference Hessian determinant on interior nodes of a
    d-dimensional array indexed [i_x, i_y, ...]."""
    d = Phi.ndim
    inner = tuple(slice(1, -1) for _ in range(d))

    def shifted(offsets):
        return Phi[tuple(slice(1 + o, Phi.shape[k] - 1 + o) for k, o in enumerate(offsets))]

    H = np.empty((d, d) + Phi[inner].shape)
    for a in range(d):
        e = [0] * d
        e[a] = 1
        minus = [-x for x in e]
        H[a, a] = (shifted(e) - 2.0 * Phi[inner] + shifted(minus)) / h[a] ** 2
        for b in range(a + 1, d):
            pp = [0] * d
            pp[a], pp[b] = 1, 1
            pm = [0] * d
            pm[a], pm[b] = 1, -1
            mixed = (shifted(pp) - shifted(pm) - shifted([-x for x in pm]) + shifted([-x for x in pp]))
            H[a, b] = H[b, a] = mixed / (4.0 * h[a] * h[b])
    return np.linalg.det(np.moveaxis(H, (0, 1), (-2, -1)))


def monge_ampere_residual(phi, density):
    """Discrete L1 residual of ``det(D^2 Phi) = rho`` on interior lattice nodes.

    ``phi`` may be a PotentialSamples (moved to nodes by nearest-node
    association) or an array of node values in grid order.
    """
    grid = density.grid
    if not grid.is_tensor:
        raise ValueError(f"Monge-Ampere residual needs a full tensor lattice, not {grid.domain!r}")
    if isinstance(phi, PotentialSamples):
        values = potential_on_lattice(phi, grid)
    else:
        values = np.asarray(phi, dtype=float)
        if values.shape != (grid.n_points,):
            raise SizeError("potential values must match the grid")
    n = grid.n_per_axis
    shape = (n,) * grid.dim
    Phi = np.empty(shape)
    Phi[tuple(grid.lattice_index.T)] = values
    rho = np.empty(shape)
    rho[tuple(grid.lattice_index.T)] = density.density
    det = _hessian_determinant(Phi, grid.spacing)
    inner = tuple(slice(1, -1) for _ in range(grid.dim))
    return float(np.sum(np.abs(det - rho[inner])) * grid.cell_measure)


class PolarProjector(TransformerMixin, BaseEstimator):
    """Projection of sampled maps onto rearrangements of a fixed grid.

    Parameters
    ----------
    domain : str, default="square"
        One of ``interval``, ``square``, ``cube``, ``disk``, ``cylinder``.
    n_per_axis : int, default=8
        Lattice cells per axis of the domain's bounding box.

    Attributes
    ----------
    grid_ : PointCloud
    assignment_ : AssignmentResult
        Optimal pairing of the fitted map with the grid.
    rearrangement_ : ndarray of shape (n_points, dim)
    potential_ : PotentialSamples
        Convex potential at the fitted map samples.

    Examples
    --------
    >>> proj = PolarProjector(domain="square", n_per_axis=4)
    >>> grid = make_grid("square", 4).points
    >>> proj.fit_transform(grid[::-1]).shape
    (16, 2)
    """

    def __init__(self, domain="square", n_per_axis=8):
        self.domain = domain
        self.n_per_axis = n_per_axis

    def _grid(self):
        return make_grid(self.domain, self.n_per_axis)

    def fit(self, X, y=None):
        grid = self._grid()
        X = check_points(X, dim=grid.dim, name="X")
        self.grid_ = grid
        self.rearrangement_, self.assignment_ = project_to_s(X, grid)
        self.potential_ = convex_potential(X, self.assignment_)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        rearrangement, _ = project_to_s(X, self.grid_)
        return rearrangement

    def score(self, X, y=None):
        """Negative mean squared distance to the closest rearrangement."""
        check_is_fitted(self, "grid_")
        X = check_points(X, dim=self.grid_.dim)
        _, result = project_to_s(X, self.grid_)
        return -result.total_cost / self.grid_.n_points
