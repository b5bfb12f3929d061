"""Exact linear assignment with squared-Euclidean costs.

The solver is a shortest-augmenting-path Hungarian method that keeps the
dual potentials (u, v) feasible throughout, so every result carries its own
optimality certificate. Among cost-equal optima the lexicographically
smallest permutation is returned, and duals are normalized so that v[0] = 0.
"""

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    SizeError,
    check_cost_matrix,
    check_permutation,
    check_points,
    default_tolerance,
)

BRUTE_FORCE_MAX_N = 9


class ProblemTooLargeError(ValueError):
    """Raised when exhaustive enumeration is requested for too many items."""


@dataclass
class AssignmentResult:
    """Optimal pairing ``sigma[alpha] = beta`` with its dual certificate."""

    sigma: np.ndarray
    u: np.ndarray
    v: np.ndarray
    total_cost: float

    @property
    def n(self):
        return len(self.sigma)


@dataclass
class CertificateReport:
    bijective: bool
    dual_feasibility_margin: float
    slackness_residual: float
    cost_residual: float
    duality_gap: float
    best_2cycle_gain: float
    best_3cycle_gain: float
    tol: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "checks": dict(self.checks),
            "dual_feasibility_margin": self.dual_feasibility_margin,
            "slackness_residual": self.slackness_residual,
            "cost_residual": self.cost_residual,
            "duality_gap": self.duality_gap,
            "best_2cycle_gain": self.best_2cycle_gain,
            "best_3cycle_gain": self.best_3cycle_gain,
        }


def squared_distance_costs(sources, targets):
    """Matrix of squared Euclidean distances ``|sources[a] - targets[b]|**2``."""
    S = check_points(sources, name="sources")
    T = check_points(targets, name="targets")
    if S.shape != T.shape:
        raise SizeError(f"sources {S.shape} and targets {T.shape} must have equal shape")
    diff = S[:, None, :] - T[None, :, :]
    return np.einsum("abk,abk->ab", diff, diff)


def assignment_cost(costs, sigma):
    """Total cost of a permutation, correctly rounded (order independent)."""
    return math.fsum(costs[np.arange(len(sigma)), sigma])


def _hungarian(C, sigma0=None, v0=None):
    # Shortest augmenting paths (Jonker-Volgenant style dual updates).
    # Column n is a virtual root; p[j] is the row matched to column j.
    n = C.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.full(n + 1, -1, dtype=np.int64)
    free_rows = range(n)
    if sigma0 is not None and v0 is not None:
        v[:n] = v0
        reduced = C - v[None, :n]
        u[:n] = reduced.min(axis=1)
        rows = np.arange(n)
        keep = reduced[rows, sigma0] <= u[:n]
        p[sigma0[keep]] = rows[keep]
        free_rows = rows[~keep].tolist()

    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=bool)
    for i in free_rows:
        p[n] = i
        j0 = n
        minv.fill(np.inf)
        used.fill(False)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = C[i0] - u[i0] - v[:n]
            free = ~used[:n]
            better = free & (cur < minv[:n])
            minv[:n][better] = cur[better]
            way[:n][better] = j0
            masked = np.where(free, minv[:n], np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            cols = np.flatnonzero(used)
            u[p[cols]] += delta
            v[cols] -= delta
            minv[:n][free] -= delta
            j0 = j1
            if p[j0] == -1:
                break
        while j0 != n:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    sigma = np.empty(n, dtype=np.int64)
    sigma[p[:n]] = np.arange(n)
    return sigma, u[:n].copy(), v[:n].copy()


def _alternating_path(tight, sigma, owner, start_row, target_col, blocked):
    """Breadth-first search for a way to move ``start_row`` off its column.

    Returns the list of (row, new_column) moves ending at ``target_col`` or
    None. Only columns not in ``blocked`` may be entered.
    """
    visited = blocked.copy()
    parent = {}
    frontier = [start_row]
    while frontier:
        nxt = []
        for r in frontier:
            for c in np.flatnonzero(tight[r] & ~visited):
                visited[c] = True
                parent[c] = r
                if c == target_col:
                    moves = []
                    col = c
                    while True:
                        row = parent[col]
                        moves.append((row, col))
                        if row == start_row:
                            return moves
                        col = sigma[row]
                nxt.append(owner[c])
        frontier = nxt
    return None


def _lexicographic_optimum(C, sigma, u, v, tol):
    """Smallest permutation (lexicographically) inside the tight-edge graph.

    Every perfect matching of tight edges is optimal for the given duals, so
    a greedy row-by-row choice with an alternating-cycle feasibility test
    yields the lexicographically smallest optimal permutation.
    """
    n = len(sigma)
    tight = (C - u[:, None] - v[None, :]) <= tol
    tight[np.arange(n), sigma] = True
    if not np.any(tight.sum(axis=1) > 1):
        return sigma
    sigma = sigma.copy()
    owner = np.empty(n, dtype=np.int64)
    owner[sigma] = np.arange(n)
    fixed = np.zeros(n, dtype=bool)
    for i in range(n):
        target = sigma[i]
        candidates = np.flatnonzero(tight[i, :target] & ~fixed[:target])
        for j in candidates:
            blocked = fixed.copy()
            blocked[j] = True
            moves = _alternating_path(tight, sigma, owner, owner[j], target, blocked)
            if moves is None:
                continue
            for row, col in moves:
                sigma[row] = col
                owner[col] = row
            sigma[i] = j
            owner[j] = i
            break
        fixed[sigma[i]] = True
    return sigma


def _normalize(u, v):
    shift = v[0]
    return u + shift, v - shift


def solve_assignment(costs, warm_start=None):
    """Minimum-cost permutation for a square cost matrix.

    Parameters
    ----------
    costs : array-like of shape (n, n)
        Nonnegative finite costs.
    warm_start : AssignmentResult, optional
        A previous result on a nearby matrix. Only affects speed; the returned
        permutation is the same lexicographically smallest optimum.

    Returns
    -------
    AssignmentResult
    """
    C = check_cost_matrix(costs)
    n = C.shape[0]
    tol = default_tolerance(C)
    if warm_start is not None and warm_start.n == n:
        sigma, u, v = _hungarian(C, np.asarray(warm_start.sigma), np.asarray(warm_start.v))
    else:
        sigma, u, v = _hungarian(C)
    sigma = _lexicographic_optimum(C, sigma, u, v, tol)
    u, v = _normalize(u, v)
    return AssignmentResult(sigma=sigma, u=u, v=v, total_cost=assignment_cost(C, sigma))


def duals_from_matching(costs, sigma):
    """Dual potentials certifying ``sigma``, from shortest paths on the
    difference constraints ``v[b] - v[sigma[a]] <= c[a, b] - c[a, sigma[a]]``.

    Raises ValueError if ``sigma`` admits a cost-reducing cycle.
    """
    C = np.asarray(costs, dtype=float)
    n = C.shape[0]
    sigma = np.asarray(sigma)
    owner = np.empty(n, dtype=np.int64)
    owner[sigma] = np.arange(n)
    # w[j, b]: edge from column j (= sigma[a]) to column b
    w = C[owner] - C[owner, np.arange(n)][:, None]
    dist = np.minimum(0.0, w.min(axis=0))
    for _ in range(n):
        new = np.minimum(dist, (dist[:, None] + w).min(axis=0))
        if np.array_equal(new, dist):
            break
        dist = new
    else:
        if np.any((dist[:, None] + w).min(axis=0) < dist - default_tolerance(C)):
            raise ValueError("matching is not optimal: negative cycle in residual graph")
    v = dist
    u = C[np.arange(n), sigma] - v[sigma]
    return _normalize(u, v)


@functools.lru_cache(maxsize=BRUTE_FORCE_MAX_N)
def _permutation_table(n):
    table = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    table.flags.writeable = False
    return table


def brute_force_assignment(costs):
    """Exhaustive search over all n! permutations (test oracle, n <= 9)."""
    C = check_cost_matrix(costs)
    n = C.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ProblemTooLargeError(f"refusing to enumerate {n}! permutations (n > {BRUTE_FORCE_MAX_N})")
    # itertools.permutations yields lexicographic order, so the first hit
    # within tolerance of the minimum is the lexicographically smallest.
    perms = _permutation_table(n)
    totals = C[np.arange(n), perms].sum(axis=1)
    best = totals.min()
    k = int(np.flatnonzero(totals <= best + default_tolerance(C))[0])
    sigma = perms[k].copy()
    u, v = duals_from_matching(C, sigma)
    return AssignmentResult(sigma=sigma, u=u, v=v, total_cost=assignment_cost(C, sigma))


def verify_optimality(costs, result, tol=None):
    """Check a result against its dual certificate and short cyclic swaps.

    Never raises for a bad result; inspect ``report.passed`` instead.
    """
    C = np.asarray(costs, dtype=float)
    n = C.shape[0]
    if tol is None:
        tol = default_tolerance(C)
    sigma = np.asarray(result.sigma)
    u = np.asarray(result.u, dtype=float)
    v = np.asarray(result.v, dtype=float)
    bijective = check_permutation(sigma, n) and u.shape == (n,) and v.shape == (n,)
    if not bijective:
        nan = float("nan")
        return CertificateReport(False, nan, nan, nan, nan, nan, nan, tol,
                                 checks={"bijective": False})

    rows = np.arange(n)
    reduced = C - u[:, None] - v[None, :]
    margin = float(reduced.min())
    slack = float(np.abs(reduced[rows, sigma]).max())
    matched = assignment_cost(C, sigma)
    cost_residual = abs(result.total_cost - matched)
    gap = abs(math.fsum(u) + math.fsum(v) - result.total_cost)

    # D[a, b]: change in cost if row a takes the column currently held by b
    D = C[:, sigma] - C[rows, sigma][:, None]
    gain2 = D + D.T
    np.fill_diagonal(gain2, np.inf)
    best2 = float(gain2.min()) if n >= 2 else 0.0
    best3 = 0.0
    if n >= 3:
        best3 = np.inf
        for a in range(n):
            # cycle a -> b -> c -> a
            g = D[a][:, None] + D + D[:, a][None, :]
            g[a, :] = np.inf
            g[:, a] = np.inf
            np.fill_diagonal(g, np.inf)
            best3 = min(best3, float(g.min()))

    scale_tol = tol * max(1, n)
    checks = {
        "bijective": True,
        "dual_feasibility": margin >= -tol,
        "complementary_slackness": slack <= tol,
        "cost_consistency": cost_residual <= scale_tol,
        "duality_gap": gap <= scale_tol,
        "no_improving_2cycle": best2 >= -tol,
        "no_improving_3cycle": best3 >= -tol,
    }
    return CertificateReport(True, margin, slack, cost_residual, gap, best2, best3, tol, checks)


def sorted_assignment_1d(sources, targets):
    """Monotone rearrangement: k-th smallest source to k-th smallest target.

    Duals come from the piecewise-linear convex potential whose slopes are
    the sorted targets, so the result is certified like any other solve.
    """
    s = np.asarray(sources, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if s.shape != t.shape or s.size == 0:
        raise SizeError(f"sources ({s.size}) and targets ({t.size}) must be equal, non-empty")
    n = s.size
    order_s = np.argsort(s, kind="stable")
    order_t = np.argsort(t, kind="stable")
    sigma = np.empty(n, dtype=np.int64)
    sigma[order_s] = order_t

    ss, ts = s[order_s], t[order_t]
    phi = np.zeros(n)
    if n > 1:
        phi[1:] = np.cumsum(ts[:-1] * np.diff(ss))
    phi_star = ss * ts - phi
    u = np.empty(n)
    v = np.empty(n)
    u[order_s] = ss * ss - 2.0 * phi
    v[order_t] = ts * ts - 2.0 * phi_star
    u, v = _normalize(u, v)
    total = math.fsum((s - t[sigma]) ** 2)
    return AssignmentResult(sigma=sigma, u=u, v=v, total_cost=total)
