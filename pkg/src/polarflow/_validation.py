"""Input validation helpers shared by the public modules."""

import numpy as np
from sklearn.utils.validation import check_array


class SizeError(ValueError):
    """Inputs whose counts or dimensions do not line up."""


class DomainError(ValueError):
    """Inputs outside the admissible numeric domain (non-finite, |z| > 1, ...)."""


def check_points(X, dim=None, name="points"):
    """Return ``X`` as a float (n, d) array.

    A flat sequence is read as n one-dimensional points.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, ensure_2d=True, dtype=float, ensure_min_samples=1,
                    input_name=name)
    if X.shape[1] not in (1, 2, 3):
        raise SizeError(f"{name}: dimension must be 1, 2 or 3, got {X.shape[1]}")
    if dim is not None and X.shape[1] != dim:
        raise SizeError(f"{name}: expected dimension {dim}, got {X.shape[1]}")
    return X


def check_cost_matrix(costs):
    C = np.asarray(costs, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] == 0:
        raise SizeError(f"cost matrix must be square and non-empty, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise DomainError("cost matrix has non-finite entries")
    if np.any(C < 0):
        raise DomainError("cost matrix has negative entries")
    return C


def check_permutation(sigma, n):
    sigma = np.asarray(sigma)
    if sigma.shape != (n,):
        return False
    if not np.issubdtype(sigma.dtype, np.integer):
        return False
    mark = np.zeros(n, dtype=bool)
    for s in sigma:
        if s < 0 or s >= n or mark[s]:
            return False
        mark[s] = True
    return True


def default_tolerance(costs):
    """Scale-aware slack used for dual certificates and tie detection."""
    return 1e-9 * (1.0 + float(np.max(costs)))
