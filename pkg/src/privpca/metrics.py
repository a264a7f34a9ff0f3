"""Direction geometry and the dense reference eigen-solver."""
from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

UNIT_TOL = 1e-9


def as_unit(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    norm = np.linalg.norm(u)
    if not np.isfinite(norm) or norm == 0.0:
        raise InvalidInputError("expected a nonzero finite vector")
    return u / norm


def is_unit(u, tol: float = UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(u)) - 1.0) <= tol


def sin_distance(u, v) -> float:
    """Sine of the angle between the lines spanned by u and v."""
    u = as_unit(u)
    v = as_unit(v)
    if u.shape != v.shape:
        raise InvalidInputError("dimension mismatch")
    c = float(u @ v)
    return float(np.sqrt(max(0.0, 1.0 - c * c)))


def top_eigpair(m) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of a symmetric matrix and its eigenvector.

    The eigenvector's sign is fixed so that its largest-magnitude
    coordinate is positive.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError("expected a square matrix")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix contains NaN or Inf")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    v = vecs[:, -1]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return float(vals[-1]), v


def top_eigenvalues(mats: np.ndarray) -> np.ndarray:
    """Top eigenvalue of each symmetric matrix in a ``(k, m, m)`` stack."""
    return np.linalg.eigvalsh(mats)[:, -1]
