"""Dense linear-algebra substrate used by the graph solver and spectral filters.

Matrices are plain float64 numpy arrays. Everything here is value-semantic
and deterministic; the only iterative routine is the symmetric power
iteration used for step-size bounds.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, PowerIterationError

__all__ = [
    "as_matrix",
    "matmul",
    "frobenius_norm_sq",
    "trace",
    "spectral_radius_symmetric",
]

SYMMETRY_TOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        bad = np.argwhere(~np.isfinite(m))[0]
        raise ValueError(f"{name} has non-finite entry at {tuple(bad)}")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit shape checking."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"matmul produced non-finite entries for shapes {a.shape} x {b.shape}")
    return out


def frobenius_norm_sq(m) -> float:
    """Sum of squared entries."""
    m = as_matrix(m)
    return float(np.sum(m * m))


def trace(m) -> float:
    """Sum of the diagonal of a square matrix."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"trace requires a square matrix, got {m.shape}")
    return float(np.trace(m))


def check_symmetric(m: np.ndarray, tol: float = SYMMETRY_TOL, name: str = "matrix") -> None:
    gap = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if gap > tol:
        raise ValueError(f"{name} is not symmetric: max |m - m^T| = {gap:.3g} > {tol:.3g}")


def spectral_radius_symmetric(m, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest |eigenvalue| of a symmetric matrix by power iteration.

    Starts from the all-ones vector plus a small index-dependent
    perturbation so runs are reproducible and the start is not orthogonal
    to the dominant eigenvector. Converged when successive Rayleigh
    quotients differ by less than ``tol``.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"spectral radius requires a square matrix, got {m.shape}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    check_symmetric(m, SYMMETRY_TOL, "spectral_radius input")

    n = m.shape[0]
    if n == 0:
        return 0.0
    v = 1.0 + 1e-3 * np.arange(n) / max(n - 1, 1)
    v /= np.linalg.norm(v)

    rayleigh = float(v @ (m @ v))
    for _ in range(max_iter):
        w = m @ v
        norm = float(np.linalg.norm(w))
        if norm < 1e-300:
            # v is (numerically) in the null space; with the perturbed
            # start this only happens for the zero matrix.
            return 0.0
        v = w / norm
        new_rayleigh = float(v @ (m @ v))
        if abs(new_rayleigh - rayleigh) < tol:
            return abs(new_rayleigh)
        rayleigh = new_rayleigh
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} iterations", abs(rayleigh)
    )
