"""Small dense linear-algebra layer.

Vectors and dense matrices are plain float64 numpy arrays.  The only extra
container is :class:`DiagonalMatrix`, which keeps diagonal metrics (for
example ``diag(A^T A)``) from being materialized as dense arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DimensionError


def as_vector(v) -> np.ndarray:
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class DiagonalMatrix:
    diagonal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diagonal", as_vector(self.diagonal))

    @property
    def shape(self):
        n = self.diagonal.size
        return (n, n)

    def matvec(self, v):
        return self.diagonal * v

    def solve(self, v):
        return v / self.diagonal

    def todense(self):
        return np.diag(self.diagonal)

    def is_positive(self):
        return bool(np.all(self.diagonal > 0))


def matvec(M, v) -> np.ndarray:
    """Return ``M @ v`` for a dense or diagonal matrix."""
    v = as_vector(v)
    rows, cols = M.shape
    if cols != v.size:
        raise DimensionError(f"matrix has {cols} columns but vector has length {v.size}")
    if isinstance(M, DiagonalMatrix):
        return M.matvec(v)
    return np.asarray(M, dtype=np.float64) @ v


def norms(v) -> dict:
    v = as_vector(v)
    a = np.abs(v)
    return {
        "l1": float(a.sum()),
        "l2": float(np.sqrt(np.dot(v, v))),
        "linf": float(a.max()) if a.size else 0.0,
        "l4": float(np.sum(a**4) ** 0.25),
    }


def lp_norm(v, p: float) -> float:
    return float(np.sum(np.abs(as_vector(v)) ** p) ** (1.0 / p))


class PowerResult(NamedTuple):
    value: float
    vector: np.ndarray
    converged: bool
    iterations: int


def power_method(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    seed: int = 0,
) -> PowerResult:
    """Largest eigenvalue of a symmetric positive semidefinite operator.

    Starts from a seeded uniform random vector and normalizes every
    iteration.  Iteration stops once the Rayleigh quotient has stopped
    moving (relative change below ``tol``) *and* the eigen-residual
    ``||Mv - theta v||`` is below ``tol * theta``; for a symmetric operator
    the residual bounds the eigenvalue error, so the returned value is
    within ``tol`` relative of an eigenvalue.

    On hitting ``max_iter`` the best estimate is returned with
    ``converged=False``.
    """
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.0, 1.0, size=dim) + 0.5
    v /= np.linalg.norm(v)
    theta_old = np.inf
    theta = 0.0
    for it in range(1, max_iter + 1):
        w = np.asarray(apply(v), dtype=np.float64)
        theta = float(np.dot(v, w))
        wn = np.linalg.norm(w)
        if wn == 0.0:
            # v lies in the null space; the operator is zero on it
            return PowerResult(0.0, v, True, it)
        resid = np.linalg.norm(w - theta * v)
        scale = max(abs(theta), np.finfo(float).tiny)
        if abs(theta - theta_old) <= tol * scale and resid <= tol * scale:
            return PowerResult(theta, v, True, it)
        theta_old = theta
        v = w / wn
    return PowerResult(theta, v, False, max_iter)


def spectral_radius(M, tol: float = 1e-10, max_iter: int = 10_000, seed: int = 0) -> PowerResult:
    M = np.asarray(M, dtype=np.float64)
    return power_method(lambda v: M @ v, M.shape[0], tol=tol, max_iter=max_iter, seed=seed)


def smallest_eigenvalue(M, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> PowerResult:
    """Smallest eigenvalue of an SPD matrix by inverse power iteration."""
    M = np.asarray(M, dtype=np.float64)
    try:
        factor = scipy.linalg.cho_factor(M)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("matrix is not symmetric positive definite") from exc
    res = power_method(
        lambda v: scipy.linalg.cho_solve(factor, v), M.shape[0], tol=tol, max_iter=max_iter, seed=seed
    )
    v = res.vector
    return PowerResult(float(v @ (M @ v)), v, res.converged, res.iterations)


def check_spd(M) -> None:
    """Raise :class:`ConfigurationError` unless ``M`` is symmetric positive definite."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigurationError(f"expected a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ConfigurationError("matrix is not symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("matrix is not positive definite") from exc
