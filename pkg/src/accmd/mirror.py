"""Legendre-type mirror functions and the prox steps built on them.

Every mirror function exposes

* ``value(x)``: phi(x)
* ``grad(x)``: the mirror map, dual point chi = grad phi(x)
* ``grad_conjugate(chi)``: the inverse map grad phi*(chi)
* ``conjugate_value(chi)``: phi*(chi)
* ``bregman(x, y)``: D_phi(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>

Three families are provided: :class:`QuadraticMirror`,
:class:`EntropyMirror` and :class:`QuarticMirror`.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.special import logsumexp, softmax, xlogy

from .errors import ConfigurationError, DomainError
from .linalg import DiagonalMatrix, as_vector, check_spd
from .nonsmooth import L1, SIMPLEX, ZERO, NonsmoothTerm

FULL_SPACE = "full-space"
POSITIVE_ORTHANT = "positive-orthant"
PROBABILITY_SIMPLEX = "probability-simplex"


class MirrorFunction:
    """Base class; subclasses implement value/grad/grad_conjugate/conjugate_value."""

    domain = FULL_SPACE
    dim: int

    def check_domain(self, x):
        x = as_vector(x)
        if x.size != self.dim:
            raise DomainError(f"expected a point of dimension {self.dim}, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise DomainError("point has non-finite entries")
        return x

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def grad_conjugate(self, chi):
        raise NotImplementedError

    def conjugate_value(self, chi):
        raise NotImplementedError

    def bregman(self, x, y):
        x = self.check_domain(x)
        y = self.check_domain(y)
        return float(self.value(x) - self.value(y) - np.dot(self.grad(y), x - y))

    def bregman_conjugate(self, eta, chi):
        """D_{phi*}(eta, chi), computed from the conjugate directly."""
        return float(
            self.conjugate_value(eta)
            - self.conjugate_value(chi)
            - np.dot(self.grad_conjugate(chi), eta - chi)
        )

    def hessian_lipschitz(self, radius):
        """Lipschitz constant of the Hessian on a ball of the given radius about 0."""
        raise NotImplementedError


class QuadraticMirror(MirrorFunction):
    """phi(x) = x^T M x / 2 for a symmetric positive definite metric M."""

    def __init__(self, metric):
        if isinstance(metric, DiagonalMatrix):
            if not metric.is_positive():
                raise ConfigurationError("diagonal metric must be strictly positive")
            self.metric = metric
            self._factor = None
        else:
            metric = np.asarray(metric, dtype=np.float64)
            check_spd(metric)
            self.metric = metric
            self._factor = scipy.linalg.cho_factor(metric)
        self.dim = self.metric.shape[0]

    @classmethod
    def identity(cls, dim):
        return cls(DiagonalMatrix(np.ones(dim)))

    @property
    def is_diagonal(self):
        return isinstance(self.metric, DiagonalMatrix)

    def _apply(self, x):
        if self.is_diagonal:
            return self.metric.matvec(x)
        return self.metric @ x

    def _solve(self, chi):
        if self.is_diagonal:
            return self.metric.solve(chi)
        return scipy.linalg.cho_solve(self._factor, chi)

    def value(self, x):
        x = self.check_domain(x)
        return 0.5 * float(np.dot(x, self._apply(x)))

    def grad(self, x):
        return self._apply(self.check_domain(x))

    def grad_conjugate(self, chi):
        return self._solve(as_vector(chi))

    def conjugate_value(self, chi):
        chi = as_vector(chi)
        return 0.5 * float(np.dot(chi, self._solve(chi)))

    def bregman(self, x, y):
        d = self.check_domain(x) - self.check_domain(y)
        return 0.5 * float(np.dot(d, self._apply(d)))

    def hessian_lipschitz(self, radius):
        return 0.0


class EntropyMirror(MirrorFunction):
    """Shannon entropy phi(x) = sum_i x_i log x_i on the positive orthant.

    In ``simplex`` mode the conjugate is taken relative to the probability
    simplex, so ``grad_conjugate`` is the softmax and the unconstrained prox
    step already returns a probability vector.
    """

    def __init__(self, dim, simplex=False):
        self.dim = int(dim)
        self.simplex = bool(simplex)
        self.domain = PROBABILITY_SIMPLEX if simplex else POSITIVE_ORTHANT

    def check_domain(self, x):
        x = super().check_domain(x)
        if np.any(x <= 0):
            raise DomainError("entropy is only defined for strictly positive points")
        return x

    def _closure(self, x):
        # value and the first divergence slot extend to the boundary (0 log 0 = 0)
        x = MirrorFunction.check_domain(self, x)
        if np.any(x < 0):
            raise DomainError("entropy is only defined for nonnegative points")
        return x

    def value(self, x):
        x = self._closure(x)
        return float(np.sum(xlogy(x, x)))

    def grad(self, x):
        return np.log(self.check_domain(x)) + 1.0

    def grad_conjugate(self, chi):
        chi = as_vector(chi)
        if self.simplex:
            return softmax(chi)
        with np.errstate(over="ignore"):
            # overflow surfaces as inf and is reported by the solver's finiteness check
            return np.exp(chi - 1.0)

    def conjugate_value(self, chi):
        chi = as_vector(chi)
        if self.simplex:
            return float(logsumexp(chi))
        return float(np.sum(np.exp(chi - 1.0)))

    def bregman(self, x, y):
        x = self._closure(x)
        y = self.check_domain(y)
        return float(np.sum(xlogy(x, x) - xlogy(x, y) - x + y))

    def hessian_lipschitz(self, radius):
        raise ConfigurationError("entropy Hessian is not Lipschitz near the boundary")


def _cubic_root(s, tol=1e-14, max_iter=100):
    """Unique real root r >= 0 of r^3 + r = s, by bracketed Newton."""
    if s == 0.0:
        return 0.0
    lo, hi = 0.0, max(1.0, s)
    r = min(max(s ** (1.0 / 3.0), lo), hi)
    for _ in range(max_iter):
        fr = r * r * r + r - s
        if fr == 0.0:
            return r
        if fr > 0:
            hi = r
        else:
            lo = r
        step = fr / (3.0 * r * r + 1.0)
        r_new = r - step
        if not lo < r_new < hi:
            r_new = 0.5 * (lo + hi)
        if abs(r_new - r) <= tol * max(1.0, r):
            return r_new
        r = r_new
    return r


class QuarticMirror(MirrorFunction):
    """phi(x) = ||x||^4 / 4 + ||x||^2 / 2, whose gradient is (||x||^2 + 1) x."""

    def __init__(self, dim):
        self.dim = int(dim)

    def value(self, x):
        x = self.check_domain(x)
        r2 = float(np.dot(x, x))
        return 0.25 * r2 * r2 + 0.5 * r2

    def grad(self, x):
        x = self.check_domain(x)
        return (float(np.dot(x, x)) + 1.0) * x

    def grad_conjugate(self, chi):
        chi = as_vector(chi)
        s = float(np.linalg.norm(chi))
        r = _cubic_root(s)
        return chi / (r * r + 1.0)

    def conjugate_value(self, chi):
        chi = as_vector(chi)
        x = self.grad_conjugate(chi)
        return float(np.dot(chi, x)) - self.value(x)

    def hessian_lipschitz(self, radius):
        # third derivative of phi is bounded by 6 ||x|| on the ball
        return 6.0 * float(radius)


def bregman(phi: MirrorFunction, x, y) -> float:
    return phi.bregman(x, y)


def quartic_grad_conjugate(chi):
    chi = as_vector(chi)
    return QuarticMirror(chi.size).grad_conjugate(chi)


def mirror_prox(phi: MirrorFunction, alpha: float, h) -> np.ndarray:
    """Minimizer of ``(1 + alpha) phi(y) - <h, y>``, i.e. grad phi*(h / (1 + alpha))."""
    if not alpha > -1.0:
        raise ConfigurationError(f"prox weight requires alpha > -1, got {alpha}")
    return phi.grad_conjugate(as_vector(h) / (1.0 + alpha))


def soft_threshold(h, t):
    return np.sign(h) * np.maximum(np.abs(h) - t, 0.0)


def composite_prox(phi: MirrorFunction, alpha: float, beta: float, h, g: NonsmoothTerm) -> np.ndarray:
    """Exact minimizer of ``(1 + alpha) phi(y) + beta g(y) - <h, y>``.

    Supported pairs: diagonal quadratic with l1 (generalized soft
    thresholding), entropy with the simplex indicator (softmax of
    ``h / (1 + alpha)``), and any mirror with ``g = 0``.
    """
    if not alpha > -1.0:
        raise ConfigurationError(f"prox weight requires alpha > -1, got {alpha}")
    h = as_vector(h)
    if g.kind == ZERO:
        return mirror_prox(phi, alpha, h)
    if g.kind == L1 and isinstance(phi, QuadraticMirror) and phi.is_diagonal:
        return soft_threshold(h, beta * g.lam) / ((1.0 + alpha) * phi.metric.diagonal)
    if g.kind == SIMPLEX and isinstance(phi, EntropyMirror):
        return softmax(h / (1.0 + alpha))
    raise ConfigurationError(
        f"no closed-form prox for mirror {type(phi).__name__} with nonsmooth term {g.describe()}"
    )


def prox_kkt_residual(phi: MirrorFunction, alpha: float, beta: float, h, g: NonsmoothTerm, y) -> float:
    """Distance of ``h - (1 + alpha) grad phi(y)`` from ``beta * subdiff g(y)``.

    For the simplex indicator the subdifferential on the relative interior
    is the line spanned by the all-ones vector, so the residual is the
    spread of ``(1 + alpha) grad phi(y) - h`` around its mean.
    """
    h = as_vector(h)
    y = as_vector(y)
    r = h - (1.0 + alpha) * phi.grad(y)
    if g.kind == ZERO:
        return float(np.max(np.abs(r)))
    if g.kind == L1:
        t = beta * g.lam
        nz = y != 0
        out = np.where(nz, np.abs(r - t * np.sign(y)), np.maximum(np.abs(r) - t, 0.0))
        return float(np.max(out))
    if g.kind == SIMPLEX:
        return float(np.max(np.abs(r - r.mean())))
    raise ConfigurationError(f"unsupported nonsmooth term {g.describe()}")
