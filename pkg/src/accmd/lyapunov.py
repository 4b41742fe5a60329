"""Lyapunov energies and cross terms for the accelerated schemes.

With ``h`` the shifted objective ``f - mu phi`` and weight ``w = mu``
(strongly convex case), or ``h = f`` and ``w = eps`` (perturbed case):

    E(x, y)           = D_h(x, x*) + w D_phi*(eta, chi*)
    E^a(x, y)         = E(x, y) + a <grad h(x) - grad h(x*), y - x*>
    B^a(x, xh, yh, y) = D_h(x, xh) + w D_phi(yh, y) + a <grad h(x) - grad h(xh), y - yh>

``D_phi*(eta, chi*)`` is evaluated as ``D_phi(x*, y)``; the two agree by
conjugate symmetry and the primal form avoids exponentiating duals.
"""

from __future__ import annotations

import numpy as np

from .linalg import as_vector


class LyapunovSuite:
    def __init__(self, problem, x_star, perturbed=False, epsilon=None):
        f = problem.f
        self.problem = problem
        self.mirror = f.mirror
        self.x_star = as_vector(x_star).copy()
        self.perturbed = perturbed
        if perturbed:
            if epsilon is None or not epsilon > 0:
                raise ValueError("perturbed energies need epsilon > 0")
            self.weight = float(epsilon)
            self.hgrad = f.grad
            self.hdiv = f.bregman
        else:
            self.weight = float(f.mu)
            self.hgrad = f.shifted_grad
            self.hdiv = f.shifted_bregman
        self.grad_star = self.hgrad(self.x_star)
        self._chi_star = None

    @property
    def chi_star(self):
        """Dual image of x*; only defined when x* is interior to the mirror domain."""
        if self._chi_star is None:
            self._chi_star = self.mirror.grad(self.x_star)
        return self._chi_star

    @classmethod
    def strong(cls, problem, x_star):
        return cls(problem, x_star)

    @classmethod
    def perturbed_suite(cls, problem, x_star, epsilon):
        return cls(problem, x_star, perturbed=True, epsilon=epsilon)

    def E(self, x, y):
        return self.hdiv(x, self.x_star) + self.weight * self.mirror.bregman(self.x_star, y)

    def E_dual(self, x, eta):
        """E evaluated through the conjugate, ``D_phi*(eta, chi*)`` taken literally."""
        return self.hdiv(x, self.x_star) + self.weight * self.mirror.bregman_conjugate(eta, self.chi_star)

    def cross(self, x, y):
        return float(np.dot(self.hgrad(x) - self.grad_star, y - self.x_star))

    def E_alpha(self, x, y, alpha):
        return self.E(x, y) + alpha * self.cross(x, y)

    def B(self, alpha, x, xh, yh, y):
        return (
            self.hdiv(x, xh)
            + self.weight * self.mirror.bregman(yh, y)
            + alpha * float(np.dot(self.hgrad(x) - self.hgrad(xh), y - yh))
        )

    def radius(self, x, y):
        """Twice the larger of D_phi(x*, x) and D_phi(x*, y)."""
        return 2.0 * max(self.mirror.bregman(self.x_star, x), self.mirror.bregman(self.x_star, y))
