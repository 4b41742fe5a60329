"""Nonsmooth terms ``g`` of a composite objective ``f + g``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

ZERO = "zero"
L1 = "l1"
SIMPLEX = "simplex"


@dataclass(frozen=True)
class NonsmoothTerm:
    kind: str = ZERO
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in (ZERO, L1, SIMPLEX):
            raise ConfigurationError(f"unknown nonsmooth term {self.kind!r}")
        if self.kind == L1 and not self.lam > 0:
            raise ConfigurationError("l1 weight must be positive")

    @classmethod
    def zero(cls):
        return cls(ZERO)

    @classmethod
    def l1(cls, lam):
        return cls(L1, float(lam))

    @classmethod
    def simplex(cls):
        return cls(SIMPLEX)

    def value(self, x, atol=1e-9):
        if self.kind == L1:
            return self.lam * float(np.abs(x).sum())
        if self.kind == SIMPLEX:
            # indicator, evaluated with a feasibility tolerance
            if np.all(x >= -atol) and abs(float(np.sum(x)) - 1.0) <= atol * max(1, x.size):
                return 0.0
            return np.inf
        return 0.0

    def describe(self):
        if self.kind == L1:
            return f"l1(lambda={self.lam:g})"
        return self.kind
