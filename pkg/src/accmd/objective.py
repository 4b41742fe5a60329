"""Smooth objectives, problem generators, GCS-constant estimators and dataset I/O.

Every generator is deterministic in its seed.  Random draws come from
``numpy.random.Generator(PCG64(seed))`` in a fixed, documented order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.optimize

from .errors import ConfigurationError, DimensionError, DomainError, ParseError
from .linalg import DiagonalMatrix, as_vector, check_spd, power_method, smallest_eigenvalue
from .mirror import EntropyMirror, MirrorFunction, QuadraticMirror, QuarticMirror
from .nonsmooth import NonsmoothTerm

GCS_METHODS = ("exact-formula", "power-method", "practical-adaptive", "global-L")
POWER_TOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """The library's only source of randomness: PCG64 seeded explicitly."""
    return np.random.Generator(np.random.PCG64(int(seed)))


class SmoothObjective:
    """Smooth part ``f`` of a problem, with its constants relative to ``mirror``.

    ``mu`` and ``L`` are the relative strong convexity and relative
    smoothness constants.  Subclasses override the ``shifted_*`` methods
    when ``f - mu * phi`` has a closed form that avoids cancellation.
    """

    mu: float = 0.0
    L: float = 1.0
    mirror: MirrorFunction
    known_minimizer = None

    @property
    def dim(self):
        return self.mirror.dim

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def bregman(self, x, y):
        return float(self.value(x) - self.value(y) - np.dot(self.grad(y), x - y))

    def shifted_value(self, x):
        return self.value(x) - self.mu * self.mirror.value(x)

    def shifted_grad(self, x):
        return self.grad(x) - self.mu * self.mirror.grad(x)

    def shifted_bregman(self, x, y):
        return float(self.shifted_value(x) - self.shifted_value(y) - np.dot(self.shifted_grad(y), x - y))

    def exact_gcs(self):
        raise ConfigurationError(f"{type(self).__name__} has no closed-form GCS constant")

    def power_gcs(self, seed=0):
        raise ConfigurationError(f"{type(self).__name__} has no power-method GCS estimate")


class LogLinearObjective(SmoothObjective):
    """f(x) = sum x log x + (g.x)^2 / 2 on the simplex, relative to entropy."""

    def __init__(self, g_vec):
        g_vec = as_vector(g_vec)
        if not np.any(g_vec != 0):
            raise ConfigurationError("log-linear model needs a nonzero g vector")
        self.g_vec = g_vec
        self.mirror = EntropyMirror(g_vec.size)
        self.mu = 1.0
        # largest entry of g g^T is max_i g_i^2
        self.L = 1.0 + float(np.max(g_vec**2))

    def value(self, x):
        s = float(np.dot(self.g_vec, x))
        return self.mirror.value(x) + 0.5 * s * s

    def grad(self, x):
        return self.mirror.grad(x) + float(np.dot(self.g_vec, x)) * self.g_vec

    def shifted_value(self, x):
        s = float(np.dot(self.g_vec, x))
        return 0.5 * s * s

    def shifted_grad(self, x):
        return float(np.dot(self.g_vec, x)) * self.g_vec

    def shifted_bregman(self, x, y):
        s = float(np.dot(self.g_vec, np.asarray(x) - np.asarray(y)))
        return 0.5 * s * s

    def exact_gcs(self):
        return float(np.dot(self.g_vec, self.g_vec))

    def power_gcs(self, seed=0):
        g = self.g_vec
        return power_method(lambda v: g * np.dot(g, v), g.size, tol=POWER_TOL, seed=seed).value

    def stationary_point(self):
        """Simplex minimizer from its one-dimensional fixed-point equation.

        Stationarity on the simplex gives ``x_i ~ exp(-s g_i)`` with
        ``s = g.x``; ``s - mean_s(g)`` is increasing in ``s`` so the root
        is unique.
        """
        g = self.g_vec

        def gibbs(s):
            w = -s * g
            w = np.exp(w - w.max())
            return w / w.sum()

        def h(s):
            return s - float(np.dot(g, gibbs(s)))

        bound = float(np.abs(g).max()) + 1.0
        s = scipy.optimize.brentq(h, -bound, bound, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        return gibbs(s)


class MaxMarginObjective(SmoothObjective):
    """f(x) = b.x + x^T A x / 2 on the simplex, relative to entropy (mu = 0)."""

    def __init__(self, A, b, power_seed=0):
        A = np.asarray(A, dtype=np.float64)
        b = as_vector(b)
        if A.shape != (b.size, b.size):
            raise DimensionError(f"A has shape {A.shape} but b has length {b.size}")
        check_spd(A)
        self.A = A
        self.b = b
        self.mirror = EntropyMirror(b.size)
        self.mu = 0.0
        res = power_method(lambda v: A @ v, b.size, tol=POWER_TOL, seed=power_seed)
        if res.value <= 0:
            raise ConfigurationError("max-margin matrix has a nonpositive Rayleigh quotient")
        self.lambda_max = res.value
        # (v^T A v)/2 <= lambda_max ||v||_1^2 / 2 <= lambda_max KL by Pinsker
        self.L = res.value

    def value(self, x):
        return float(np.dot(self.b, x) + 0.5 * np.dot(x, self.A @ x))

    def grad(self, x):
        return self.b + self.A @ x

    def bregman(self, x, y):
        d = np.asarray(x) - np.asarray(y)
        return 0.5 * float(np.dot(d, self.A @ d))

    def shifted_bregman(self, x, y):
        return self.bregman(x, y)

    def exact_gcs(self):
        return float(np.linalg.eigvalsh(self.A)[-1])

    def power_gcs(self, seed=0):
        return self.lambda_max


class QuarticObjective(SmoothObjective):
    """f(x) = ||Ex||^4 / 4 + ||Ax - b||_4^4 / 4 + ||Cx - d||^2 / 2, quartic mirror."""

    def __init__(self, A, b, C, d, E, mu=None, L=None, seed=0):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = as_vector(b)
        self.C = np.asarray(C, dtype=np.float64)
        self.d = as_vector(d)
        self.E = np.asarray(E, dtype=np.float64)
        n = self.C.shape[1]
        self.mirror = QuarticMirror(n)
        self.lambda_E = smallest_eigenvalue(self.E, tol=1e-8, seed=seed).value
        self.lambda_C = smallest_eigenvalue(self.C, tol=1e-8, seed=seed).value
        self.mu = min(self.lambda_E**4 / 3.0, self.lambda_C**2) if mu is None else float(mu)
        self.L = self.lipschitz_bound(1.0, seed=seed) if L is None else float(L)

    def lipschitz_bound(self, R, seed=0):
        """Euclidean gradient Lipschitz bound on the ball ``||x|| <= R``."""
        A, E, C = self.A, self.E, self.C
        nA = math.sqrt(power_method(lambda v: A.T @ (A @ v), A.shape[1], tol=POWER_TOL, seed=seed).value)
        nE = power_method(lambda v: E @ v, E.shape[0], tol=POWER_TOL, seed=seed).value
        nC = power_method(lambda v: C @ v, C.shape[0], tol=POWER_TOL, seed=seed).value
        nb = float(np.linalg.norm(self.b))
        return (3 * nE**4 + 3 * nA**4) * R**2 + 6 * nA**3 * nb * R + 3 * nA**2 * nb**2 + nC**2

    def value(self, x):
        x = as_vector(x)
        ex = self.E @ x
        r = self.A @ x - self.b
        c = self.C @ x - self.d
        e2 = float(np.dot(ex, ex))
        return 0.25 * e2 * e2 + 0.25 * float(np.sum(r**4)) + 0.5 * float(np.dot(c, c))

    def grad(self, x):
        x = as_vector(x)
        ex = self.E @ x
        r = self.A @ x - self.b
        c = self.C @ x - self.d
        return float(np.dot(ex, ex)) * (self.E.T @ ex) + self.A.T @ r**3 + self.C.T @ c


class LeastSquaresObjective(SmoothObjective):
    """f(x) = ||Ax - b||^2 / 2 with the diagonal metric D = diag(A^T A)."""

    def __init__(self, A, b, power_seed=0):
        A = np.asarray(A, dtype=np.float64)
        b = as_vector(b)
        if A.ndim != 2 or A.shape[0] != b.size:
            raise DimensionError(f"A has shape {A.shape} but b has length {b.size}")
        col_sq = np.einsum("ij,ij->j", A, A)
        if np.any(col_sq == 0):
            raise ConfigurationError("design matrix has a zero column, diag(A^T A) is singular")
        self.A = A
        self.b = b
        self.D = DiagonalMatrix(col_sq)
        self.mirror = QuadraticMirror(self.D)
        self.mu = 0.0
        s = 1.0 / np.sqrt(col_sq)
        res = power_method(lambda v: s * (A.T @ (A @ (s * v))), A.shape[1], tol=POWER_TOL, seed=power_seed)
        self.spectral_radius = res.value
        self.L = res.value

    def value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(np.dot(r, r))

    def grad(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def bregman(self, x, y):
        r = self.A @ (np.asarray(x) - np.asarray(y))
        return 0.5 * float(np.dot(r, r))

    def shifted_bregman(self, x, y):
        return self.bregman(x, y)

    def exact_gcs(self):
        s = 1.0 / np.sqrt(self.D.diagonal)
        M = (self.A * s).T @ (self.A * s)
        return float(np.linalg.eigvalsh(M)[-1])

    def power_gcs(self, seed=0):
        return self.spectral_radius


class Counterexample1D(SmoothObjective):
    """Piecewise entropy-type objective on (0, inf) with minimizer 1/e.

    f(x) = 2 x log x for x <= 1 and x log x + 2x - log x - 2 for x > 1,
    relative to phi(x) = x log x with mu = 1 and L = 2.
    """

    def __init__(self):
        self.mirror = EntropyMirror(1)
        self.mu = 1.0
        self.L = 2.0
        self.known_minimizer = np.array([math.exp(-1.0)])

    @staticmethod
    def _check(x):
        x = as_vector(x)
        if x.size != 1 or not x[0] > 0 or not np.isfinite(x[0]):
            raise DomainError(f"counterexample is defined for a single positive coordinate, got {x}")
        return float(x[0])

    def value(self, x):
        t = self._check(x)
        if t <= 1.0:
            return 2.0 * t * math.log(t)
        return t * math.log(t) + 2.0 * t - math.log(t) - 2.0

    def grad(self, x):
        t = self._check(x)
        if t <= 1.0:
            return np.array([2.0 * (math.log(t) + 1.0)])
        return np.array([math.log(t) + 3.0 - 1.0 / t])

    def shifted_value(self, x):
        t = self._check(x)
        if t <= 1.0:
            return t * math.log(t)
        return 2.0 * t - math.log(t) - 2.0

    def shifted_grad(self, x):
        t = self._check(x)
        if t <= 1.0:
            return np.array([math.log(t) + 1.0])
        return np.array([2.0 - 1.0 / t])

    def exact_gcs(self):
        return self.L


@dataclass(frozen=True)
class GcsEstimate:
    value: float
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in GCS_METHODS:
            raise ConfigurationError(f"unknown GCS estimator {self.method!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ConfigurationError(f"GCS constant must be positive and finite, got {self.value}")

    def at_gap(self, f, gap):
        """Re-evaluate an adaptive estimate at the current ``||x_k - y_k||``."""
        if self.method != "practical-adaptive":
            return self.value
        return practical_gcs(f, gap=gap, **{k: v for k, v in self.params.items() if k != "gap"})


def practical_gcs(f, gap, theta, hess_lipschitz=None, radius=None):
    if hess_lipschitz is None:
        if isinstance(f.mirror, QuadraticMirror):
            hess_lipschitz = 0.0
        elif radius is None:
            raise ConfigurationError("practical-adaptive estimate needs hess_lipschitz or radius")
        else:
            hess_lipschitz = f.mirror.hessian_lipschitz(radius)
    return (f.L - f.mu) * (1.0 + hess_lipschitz * float(gap) ** theta)


def estimate_gcs(f: SmoothObjective, method: str, **params) -> GcsEstimate:
    """Estimate the generalized Cauchy-Schwarz constant of ``f`` relative to its mirror.

    ``practical-adaptive`` needs ``theta`` and ``gap`` plus one of
    ``hess_lipschitz`` or ``radius`` (quadratic mirrors need neither).
    """
    if method == "exact-formula":
        return GcsEstimate(f.exact_gcs(), method)
    if method == "power-method":
        return GcsEstimate(f.power_gcs(seed=params.get("seed", 0)), method)
    if method == "global-L":
        return GcsEstimate(float(f.L), method)
    if method == "practical-adaptive":
        missing = [k for k in ("theta", "gap") if k not in params]
        if missing:
            raise ConfigurationError(f"practical-adaptive estimate is missing {', '.join(missing)}")
        value = practical_gcs(f, **params)
        if value <= 0:
            raise ConfigurationError("practical-adaptive estimate is zero (L == mu)")
        return GcsEstimate(value, method, dict(params))
    raise ConfigurationError(f"unknown GCS estimator {method!r}; choose from {', '.join(GCS_METHODS)}")


@dataclass
class ProblemInstance:
    f: SmoothObjective
    g: NonsmoothTerm
    gcs: GcsEstimate
    name: str
    seed: int | None = None
    x0: np.ndarray | None = None
    data: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.f.dim

    @property
    def mirror(self):
        return self.f.mirror

    @property
    def on_simplex(self):
        return self.g.kind == "simplex"

    def objective(self, x):
        return self.f.value(x) + self.g.value(x)

    def initial_point(self):
        if self.x0 is not None:
            return self.x0.copy()
        if self.on_simplex:
            return np.full(self.dim, 1.0 / self.dim)
        return np.zeros(self.dim)

    def with_gcs(self, gcs: GcsEstimate):
        return ProblemInstance(self.f, self.g, gcs, self.name, self.seed, self.x0, self.data)

    def metadata(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "dim": self.dim,
            "mu": self.f.mu,
            "L": self.f.L,
            "C": self.gcs.value,
            "gcs_method": self.gcs.method,
            "mirror": type(self.f.mirror).__name__,
            "nonsmooth": self.g.describe(),
        }


def make_log_linear(g_vec, gcs_method="exact-formula", name="loglinear", seed=None) -> ProblemInstance:
    f = LogLinearObjective(g_vec)
    return ProblemInstance(f, NonsmoothTerm.simplex(), estimate_gcs(f, gcs_method), name, seed, data={"g": f.g_vec})


def make_log_linear_random(d, seed, scale=1.0, gcs_method="exact-formula") -> ProblemInstance:
    """Log-linear model with ``g ~ scale * N(0, I_d)``."""
    g_vec = scale * make_rng(seed).standard_normal(d)
    return make_log_linear(g_vec, gcs_method=gcs_method, seed=seed)


def make_max_margin(A, b, gcs_method="power-method", name="maxmargin", seed=None) -> ProblemInstance:
    f = MaxMarginObjective(A, b)
    return ProblemInstance(f, NonsmoothTerm.simplex(), estimate_gcs(f, gcs_method), name, seed, data={"A": f.A, "b": f.b})


def make_max_margin_random(d, seed, gcs_method="power-method") -> ProblemInstance:
    """Max-margin dual with ``A = I + M M^T / d`` and ``b ~ N(0, I_d)``, M standard normal."""
    rng = make_rng(seed)
    M = rng.standard_normal((d, d))
    b = rng.standard_normal(d)
    A = np.eye(d) + M @ M.T / d
    A = 0.5 * (A + A.T)
    return make_max_margin(A, b, gcs_method=gcs_method, seed=seed)


def make_quartic(n, seed, gcs_method="global-L") -> ProblemInstance:
    """Quartic benchmark.

    Draw order: A (n x n, scaled by 1/sqrt(n)), C0, E0, d ~ U(0, 1)^n.
    C = I + C0 C0^T / n, E = 2I + E0 E0^T / n, b = 0.
    """
    if n < 1:
        raise ConfigurationError("dimension must be positive")
    rng = make_rng(seed)
    A = rng.standard_normal((n, n)) / math.sqrt(n)
    C0 = rng.standard_normal((n, n))
    E0 = rng.standard_normal((n, n))
    d = rng.uniform(0.0, 1.0, size=n)
    C = np.eye(n) + C0 @ C0.T / n
    E = 2.0 * np.eye(n) + E0 @ E0.T / n
    b = np.zeros(n)
    f = QuarticObjective(A, b, C, d, E, seed=seed)
    return ProblemInstance(
        f, NonsmoothTerm.zero(), estimate_gcs(f, gcs_method), "quartic", seed,
        data={"A": A, "b": b, "C": C, "d": d, "E": E},
    )


def make_lasso(A, b, lam=0.05, gcs_method="power-method", name="lasso", seed=None) -> ProblemInstance:
    if not lam > 0:
        raise ConfigurationError("lasso penalty must be positive")
    f = LeastSquaresObjective(A, b)
    return ProblemInstance(
        f, NonsmoothTerm.l1(lam), estimate_gcs(f, gcs_method), name, seed, data={"A": f.A, "b": f.b},
    )


def make_lasso_random(n, d, seed, lam=0.05, sparsity=5, noise=0.01) -> ProblemInstance:
    """Synthetic LASSO: A ~ N(0, 1)^{n x d}, sparse ground truth, small Gaussian noise."""
    rng = make_rng(seed)
    A = rng.standard_normal((n, d))
    support = rng.choice(d, size=min(sparsity, d), replace=False)
    x_true = np.zeros(d)
    x_true[support] = rng.standard_normal(support.size)
    b = A @ x_true + noise * rng.standard_normal(n)
    return make_lasso(A, b, lam=lam, seed=seed)


def make_counterexample_1d() -> ProblemInstance:
    f = Counterexample1D()
    return ProblemInstance(f, NonsmoothTerm.zero(), estimate_gcs(f, "global-L"), "counterexample", None, x0=np.array([1.0]))


# -- dataset ingestion -------------------------------------------------------


def _parse_float(tok, line):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", line) from None


def load_dataset(path, fmt="csv", dim=None):
    """Read a design matrix (samples x features) and response vector.

    ``csv``: first column is the response, an optional header row is
    skipped when its first cell is not numeric.  ``svmlight``: lines
    ``label idx:val ...`` with 1-based indices; the feature count is
    ``dim`` if given, else the largest index seen.
    """
    path = Path(path)
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "svmlight":
        return _load_svmlight(path, dim)
    raise ConfigurationError(f"unknown dataset format {fmt!r}")


def _load_csv(path):
    rows, resp = [], []
    width = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not resp:
                try:
                    float(row[0])
                except ValueError:
                    continue
            vals = [_parse_float(c.strip(), lineno) for c in row]
            if width is None:
                width = len(vals)
                if width < 2:
                    raise ParseError("need a response column and at least one feature", lineno)
            elif len(vals) != width:
                raise ParseError(f"expected {width} columns, found {len(vals)}", lineno)
            resp.append(vals[0])
            rows.append(vals[1:])
    if not rows:
        raise ParseError("no data rows")
    return np.array(rows, dtype=np.float64), np.array(resp, dtype=np.float64)


def _load_svmlight(path, dim):
    entries, resp = [], []
    max_idx = 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            resp.append(_parse_float(toks[0], lineno))
            feats = {}
            for tok in toks[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected idx:val, got {tok!r}", lineno)
                try:
                    j = int(idx)
                except ValueError:
                    raise ParseError(f"bad feature index {idx!r}", lineno) from None
                if j < 1:
                    raise ParseError("feature indices are 1-based", lineno)
                if dim is not None and j > dim:
                    raise ParseError(f"feature index {j} exceeds declared dimension {dim}", lineno)
                feats[j - 1] = _parse_float(val, lineno)
                max_idx = max(max_idx, j)
            entries.append(feats)
    if not entries:
        raise ParseError("no data rows")
    ncols = dim if dim is not None else max_idx
    A = np.zeros((len(entries), ncols))
    for i, feats in enumerate(entries):
        for j, v in feats.items():
            A[i, j] = v
    return A, np.array(resp, dtype=np.float64)


def save_dataset(path, A, b, fmt="csv", header=True):
    """Write ``(A, b)`` so that :func:`load_dataset` reads back identical floats."""
    path = Path(path)
    A = np.asarray(A, dtype=np.float64)
    b = as_vector(b)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header:
                w.writerow(["b"] + [f"f{j + 1}" for j in range(A.shape[1])])
            for bi, row in zip(b, A):
                w.writerow([repr(float(bi))] + [repr(float(v)) for v in row])
    elif fmt == "svmlight":
        with path.open("w") as fh:
            for bi, row in zip(b, A):
                feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(row) if v != 0)
                fh.write(f"{float(bi)!r} {feats}".rstrip() + "\n")
    else:
        raise ConfigurationError(f"unknown dataset format {fmt!r}")
