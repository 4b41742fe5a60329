"""Numerical certificates for the identities and rates behind the solvers.

Each ``check_*`` function evaluates both sides of an identity (or an
inequality) independently on seeded samples or along a trajectory and
returns a :class:`CheckReport`.  Residuals are relative:
``|lhs - rhs| / max(1, |lhs|, |rhs|)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .lyapunov import LyapunovSuite
from .mirror import EntropyMirror, MirrorFunction
from .objective import make_rng
from .rates import RateFit, fit_rate  # noqa: F401  (re-exported)
from .solver import (
    FORWARD,
    HOMOTOPY,
    MD,
    SolverConfig,
    accmd_forward_step,
    init_state,
    perturbed_step,
    run,
)

IDENTITY_TOL = 1e-8


def relative_residual(lhs, rhs):
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


@dataclass
class CheckReport:
    name: str
    samples: int
    max_abs_residual: float
    max_rel_residual: float
    passed: bool
    tolerance: float
    details: dict = field(default_factory=dict)

    def as_dict(self):
        d = asdict(self)
        for k in ("max_abs_residual", "max_rel_residual"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: n={self.samples} max_rel={self.max_rel_residual:.3e} tol={self.tolerance:g}"


def _report(name, lhs, rhs, tol, details=None):
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if lhs.size == 0:
        return CheckReport(name, 0, 0.0, 0.0, True, tol, details or {})
    abs_res = np.abs(lhs - rhs)
    rel_res = abs_res / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    max_rel = float(rel_res.max())
    ok = bool(np.all(np.isfinite(rel_res))) and max_rel <= tol
    return CheckReport(name, int(lhs.size), float(abs_res.max()), max_rel, ok, tol, details or {})


def save_reports(reports, path):
    with open(path, "w") as fh:
        json.dump({"passed": all(r.passed for r in reports), "checks": [r.as_dict() for r in reports]}, fh, indent=2)


# -- samplers ----------------------------------------------------------------


def sample_points(space, dim, rng, n, center=None, radius=None):
    """Seeded points in ``space``: 'simplex', 'orthant' or 'full'.

    With ``center`` and ``radius`` the points are drawn in the Euclidean
    ball around ``center`` (intersected with the space).
    """
    if center is not None and radius is not None:
        out = []
        while len(out) < n:
            d = rng.standard_normal(dim)
            if space == "simplex":
                d -= d.mean()
            d *= radius * rng.uniform() ** (1.0 / dim) / max(np.linalg.norm(d), 1e-300)
            p = center + d
            if space in ("simplex", "orthant") and np.any(p <= 0):
                continue
            out.append(p)
        return np.array(out)
    if space == "simplex":
        return rng.dirichlet(np.ones(dim), size=n)
    if space == "orthant":
        return rng.uniform(0.05, 3.0, size=(n, dim))
    return rng.standard_normal((n, dim))


def problem_space(problem):
    if problem.on_simplex:
        return "simplex"
    if isinstance(problem.mirror, EntropyMirror):
        return "orthant"
    return "full"


def mirror_space(phi):
    if isinstance(phi, EntropyMirror):
        return "simplex" if phi.simplex else "orthant"
    return "full"


# -- identity checks -----------------------------------------------------------


def check_three_point(fn, samples=1000, seed=0, space=None, dim=None, tol=1e-10):
    """<grad f(y) - grad f(x), y - z> = D_f(y, x) + D_f(z, y) - D_f(z, x) on seeded triples.

    ``fn`` is any object with ``value``/``grad`` (a mirror function or a
    smooth objective); ``space`` defaults to the mirror's natural domain.
    """
    phi = fn if isinstance(fn, MirrorFunction) else fn.mirror
    space = space or mirror_space(phi)
    dim = dim or phi.dim
    rng = make_rng(seed)
    pts = sample_points(space, dim, rng, 3 * samples).reshape(samples, 3, dim)

    def div(a, b):
        return fn.value(a) - fn.value(b) - float(np.dot(fn.grad(b), a - b))

    lhs, rhs = [], []
    for x, y, z in pts:
        lhs.append(float(np.dot(fn.grad(y) - fn.grad(x), y - z)))
        rhs.append(div(y, x) + div(z, y) - div(z, x))
    return _report(f"three-point[{type(fn).__name__}]", lhs, rhs, tol)


def check_conjugate_symmetry(phi, samples=1000, seed=0, tol=1e-10):
    """D_phi(x, y) = D_phi*(grad phi(y), grad phi(x))."""
    rng = make_rng(seed)
    pts = sample_points(mirror_space(phi), phi.dim, rng, 2 * samples).reshape(samples, 2, phi.dim)
    lhs = [phi.bregman(x, y) for x, y in pts]
    rhs = [phi.bregman_conjugate(phi.grad(y), phi.grad(x)) for x, y in pts]
    return _report(f"conjugate-symmetry[{type(phi).__name__}]", lhs, rhs, tol)


def check_strong_lyapunov(problem, samples=500, seed=0, x_star=None, tol=IDENTITY_TOL):
    """-grad E . G = E + D_{f-mu}(x*, x) + mu D_phi(y, x*) at seeded (x, y).

    The left side is assembled from the gradient of E in (x, eta) and the
    flow field G; the right side from Bregman divergences, with the dual
    term evaluated through phi*.
    """
    f = problem.f
    if not f.mu > 0:
        raise ConfigurationError("strong Lyapunov identity needs mu > 0")
    x_star = _x_star(problem, x_star)
    suite = LyapunovSuite.strong(problem, x_star)
    phi, mu = f.mirror, f.mu
    rng = make_rng(seed)
    space = problem_space(problem)
    pts = sample_points(space, problem.dim, rng, 2 * samples).reshape(samples, 2, problem.dim)
    pts = np.concatenate([pts, [[x_star, x_star]]])
    lhs, rhs = [], []
    for x, y in pts:
        eta = phi.grad(y)
        hx = f.shifted_grad(x)
        dE_dx = hx - suite.grad_star
        dE_deta = mu * (phi.grad_conjugate(eta) - phi.grad_conjugate(suite.chi_star))
        G_x = y - x
        G_eta = -hx / mu - eta
        lhs.append(-(float(np.dot(dE_dx, G_x)) + float(np.dot(dE_deta, G_eta))))
        rhs.append(suite.E_dual(x, eta) + f.shifted_bregman(x_star, x) + mu * phi.bregman(y, x_star))
    return _report(f"strong-lyapunov[{problem.name}]", lhs, rhs, tol)


def _x_star(problem, x_star):
    if x_star is not None:
        return np.asarray(x_star, dtype=np.float64)
    if problem.f.known_minimizer is None:
        raise ConfigurationError(f"{problem.name}: no minimizer supplied; compute a reference first")
    return problem.f.known_minimizer


def forward_trajectory(problem, steps, x0=None, alpha=None):
    state = init_state(problem, FORWARD, x0)
    states = [state]
    for _ in range(steps):
        state = accmd_forward_step(state, problem, alpha)
        states.append(state)
    return states


def perturbed_trajectory(problem, steps, epsilon, x0=None, alpha=None):
    state = init_state(problem, HOMOTOPY, x0)
    state.epsilon_current = epsilon
    states = [state]
    for _ in range(steps):
        state = perturbed_step(state, problem, epsilon, alpha)
        states.append(state)
    return states


def check_step_identity(trajectory, problem, x_star=None, tol=IDENTITY_TOL):
    """Per-step energy identity along a forward or perturbed trajectory.

    Forward (mu > 0), with a = alpha of the step:

        E^a_{k+1} - E^a_k = -a E^a_{k+1} - a B^{-a}(x*, x_{k+1}, y_{k+1}, x*)
                            - B^a(x_k, x_{k+1}, y_{k+1}, y_k)

    Perturbed (weight eps): the same, plus
    ``a eps [D_phi(y_{k+1}, x*) - D_phi(y_{k+1}, x_{k+1}) + D_phi(x*, x_{k+1})]``.
    """
    x_star = _x_star(problem, x_star)
    if len(trajectory) < 2:
        return _report("step-identity", [], [], tol)
    perturbed = trajectory[1].epsilon_current is not None
    suites = {}

    def suite_for(eps):
        if eps not in suites:
            suites[eps] = (
                LyapunovSuite.perturbed_suite(problem, x_star, eps) if eps is not None
                else LyapunovSuite.strong(problem, x_star)
            )
        return suites[eps]

    phi = problem.mirror
    lhs, rhs = [], []
    for s0, s1 in zip(trajectory[:-1], trajectory[1:]):
        if s1.k != s0.k + 1:
            raise ConfigurationError("trajectory steps are not consecutive")
        if (s1.epsilon_current is not None) != perturbed:
            raise ConfigurationError("trajectory mixes perturbed and unperturbed steps")
        a = s1.alpha
        eps = s1.epsilon_current
        S = suite_for(eps)
        e0 = S.E_alpha(s0.x, s0.y, a)
        e1 = S.E_alpha(s1.x, s1.y, a)
        tail = -a * e1 - S.B(a, s0.x, s1.x, s1.y, s0.y)
        if perturbed:
            # the eps D_phi(y_{k+1}, x*) inside B^{-a} cancels the extra term of the same
            # value; dropping both keeps the check finite when x* lies on the boundary
            cross = float(np.dot(S.hgrad(x_star) - S.hgrad(s1.x), s1.y - x_star))
            r = tail - a * (S.hdiv(x_star, s1.x) + a * cross)
            r += a * eps * (phi.bregman(x_star, s1.x) - phi.bregman(s1.y, s1.x))
        else:
            r = tail - a * S.B(-a, x_star, s1.x, s1.y, x_star)
        lhs.append(e1 - e0)
        rhs.append(r)
    name = "perturbed-step-identity" if perturbed else "step-identity"
    return _report(f"{name}[{problem.name}]", lhs, rhs, tol)


def check_gcs(problem, samples=10_000, seed=0, C=None, x_star=None, radius=None, tol=0.0):
    """Count violations of the generalized Cauchy-Schwarz inequality.

    For each quadruple (x, xh, y, yh) checks
    ``|<grad h(x) - grad h(xh), y - yh>| <= 2 sqrt(C) D_h(x, xh)^(1/2) D_phi(yh, y)^(1/2)``
    with ``h = f - mu phi``.  ``details["ratio_sup"]`` is the largest
    observed ``lhs^2 / (4 D_h D_phi)``, a lower bound on the true constant.
    Passing ``x_star`` and ``radius`` samples from the ball around x*.
    """
    f = problem.f
    phi = f.mirror
    C = problem.gcs.value if C is None else float(C)
    rng = make_rng(seed)
    space = problem_space(problem)
    pts = sample_points(space, problem.dim, rng, 4 * samples, center=x_star, radius=radius)
    pts = pts.reshape(samples, 4, problem.dim)
    violations = 0
    ratio_sup = 0.0
    worst_excess = 0.0
    for x, xh, y, yh in pts:
        lhs = abs(float(np.dot(f.shifted_grad(x) - f.shifted_grad(xh), y - yh)))
        dh = max(f.shifted_bregman(x, xh), 0.0)
        dp = max(phi.bregman(yh, y), 0.0)
        rhs = 2.0 * math.sqrt(C) * math.sqrt(dh) * math.sqrt(dp)
        if lhs > rhs * (1.0 + tol) + 1e-15:
            violations += 1
            worst_excess = max(worst_excess, lhs - rhs)
        denom = 4.0 * dh * dp
        if denom > 0:
            ratio_sup = max(ratio_sup, lhs * lhs / denom)
    return CheckReport(
        f"gcs[{problem.name}]", samples, worst_excess, violations / samples, violations == 0, 0.0,
        {"C": C, "violations": violations, "ratio_sup": ratio_sup},
    )


def check_relative_bounds(problem, samples=1000, seed=0, slack=1e-12):
    """mu D_phi(x, y) <= D_f(x, y) <= L D_phi(x, y) on seeded in-domain pairs."""
    f = problem.f
    phi = f.mirror
    rng = make_rng(seed)
    pts = sample_points(problem_space(problem), problem.dim, rng, 2 * samples).reshape(samples, 2, problem.dim)
    worst = 0.0
    for x, y in pts:
        df = f.bregman(x, y)
        dp = phi.bregman(x, y)
        worst = max(worst, f.mu * dp - df, df - f.L * dp)
    return CheckReport(
        f"relative-bounds[{problem.name}]", samples, max(worst, 0.0), max(worst, 0.0), worst <= slack, slack,
        {"mu": f.mu, "L": f.L},
    )


# -- gradients and references -------------------------------------------------


def finite_diff_grad(f, x, h=1e-5, in_domain=None):
    """Central differences of ``f`` at ``x``.

    If a probe ``x +/- h e_i`` leaves the domain (``in_domain`` returns
    False or ``f`` raises :class:`DomainError`), ``h`` is shrunk once to
    ``h / 10``; a second failure raises.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)

    def probe(p):
        if in_domain is not None and not in_domain(p):
            raise DomainError("finite-difference probe left the domain")
        return f(p)

    for i in range(x.size):
        for step in (h, h / 10.0):
            e = np.zeros_like(x)
            e[i] = step
            try:
                out[i] = (probe(x + e) - probe(x - e)) / (2.0 * step)
                break
            except DomainError:
                if step != h:
                    raise
    return out


def simplex_qp_solve(A, b, max_rounds=500, tol=1e-13):
    """Exact minimizer of ``b.x + x.A x / 2`` over the simplex (A SPD).

    Primal active-set method on the KKT system
    ``A_SS x_S + b_S = nu 1, sum x_S = 1``; the result satisfies the
    KKT conditions to rounding error.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b.size
    S = list(range(d))
    for _ in range(max_rounds):
        n = len(S)
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = A[np.ix_(S, S)]
        K[:n, n] = -1.0
        K[n, :n] = 1.0
        sol = np.linalg.solve(K, np.r_[-b[S], 1.0])
        xS, nu = sol[:n], sol[n]
        if np.any(xS < 0):
            # drop the most negative coordinate and re-solve
            S.pop(int(np.argmin(xS)))
            continue
        x = np.zeros(d)
        x[S] = xS
        grad = A @ x + b
        out = [i for i in range(d) if i not in S and grad[i] < nu - tol * max(1.0, abs(nu))]
        if not out:
            return x
        S = sorted(S + [min(out, key=lambda i: grad[i])])
    raise ConfigurationError("active-set solve did not settle")


def lasso_polish(A, b, lam, x, tol=1e-10):
    """Refine an approximate LASSO solution by solving the KKT system on its support.

    Returns the polished point if it keeps the sign pattern and satisfies
    ``|A_j^T (A x - b)| <= lam`` off the support; otherwise returns ``x``.
    """
    S = np.nonzero(np.abs(x) > tol * max(1.0, np.abs(x).max()))[0]
    if S.size == 0:
        return x
    s = np.sign(x[S])
    AS = A[:, S]
    try:
        xs = np.linalg.solve(AS.T @ AS, AS.T @ b - lam * s)
    except np.linalg.LinAlgError:
        return x
    out = np.zeros_like(x)
    out[S] = xs
    g = A.T @ (A @ out - b)
    off = np.setdiff1d(np.arange(x.size), S)
    if np.all(np.sign(xs) == s) and (off.size == 0 or np.abs(g[off]).max() <= lam * (1 + 1e-9)):
        return out
    return x


def reference_minimizer(problem, tol=1e-14, max_iters=200_000):
    """High-accuracy minimizer for problems without a known one.

    Simplex QPs (max-margin) are solved exactly by an active-set method.
    Otherwise forward Acc-MD (mu > 0) or the homotopy scheme (mu = 0) is
    run to ``tol`` on the stationarity ratio; in the linear case the run is
    then repeated for twice as many iterations.  l1 problems are then
    polished on the detected support.  Returns ``(x_ref, trace)``; the
    trace is None when no iterative run was needed.
    """
    f = problem.f
    if f.known_minimizer is not None:
        return f.known_minimizer, None
    if problem.on_simplex and hasattr(f, "A") and hasattr(f, "b") and f.mu == 0:
        return simplex_qp_solve(f.A, f.b), None
    algo = FORWARD if f.mu > 0 else HOMOTOPY
    trace = run(problem, SolverConfig(algo, tol=tol, max_iters=max_iters, timing=False))
    if f.mu > 0 and trace.status == "converged":
        # linear convergence: twice the iterations roughly squares the ratio,
        # which pushes the reference to rounding level at bounded cost
        trace = run(problem, SolverConfig(algo, tol=0.0, max_iters=2 * trace.iterations + 10, timing=False))
    if trace.status == "aborted":
        trace = run(problem, SolverConfig(MD, tol=tol, max_iters=max_iters, timing=False))
    x = trace.x
    if problem.g.kind == "l1":
        # the prox output y carries exact zeros, so it gives the cleaner support
        x = lasso_polish(f.A, f.b, problem.g.lam, trace.y)
        if x is trace.y:
            x = trace.x
    return x, trace
