"""Mirror descent and the accelerated mirror descent family.

Iterations are written on the pair ``(x_k, y_k)`` with the dual point
``eta_k = grad phi(y_k)`` cached in the state.  Every ``y`` update is a
prox step of the form ``argmin (1 + a) phi(y) + b g(y) - <h, y>``, so the
same code serves smooth, simplex-constrained and l1-regularized problems.

Stationarity is measured by ``||grad f(x)||^2`` for smooth problems and by
the squared generalized gradient map ``L^2 ||x - x^+||^2`` when a
nonsmooth term is present, where ``x^+`` is one Bregman proximal-gradient
step of length ``1/L`` from ``x``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, DomainError, StepError
from .lyapunov import LyapunovSuite
from .mirror import EntropyMirror, composite_prox
from .nonsmooth import SIMPLEX, ZERO
from .rates import fit_rate

log = logging.getLogger(__name__)

MD = "md"
FORWARD = "accmd-forward"
BACKWARD = "accmd-backward"
PERTURBED = "perturbed"
HOMOTOPY = "homotopy"
COMPOSITE = "composite-backward"
ALGORITHMS = (MD, FORWARD, BACKWARD, PERTURBED, HOMOTOPY, COMPOSITE)

CSV_COLUMNS = ("k", "obj", "grad_norm_sq", "lyap_E", "lyap_Ealpha", "time_ms")


@dataclass
class SolverConfig:
    algorithm: str
    alpha: float | None = None
    step: float | None = None
    epsilon: float | None = None
    epsilon0: float | None = None
    m0: int | None = None
    epsilon_min: float | None = None
    tol: float = 1e-12
    max_iters: int = 10_000
    timing: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.max_iters < 0:
            raise ConfigurationError("max_iters must be nonnegative")
        if self.tol < 0:
            raise ConfigurationError("tol must be nonnegative")
        for name in ("alpha", "step", "epsilon", "epsilon0", "epsilon_min"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigurationError(f"{name} must be positive, got {v}")
        if self.m0 is not None and self.m0 < 1:
            raise ConfigurationError("m0 must be a positive integer")
        if self.algorithm == PERTURBED and self.epsilon is None:
            raise ConfigurationError("the perturbed scheme needs epsilon")
        if self.step is not None and self.algorithm != MD:
            raise ConfigurationError("step applies to plain mirror descent only")
        if (self.epsilon0 is not None or self.m0 is not None) and self.algorithm not in (HOMOTOPY, COMPOSITE):
            raise ConfigurationError("epsilon0/m0 apply to the homotopy schedule only")

    def as_dict(self):
        return asdict(self)


@dataclass
class SolverState:
    x: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    grad_prev: np.ndarray | None
    k: int = 0
    epsilon_current: float | None = None
    alpha: float | None = None


# -- prox and step helpers -----------------------------------------------------


def _prox(phi, alpha, beta, h, g):
    """Return ``(y, eta)`` for the prox step, with ``eta = grad phi(y)``.

    Entropy on the simplex keeps the dual as ``z - logsumexp(z) + 1`` so
    tiny coordinates never round-trip through ``log``.
    """
    y = composite_prox(phi, alpha, beta, h, g)
    if isinstance(phi, EntropyMirror) and (g.kind == SIMPLEX or phi.simplex):
        z = h / (1.0 + alpha)
        return y, z - logsumexp(z) + 1.0
    if g.kind == ZERO:
        return y, h / (1.0 + alpha)
    return y, phi.grad(y)


def _checked(state, k, what):
    for name in ("x", "y", "eta"):
        v = getattr(state, name)
        if not np.all(np.isfinite(v)):
            raise StepError(f"{what} produced a non-finite {name}", k=k, diagnostics={name: v.tolist()})
    return state


def gcs_value(problem, x, y):
    return problem.gcs.at_gap(problem.f, float(np.linalg.norm(x - y)))


def accelerated_alpha(problem, state, weight):
    return math.sqrt(weight / gcs_value(problem, state.x, state.y))


def init_state(problem, algorithm=FORWARD, x0=None):
    """``x0 = y0``; ``grad_prev`` holds the gradient the first extrapolation needs."""
    f = problem.f
    x = problem.initial_point() if x0 is None else np.array(x0, dtype=np.float64)
    eta = f.mirror.grad(x)
    if algorithm == FORWARD:
        grad_prev = f.shifted_grad(x)
    elif algorithm in (PERTURBED, HOMOTOPY):
        grad_prev = f.grad(x)
    else:
        grad_prev = None
    return SolverState(x=x.copy(), y=x.copy(), eta=eta, grad_prev=grad_prev)


def md_step(state, problem, alpha_k):
    """grad phi(x+) = grad phi(x) - alpha_k grad f(x), constrained by ``g`` when present."""
    if not alpha_k > 0:
        raise ConfigurationError("mirror descent step must be positive")
    f = problem.f
    h = state.eta - alpha_k * f.grad(state.x)
    x1, eta1 = _prox(f.mirror, 0.0, alpha_k, h, problem.g)
    return _checked(SolverState(x1, x1.copy(), eta1, None, state.k + 1, alpha=alpha_k), state.k + 1, "md_step")


def accmd_forward_step(state, problem, alpha=None):
    """Forward scheme: convex-combination x update, then extrapolated dual y update."""
    f = problem.f
    mu = f.mu
    if not mu > 0:
        raise ConfigurationError("forward Acc-MD needs mu > 0; use the perturbed or homotopy scheme")
    if alpha is None:
        alpha = accelerated_alpha(problem, state, mu)
    x1 = (state.x + alpha * state.y) / (1.0 + alpha)
    G1 = f.shifted_grad(x1)
    h = state.eta - (alpha / mu) * (2.0 * G1 - state.grad_prev)
    y1, eta1 = _prox(f.mirror, alpha, alpha / mu, h, problem.g)
    new = SolverState(x1, y1, eta1, G1, state.k + 1, alpha=alpha)
    return _checked(new, state.k + 1, "accmd_forward_step")


def _backward(state, problem, weight, alpha):
    """Shared body of the backward and composite schemes with weight mu (or eps)."""
    f = problem.f
    phi = f.mirror
    h = alpha * phi.grad(state.x) + state.eta - (alpha / weight) * f.grad(state.x)
    y1, eta1 = _prox(phi, alpha, alpha / weight, h, problem.g)
    x1 = (state.x + alpha * (2.0 * y1 - state.y)) / (1.0 + alpha)
    return SolverState(x1, y1, eta1, None, state.k + 1, state.epsilon_current, alpha)


def accmd_backward_step(state, problem, alpha=None):
    f = problem.f
    if not f.mu > 0:
        raise ConfigurationError("backward Acc-MD needs mu > 0; use the perturbed or homotopy scheme")
    if alpha is None:
        alpha = accelerated_alpha(problem, state, f.mu)
    return _checked(_backward(state, problem, f.mu, alpha), state.k + 1, "accmd_backward_step")


def composite_backward_step(state, problem, alpha=None, epsilon=None):
    """Composite backward scheme; with ``epsilon`` the perturbation replaces mu."""
    weight = problem.f.mu if epsilon is None else epsilon
    if not weight > 0:
        raise ConfigurationError("composite Acc-MD needs mu > 0 or an explicit epsilon")
    if alpha is None:
        alpha = accelerated_alpha(problem, state, weight)
    new = _backward(state, problem, weight, alpha)
    new.epsilon_current = epsilon
    return _checked(new, state.k + 1, "composite_backward_step")


def perturbed_step(state, problem, epsilon, alpha=None):
    """Perturbed forward scheme for mu = 0; ``grad_prev`` holds grad f(x_k)."""
    if not epsilon > 0:
        raise ConfigurationError("perturbation level must be positive")
    f = problem.f
    phi = f.mirror
    if alpha is None:
        alpha = accelerated_alpha(problem, state, epsilon)
    x1 = (state.x + alpha * state.y) / (1.0 + alpha)
    G1 = f.grad(x1)
    gk = alpha * phi.grad(x1) + state.eta - (alpha / epsilon) * (2.0 * G1 - state.grad_prev)
    y1, eta1 = _prox(phi, alpha, alpha / epsilon, gk, problem.g)
    new = SolverState(x1, y1, eta1, G1, state.k + 1, epsilon, alpha)
    return _checked(new, state.k + 1, "perturbed_step")


def stationarity(problem, x):
    """Squared stationarity measure used by the stopping rule."""
    f = problem.f
    gr = f.grad(x)
    if problem.g.kind == ZERO:
        return float(np.dot(gr, gr))
    L = f.L
    phi = f.mirror
    u = composite_prox(phi, 0.0, 1.0 / L, phi.grad(x) - gr / L, problem.g)
    r = L * (x - u)
    return float(np.dot(r, r))


def homotopy_schedule(epsilon0, m0):
    """Yield ``(stage, eps_s, m_s)`` with eps halving and m growing by sqrt(2), rounded up."""
    s = 0
    while True:
        s += 1
        yield s, epsilon0 / 2.0**s, int(math.ceil(m0 * 2.0 ** (s / 2.0) - 1e-9))


def default_m0(problem, epsilon0):
    """Balanced initial stage length ``ln 2 * sqrt(C / eps0)`` (real-valued).

    Stage s then runs about ``ln 2 / alpha_s`` steps, so its contraction
    ``(1 + alpha_s)^-m_s`` is close to 1/2 and keeps pace with the halving
    of eps.  Longer stages over-solve each level and the observed decay
    becomes steeper than the O(1/k^2) envelope; shorter ones fall behind it.
    """
    return math.log(2.0) * math.sqrt(problem.gcs.value / epsilon0)


# -- trace ---------------------------------------------------------------------


@dataclass
class Trace:
    config: dict
    problem: dict
    records: list = field(default_factory=list)
    status: str = "running"
    message: str = ""
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    states: list | None = None
    stages: list = field(default_factory=list)
    radius: float | None = None

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name] for r in self.records], dtype=np.float64)

    @property
    def iterations(self):
        return self.records[-1]["k"] if self.records else 0

    def to_csv(self, target=None, timing=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            row = []
            for c in CSV_COLUMNS:
                v = r[c]
                if c == "time_ms" and not timing:
                    v = None
                row.append("" if v is None else (str(v) if c == "k" else repr(float(v))))
            w.writerow(row)
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text

    def initial_constant(self):
        """``E^a(x0, y0) sqrt(C / mu)``, the prefactor of the accelerated bound; None when undefined."""
        mu, C = self.problem.get("mu"), self.problem.get("C")
        if not self.records or self.records[0]["lyap_Ealpha"] is None or not mu or not mu > 0:
            return None
        return self.records[0]["lyap_Ealpha"] * math.sqrt(C / mu)

    def summary(self, timing=True):
        last = self.records[-1] if self.records else {}
        series = self.column("lyap_E") if self.records and last.get("lyap_E") is not None else self.column("grad_norm_sq")
        fit = fit_rate(series)
        out = {
            "config": self.config,
            "problem": self.problem,
            "status": self.status,
            "message": self.message,
            "iterations": self.iterations,
            "final": {c: last.get(c) for c in CSV_COLUMNS if c not in ("k", "time_ms")},
            "rate_fit": fit.as_dict(),
            "stages": self.stages,
            "radius": self.radius,
            "C0": self.initial_constant(),
        }
        if timing:
            out["wall_time_ms"] = last.get("time_ms")
        return _jsonable(out)

    def summary_json(self, timing=True):
        return json.dumps(self.summary(timing=timing), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


class _Recorder:
    def __init__(self, problem, trace, x_star, keep_states):
        self.problem = problem
        self.trace = trace
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)
        self.keep_states = keep_states
        self.t0 = time.perf_counter()
        self.s0 = None
        self._strong = None
        self._perturbed = {}
        if keep_states:
            trace.states = []

    def suite(self, epsilon=None):
        if epsilon is None:
            if self._strong is None:
                self._strong = LyapunovSuite.strong(self.problem, self.x_star)
            return self._strong
        if epsilon not in self._perturbed:
            self._perturbed = {epsilon: LyapunovSuite.perturbed_suite(self.problem, self.x_star, epsilon)}
        return self._perturbed[epsilon]

    def lyapunov(self, state, kind, alpha_sign):
        if self.x_star is None:
            return None, None
        if kind == MD:
            return self.problem.mirror.bregman(self.x_star, state.x), None
        alpha = state.alpha
        if kind == "strong":
            suite = self.suite()
        else:
            if state.epsilon_current is None:
                return None, None
            suite = self.suite(state.epsilon_current)
        E = suite.E(state.x, state.y)
        if alpha is None:
            return E, None
        Ea = E + alpha_sign * alpha * suite.cross(state.x, state.y)
        if kind == "perturbed":
            self.trace.radius = max(self.trace.radius or 0.0, suite.radius(state.x, state.y))
        return E, Ea

    def record(self, state, kind, alpha_sign=1):
        obj = self.problem.objective(state.x)
        s = stationarity(self.problem, state.x)
        if not (math.isfinite(obj) and math.isfinite(s)):
            raise StepError(f"non-finite objective at k={state.k}", k=state.k, diagnostics={"obj": obj})
        if self.s0 is None:
            self.s0 = s
        E, Ea = self.lyapunov(state, kind, alpha_sign)
        self.trace.records.append(
            {
                "k": state.k,
                "obj": obj,
                "grad_norm_sq": s,
                "lyap_E": E,
                "lyap_Ealpha": Ea,
                "time_ms": (time.perf_counter() - self.t0) * 1e3,
            }
        )
        if self.keep_states:
            self.trace.states.append(replace(state))
        return s

    def converged(self, s, tol):
        return s <= tol * self.s0


def _finish(trace, state, status, message=""):
    trace.status = status
    trace.message = message
    trace.x = state.x
    trace.y = state.y
    return trace


def run(problem, config: SolverConfig, x_star=None, keep_states=False, x0=None) -> Trace:
    """Run one solver to its stopping rule or ``max_iters``.

    ``x_star`` (defaulting to the problem's known minimizer) enables the
    Lyapunov columns.  Non-finite values abort the run; the returned trace
    then has ``status == "aborted"`` and holds every record up to the
    failure.
    """
    if x_star is None:
        x_star = problem.f.known_minimizer
    trace = Trace(config=config.as_dict(), problem=problem.metadata())
    algo = config.algorithm
    f = problem.f
    if algo == HOMOTOPY or (algo == COMPOSITE and f.mu == 0 and config.epsilon is None):
        return homotopy_run(problem, config, x_star=x_star, keep_states=keep_states, x0=x0, trace=trace)
    if algo in (FORWARD, BACKWARD) and not f.mu > 0:
        raise ConfigurationError(f"{algo} needs mu > 0; this problem has mu = {f.mu}")

    rec = _Recorder(problem, trace, x_star, keep_states)
    state = init_state(problem, algo, x0)
    if config.epsilon is not None:
        state.epsilon_current = config.epsilon
    if algo != MD:
        weight = config.epsilon if state.epsilon_current is not None else f.mu
        state.alpha = config.alpha if config.alpha is not None else accelerated_alpha(problem, state, weight)
    if algo == MD:
        step = config.step if config.step is not None else 1.0 / f.L
        kind, sign = MD, 1

        def advance(s):
            return md_step(s, problem, step)

    elif algo == FORWARD:
        kind, sign = "strong", 1

        def advance(s):
            return accmd_forward_step(s, problem, config.alpha)

    elif algo in (BACKWARD, COMPOSITE) and config.epsilon is None:
        kind, sign = "strong", -1

        def advance(s):
            return composite_backward_step(s, problem, config.alpha)

    elif algo == COMPOSITE:
        kind, sign = "perturbed", -1

        def advance(s):
            return composite_backward_step(s, problem, config.alpha, epsilon=config.epsilon)

    else:
        kind, sign = "perturbed", 1

        def advance(s):
            return perturbed_step(s, problem, config.epsilon, config.alpha)

    try:
        s = rec.record(state, kind, sign)
        if rec.converged(s, config.tol):
            return _finish(trace, state, "converged")
        while state.k < config.max_iters:
            state = advance(state)
            s = rec.record(state, kind, sign)
            if rec.converged(s, config.tol):
                return _finish(trace, state, "converged")
    except (StepError, DomainError, FloatingPointError) as exc:
        log.warning("run aborted: %s", exc)
        return _finish(trace, state, "aborted", str(exc))
    return _finish(trace, state, "max_iters")


def homotopy_run(problem, config: SolverConfig, x_star=None, keep_states=False, x0=None, trace=None) -> Trace:
    """Homotopy on the perturbation level: eps halves and the inner count grows by sqrt(2).

    The inner scheme is the perturbed forward step, or the perturbed
    composite backward step when ``g`` is an l1 penalty.  Stages are
    warm-started from the previous stage's ``(x, y)`` pair.
    """
    if x_star is None:
        x_star = problem.f.known_minimizer
    if trace is None:
        trace = Trace(config=config.as_dict(), problem=problem.metadata())
    eps0 = config.epsilon0 if config.epsilon0 is not None else problem.gcs.value
    m0 = config.m0 if config.m0 is not None else default_m0(problem, eps0)
    composite = problem.g.kind not in (ZERO, SIMPLEX)
    sign = -1 if composite else 1
    rec = _Recorder(problem, trace, x_star, keep_states)
    state = init_state(problem, HOMOTOPY, x0)
    try:
        s = rec.record(state, "perturbed", sign)
        if rec.converged(s, config.tol):
            return _finish(trace, state, "converged")
        for stage, eps, m in homotopy_schedule(eps0, m0):
            state.epsilon_current = eps
            state.alpha = None
            for _ in range(m):
                if state.k >= config.max_iters:
                    return _finish(trace, state, "max_iters")
                if composite:
                    state = composite_backward_step(state, problem, config.alpha, epsilon=eps)
                else:
                    state = perturbed_step(state, problem, eps, config.alpha)
                s = rec.record(state, "perturbed", sign)
                if rec.converged(s, config.tol):
                    trace.stages.append({"stage": stage, "epsilon": eps, "m": m, "end_k": state.k})
                    return _finish(trace, state, "converged")
            trace.stages.append({"stage": stage, "epsilon": eps, "m": m, "end_k": state.k})
            if config.epsilon_min is not None and eps <= config.epsilon_min:
                return _finish(trace, state, "converged", "reached epsilon_min")
    except (StepError, DomainError, FloatingPointError) as exc:
        log.warning("homotopy run aborted: %s", exc)
        return _finish(trace, state, "aborted", str(exc))
    return _finish(trace, state, "max_iters")  # pragma: no cover - schedule is infinite
