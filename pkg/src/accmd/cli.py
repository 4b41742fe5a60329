"""Command-line harness: ``accmd {run,verify,bench,gen}``.

Every flag can also come from a JSON manifest (``--manifest path``) whose
keys are the long flag names with dashes replaced by underscores; flags
given on the command line win over manifest values.

Exit codes: 0 success, 1 runtime failure (aborted run, failed checks,
unwritable output), 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import certify
from .errors import AccMDError, ConfigurationError, DimensionError, ParseError
from .linalg import DiagonalMatrix
from .mirror import EntropyMirror, QuadraticMirror, QuarticMirror
from .objective import (
    QuarticObjective,
    estimate_gcs,
    load_dataset,
    make_counterexample_1d,
    make_lasso,
    make_lasso_random,
    make_log_linear,
    make_log_linear_random,
    make_max_margin_random,
    make_quartic,
    ProblemInstance,
    save_dataset,
)
from .solver import ALGORITHMS, MD, SolverConfig, _jsonable, run

log = logging.getLogger("accmd")

PROBLEMS = ("loglinear", "maxmargin", "quartic", "lasso", "counterexample")
ESTIMATORS = {
    "exact": "exact-formula",
    "power": "power-method",
    "practical": "practical-adaptive",
    "global-L": "global-L",
}
CHECKS = (
    "three-point",
    "conjugate-symmetry",
    "strong-lyapunov",
    "step-identity",
    "perturbed-step-identity",
    "gcs",
    "relative-bounds",
)
MIRRORS = ("quadratic", "entropy", "quartic")
DEFAULT_DIMS = {"loglinear": 16, "maxmargin": 32, "quartic": 64, "lasso": 50, "counterexample": 1}


class UsageError(AccMDError):
    pass


# -- parser --------------------------------------------------------------------


def _problem_flags(p):
    p.add_argument("--manifest", help="JSON file with flag values (explicit flags win)")
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=PROBLEMS, default="loglinear")
    g.add_argument("--dim", type=int, help="dimension (family default if omitted)")
    g.add_argument("--rows", type=int, default=20, help="rows of the random LASSO design")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--g", dest="g_vec", help="comma-separated log-linear vector, overrides --dim/--seed")
    g.add_argument("--lambda", dest="lam", type=float, default=0.05, help="l1 weight for lasso")
    g.add_argument("--data", help="dataset file for lasso (first column response)")
    g.add_argument("--format", dest="fmt", choices=("csv", "svmlight"), default="csv")
    g.add_argument("--c-estimator", choices=tuple(ESTIMATORS), help="GCS constant estimator")
    g.add_argument("--theta", type=float, default=1.0, help="Hoelder exponent for --c-estimator practical")
    g.add_argument("--gap", type=float, default=1.0, help="||x - y|| scale for --c-estimator practical")
    g.add_argument("--mu", type=float, help="relative strong convexity override (quartic only)")


def _solver_flags(p, multiple=False):
    g = p.add_argument_group("solver")
    if multiple:
        g.add_argument("--solvers", default=f"{MD},accmd-forward", help="comma-separated solver list (at least two)")
    else:
        g.add_argument("--solver", choices=ALGORITHMS, default="accmd-forward")
    g.add_argument("--alpha", type=float)
    g.add_argument("--step", type=float, help="mirror descent step (default 1/L)")
    g.add_argument("--epsilon", type=float, help="fixed perturbation level for the perturbed scheme")
    g.add_argument("--epsilon0", type=float)
    g.add_argument("--m0", type=int)
    g.add_argument("--epsilon-min", type=float)
    g.add_argument("--tol", type=float, default=1e-12)
    g.add_argument("--max-iters", type=int, default=10_000)


def build_parser():
    parser = argparse.ArgumentParser(prog="accmd", description="Accelerated mirror descent toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one solver and write its trace")
    _problem_flags(p)
    _solver_flags(p)
    p.add_argument("--out", help="trace CSV path (stdout if omitted)")
    p.add_argument("--json-summary", help="summary JSON path")
    p.add_argument("--no-timing", action="store_true")

    p = sub.add_parser("verify", help="run identity and inequality checks")
    _problem_flags(p)
    p.add_argument("--all", action="store_true", help="run every check that applies to the problem")
    p.add_argument("--check", action="append", choices=CHECKS, default=None)
    p.add_argument("--mirror", choices=MIRRORS, help="check a bare mirror function instead of a problem")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--gcs-samples", type=int, default=10_000)
    p.add_argument("--steps", type=int, default=200, help="trajectory length for step identities")
    p.add_argument("--epsilon", type=float, default=1e-2, help="perturbation level for the perturbed identity")
    p.add_argument("--radius", type=float, default=0.1, help="GCS sampling radius around x* off the simplex")
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--no-timing", action="store_true")

    p = sub.add_parser("bench", help="compare solvers on one instance")
    _problem_flags(p)
    _solver_flags(p, multiple=True)
    p.add_argument("--target", type=float, default=1e-8, help="relative objective error target")
    p.add_argument("--out", help="JSON table path")
    p.add_argument("--no-timing", action="store_true")

    p = sub.add_parser("gen", help="write a problem instance to disk")
    _problem_flags(p)
    p.add_argument("--out", required=False, help="output directory")
    p.add_argument("--no-timing", action="store_true")
    return parser


def parse_args(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.manifest:
        try:
            with open(args.manifest) as fh:
                manifest = json.load(fh)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read manifest {args.manifest}: {exc}")
        if not isinstance(manifest, dict):
            parser.error("manifest must be a JSON object")
        command = manifest.pop("command", None)
        if command and command != args.command:
            parser.error(f"manifest is for {command!r}, not {args.command!r}")
        known = vars(args)
        unknown = sorted(set(manifest) - set(known) - {"manifest"})
        if unknown:
            parser.error(f"unknown manifest keys: {', '.join(unknown)}")
        # re-parse so explicit flags override the manifest
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**manifest)
        args = parser.parse_args(argv)
    if args.command == "gen" and not args.out:
        parser.error("gen needs --out")
    return args


# -- problem construction ------------------------------------------------------


def _gcs_params(args, f):
    method = ESTIMATORS[args.c_estimator]
    if method == "practical-adaptive":
        params = {"theta": args.theta, "gap": args.gap}
        if not isinstance(f.mirror, QuadraticMirror):
            params["radius"] = 1.0
        return method, params
    return method, {}


def build_problem(args) -> ProblemInstance:
    name = args.problem
    dim = args.dim if args.dim is not None else DEFAULT_DIMS[name]
    if dim < 1:
        raise UsageError("--dim must be positive")
    if args.mu is not None and name != "quartic":
        raise UsageError("--mu applies to the quartic family only")
    if args.data and name != "lasso":
        raise UsageError("--data applies to the lasso family only")
    if name == "loglinear":
        if args.g_vec:
            try:
                g_vec = [float(t) for t in args.g_vec.split(",")]
            except ValueError:
                raise UsageError(f"--g must be comma-separated numbers, got {args.g_vec!r}") from None
            problem = make_log_linear(g_vec)
        else:
            problem = make_log_linear_random(dim, args.seed)
    elif name == "maxmargin":
        problem = make_max_margin_random(dim, args.seed)
    elif name == "quartic":
        problem = make_quartic(dim, args.seed)
        if args.mu is not None:
            d = problem.data
            f = QuarticObjective(d["A"], d["b"], d["C"], d["d"], d["E"], mu=args.mu, seed=args.seed)
            problem = ProblemInstance(f, problem.g, estimate_gcs(f, "global-L"), "quartic", args.seed, data=d)
    elif name == "lasso":
        if args.data:
            A, b = load_dataset(args.data, args.fmt)
            problem = make_lasso(A, b, lam=args.lam, name="lasso-data")
        else:
            problem = make_lasso_random(args.rows, dim, args.seed, lam=args.lam)
    else:
        problem = make_counterexample_1d()
    if args.c_estimator:
        method, params = _gcs_params(args, problem.f)
        problem = problem.with_gcs(estimate_gcs(problem.f, method, **params))
    return problem


def _config(args, algorithm, timing):
    return SolverConfig(
        algorithm,
        alpha=args.alpha,
        step=args.step,
        epsilon=args.epsilon,
        epsilon0=args.epsilon0,
        m0=args.m0,
        epsilon_min=args.epsilon_min,
        tol=args.tol,
        max_iters=args.max_iters,
        timing=timing,
    )


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


# -- subcommands ---------------------------------------------------------------


def cmd_run(args):
    timing = not args.no_timing
    problem = build_problem(args)
    config = _config(args, args.solver, timing)
    x_star = None
    if problem.f.mu > 0 or problem.f.known_minimizer is not None:
        x_star, _ = certify.reference_minimizer(problem)
    trace = run(problem, config, x_star=x_star)
    _write(args.out, trace.to_csv(timing=timing))
    if args.json_summary:
        _write(args.json_summary, trace.summary_json(timing=timing) + "\n")
    log.info("%s: %s after %d iterations", args.solver, trace.status, trace.iterations)
    if trace.status == "aborted":
        print(f"run aborted: {trace.message}", file=sys.stderr)
        return 1
    return 0


def _bare_mirror(name, dim):
    if name == "quadratic":
        return QuadraticMirror(DiagonalMatrix(np.linspace(1.0, 3.0, dim)))
    if name == "entropy":
        return EntropyMirror(dim, simplex=True)
    return QuarticMirror(dim)


def verify_reports(args):
    """Build the list of CheckReports selected by ``args``."""
    checks = list(CHECKS) if args.all or not args.check else args.check
    reports = []
    if args.mirror:
        phi = _bare_mirror(args.mirror, args.dim or 8)
        for name in checks:
            if name == "three-point":
                reports.append(certify.check_three_point(phi, args.samples, args.seed))
            elif name == "conjugate-symmetry":
                reports.append(certify.check_conjugate_symmetry(phi, args.samples, args.seed))
            elif not args.all:
                raise UsageError(f"check {name!r} needs a problem, not a bare mirror")
        return reports

    problem = build_problem(args)
    strong = problem.f.mu > 0
    x_star = None

    def star():
        nonlocal x_star
        if x_star is None:
            exact = getattr(problem.f, "stationary_point", None)
            x_star = exact() if exact is not None else certify.reference_minimizer(problem)[0]
        return x_star

    for name in checks:
        if name == "three-point":
            reports.append(certify.check_three_point(problem.mirror, args.samples, args.seed))
            reports.append(certify.check_three_point(problem.f, args.samples, args.seed, space=certify.problem_space(problem), dim=problem.dim))
        elif name == "conjugate-symmetry":
            reports.append(certify.check_conjugate_symmetry(problem.mirror, args.samples, args.seed))
        elif name == "strong-lyapunov":
            if strong:
                reports.append(certify.check_strong_lyapunov(problem, args.samples, args.seed, star()))
            elif not args.all:
                raise UsageError("strong-lyapunov needs mu > 0")
        elif name == "step-identity":
            if strong:
                traj = certify.forward_trajectory(problem, args.steps)
                reports.append(certify.check_step_identity(traj, problem, star()))
            elif not args.all:
                raise UsageError("step-identity needs mu > 0")
        elif name == "perturbed-step-identity":
            if problem.on_simplex and np.min(star()) <= 0:
                # the identity needs grad f(x*) orthogonal to the simplex, i.e. an interior x*
                if not args.all:
                    raise UsageError("perturbed-step-identity needs an interior minimizer")
                print(f"SKIP {name}[{problem.name}]: minimizer lies on the simplex boundary")
            elif problem.g.kind != "l1":
                traj = certify.perturbed_trajectory(problem, args.steps, args.epsilon)
                reports.append(certify.check_step_identity(traj, problem, star()))
            elif not args.all:
                raise UsageError("perturbed-step-identity does not apply to l1 problems")
        elif name == "gcs":
            if problem.on_simplex:
                reports.append(certify.check_gcs(problem, args.gcs_samples, args.seed))
            else:
                reports.append(certify.check_gcs(problem, args.gcs_samples, args.seed, x_star=star(), radius=args.radius))
        elif name == "relative-bounds":
            if problem.g.kind != "l1" and not isinstance(problem.f, QuarticObjective):
                reports.append(certify.check_relative_bounds(problem, args.samples, args.seed))
            elif not args.all:
                raise UsageError("relative-bounds is checked only where mu and L are global constants")
    return reports


def cmd_verify(args):
    reports = verify_reports(args)
    for r in reports:
        print(r.line())
    payload = json.dumps(
        {"passed": all(r.passed for r in reports), "checks": [r.as_dict() for r in reports]},
        indent=2, sort_keys=True,
    )
    if args.out:
        _write(args.out, payload + "\n")
    return 0 if all(r.passed for r in reports) else 1


def bench_table(args):
    timing = not args.no_timing
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if len(solvers) < 2:
        raise UsageError("bench needs at least two solvers")
    bad = [s for s in solvers if s not in ALGORITHMS]
    if bad:
        raise UsageError(f"unknown solver(s): {', '.join(bad)}")
    problem = build_problem(args)
    x_ref, _ = certify.reference_minimizer(problem)
    f_ref = problem.objective(x_ref)
    scale = max(abs(f_ref), 1e-300)
    rows = []
    for name in solvers:
        config = _config(args, name, timing)
        config.tol = 0.0
        trace = run(problem, config, x_star=x_ref if problem.f.mu > 0 else None)
        rel = (trace.column("obj") - f_ref) / scale
        hit = np.nonzero(rel <= args.target)[0]
        k_hit = int(trace.records[hit[0]]["k"]) if hit.size else None
        row = {
            "solver": name,
            "status": trace.status,
            "iterations": trace.iterations,
            "iterations_to_target": k_hit,
            "final_rel_error": float(rel[-1]),
            "rate_fit": certify.fit_rate(rel).as_dict(),
        }
        if timing:
            row["time_to_target_ms"] = trace.records[hit[0]]["time_ms"] if hit.size else None
        rows.append(row)
    return {"problem": problem.metadata(), "reference_objective": f_ref, "target": args.target, "rows": rows}


def cmd_bench(args):
    table = bench_table(args)
    for r in table["rows"]:
        print(f"{r['solver']:>20}  {r['status']:>9}  to-target={r['iterations_to_target']}  final={r['final_rel_error']:.3e}")
    if args.out:
        _write(args.out, json.dumps(_jsonable(table), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_gen(args):
    problem = build_problem(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    files = []
    for key, value in sorted(problem.data.items()):
        arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
        path = os.path.join(out, f"{key}.csv")
        if arr.ndim == 1:
            arr = arr[:, None]
        np.savetxt(path, arr, delimiter=",", fmt="%.17g")
        files.append(os.path.basename(path))
    if problem.g.kind == "l1":
        save_dataset(os.path.join(out, "dataset.csv"), problem.f.A, problem.f.b)
        files.append("dataset.csv")
    meta = dict(problem.metadata(), files=files)
    with open(os.path.join(out, "metadata.json"), "w") as fh:
        fh.write(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    print(os.path.join(out, "metadata.json"))
    return 0


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "bench": cmd_bench, "gen": cmd_gen}


def main(argv=None):
    level = os.environ.get("ACCMD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    args = parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError, DimensionError, ParseError) as exc:
        print(f"accmd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"accmd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
