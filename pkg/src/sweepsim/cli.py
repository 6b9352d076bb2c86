"""Command-line front end.

    sweepsim solve SCENARIO --out DIR      trajectory, residuals, metadata
    sweepsim certify SCENARIO              sampled A1-A4 report as JSON
    sweepsim converge SCENARIO --n-list    convergence table against the oracle
    sweepsim reach SCENARIO --out DIR      reachable-set endpoints
    sweepsim list | show NAME              built-in scenarios

SCENARIO is a JSON file or the name of a built-in.  Exit codes: 0 success,
2 invalid input, 3 solver failure, 4 assumptions refuted, 5 convergence
order below 0.9.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import scenario as scn
from .assumptions import certify
from .errors import AdmissionError, ConfigurationError, InfeasibleInitial, SweepError
from .solver import admit, catching_up, solution_bound, velocity_bound_check
from .verify import (
    ORDER_THRESHOLD,
    convergence_study,
    reachability_sample,
    residual_report,
    sample_initial_values,
    uncovered_point,
)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_REFUTED, EXIT_ORDER = 0, 2, 3, 4, 5
DEFAULT_N_LIST = (250, 500, 1000, 2000)
FLOOR = 1e-8


def _num(v) -> str:
    """Shortest round-trip decimal form."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def _clean(obj):
    """JSON-safe copy: inf and nan become null, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _apply_overrides(sc, args):
    upd = {}
    if getattr(args, "n_steps", None) is not None:
        upd["n_steps"] = args.n_steps
    if getattr(args, "tol", None) is not None:
        upd["tol"] = args.tol
    if getattr(args, "seed", None) is not None:
        upd["seed"] = args.seed
    data = scn.to_dict(sc)
    data.setdefault("solver", {}).update(upd)
    return scn.parse(data)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# commands


def cmd_solve(sc, out: Path, samples=None) -> int:
    if sc.is_batch:
        return cmd_reach(sc, out, probe=False)
    s = sc.solver
    problem = sc.build_problem()
    adm = admit(problem, gamma=sc.certify.gamma, seed=s.seed)
    cert = adm.certificate
    traj = catching_up(problem, s.n_steps, tol=s.tol, seed=s.seed, admission=adm, heal_radius=s.heal_radius)
    h = problem.T / s.n_steps
    bound = solution_bound(problem, cert.theta)
    rep = residual_report(traj, r=cert.r, bound=bound, samples=samples or s.samples, seed=s.seed)
    check = velocity_bound_check(traj, bound, 10 * h, raise_on_violation=False)
    n = problem.family.dim
    if "trajectory" in sc.outputs:
        write_csv(out / "trajectory.csv", ["t"] + [f"x{i + 1}" for i in range(n)],
                  ([t, *x] for t, x in zip(traj.grid, traj.states)))
    if "residuals" in sc.outputs:
        write_csv(out / "residuals.csv", ["k", "t", "feasibility", "inclusion", "bound_margin"],
                  ([k, traj.grid[k], f, i, b] for k, f, i, b in rep.per_step()))
    meta = {
        "scenario": sc.name,
        "n_steps": s.n_steps,
        "h": h,
        "T": problem.T,
        "seed": s.seed,
        "tol": s.tol,
        "endpoint": traj.endpoint,
        "certificate": {"L1": cert.L1, "mu": cert.mu, "gamma": cert.gamma, "rho": cert.rho, "r": cert.r, "theta": cert.theta},
        "M_x0": bound.M_x0,
        "residuals": rep.summary(),
        "velocity_bound": {"slack": 10 * h, "worst_margin": check.worst_margin, "worst_step": check.worst_step, "passed": check.passed},
    }
    oracle = sc.build_oracle()
    if oracle is not None:
        exact = oracle(problem.x0, traj.grid, problem.T)
        meta["oracle_grid_error"] = float(np.linalg.norm(traj.states - exact, axis=1).max())
    if "metadata" in sc.outputs:
        write_json(out / "metadata.json", meta)
    print(json.dumps(_clean({"endpoint": traj.endpoint, **rep.summary()})))
    return EXIT_OK


def cmd_reach(sc, out: Path, n_samples=None, probe=True) -> int:
    family = sc.build_family()
    s = sc.solver
    if sc.is_batch and n_samples is None:
        spl = sc.x0
        X0 = sample_initial_values(family, spl.n, spl.seed, spl.box)
    elif sc.is_batch:
        X0 = sample_initial_values(family, n_samples, sc.x0.seed, sc.x0.box)
    else:
        X0 = sample_initial_values(family, n_samples or 100, s.seed)
    problem = sc.build_problem(X0[0])
    admit(problem, gamma=sc.certify.gamma, seed=s.seed)
    R = reachability_sample(family, problem.perturbation, problem.T, X0.shape[0], s.n_steps, seed=s.seed, x0s=X0, admission=False)
    n = family.dim
    if "endpoints" in sc.outputs:
        header = ["index"] + [f"x0_{i + 1}" for i in range(n)] + [f"xT_{i + 1}" for i in range(n)]
        write_csv(out / "endpoints.csv", header, ([k, *a, *b] for k, (a, b) in enumerate(zip(R.initial, R.endpoints))))
    summary = {"scenario": sc.name, "T": problem.T, "n_steps": s.n_steps, "h": problem.T / s.n_steps, **R.summary(),
               "failures": R.failures}
    oracle = sc.build_oracle()
    if oracle is not None:
        exact = np.array([oracle(x, problem.T, problem.T) for x in R.initial])
        summary["oracle_endpoint_error"] = float(np.nanmax(np.linalg.norm(R.endpoints - exact, axis=1)))
    if probe:
        hit = uncovered_point(R, family, problem.T, seed=s.seed)
        summary["uncovered_probe"] = None if hit is None else {"point": hit[0], "distance": hit[1]}
    if "metadata" in sc.outputs:
        write_json(out / "metadata.json", summary)
    print(json.dumps(_clean(R.summary())))
    if R.failures:
        print(f"{len(R.failures)} of {X0.shape[0]} samples failed; see metadata.json", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_certify(sc, budget=None, seed=0) -> int:
    family = sc.build_family()
    rep = certify(family, sc.certify.gamma, budget or sc.certify.budget, seed)
    print(json.dumps(_clean({"scenario": sc.name, **rep.to_dict()}), indent=2, sort_keys=True))
    if not rep.all_passed:
        failed = [k for k, ok in rep.passed.items() if not ok]
        print(f"refuted: {', '.join(failed)}", file=sys.stderr)
        return EXIT_REFUTED
    return EXIT_OK


def cmd_converge(sc, N_list, out=None) -> int:
    if len(set(N_list)) < 3:
        raise ConfigurationError("need at least 3 distinct grid sizes to fit an order")
    oracle = sc.build_oracle()
    if oracle is None or sc.is_batch:
        raise ConfigurationError(f"scenario {sc.name!r} has no oracle for a single initial value")
    problem = sc.build_problem()
    x0 = problem.x0

    table = convergence_study(
        problem,
        lambda t: oracle(x0, t, problem.T),
        N_list,
        breakpoints=oracle.breakpoints(x0),
        floor=FLOOR,
        seed=sc.solver.seed,
    )
    if out is not None:
        write_csv(out / "convergence.csv", table.columns, table.rows)
    for row in table.rows:
        print(",".join(_num(v) for v in row))
    if table.at_floor:
        print(f"errors at the projection-tolerance floor (<= {FLOOR:g}); order check skipped", file=sys.stderr)
        return EXIT_OK
    print(f"fitted order {table.fitted_order:.4f}")
    if table.fitted_order < ORDER_THRESHOLD:
        print(f"fitted order {table.fitted_order:.4f} < {ORDER_THRESHOLD}", file=sys.stderr)
        return EXIT_ORDER
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def _n_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sweepsim", description="Catching-up solver for perturbed sweeping processes.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=False):
        sp.add_argument("scenario", help="scenario JSON file or built-in name")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--n-steps", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--samples", type=int, default=None)
        if out:
            sp.add_argument("--out", default=".", help="output directory (created if missing)")

    common(sub.add_parser("solve", help="solve and write trajectory, residuals, metadata"), out=True)
    common(sub.add_parser("certify", help="sampled A1-A4 checks; --samples sets the budget"))
    sp = sub.add_parser("converge", help="convergence study against the scenario's oracle")
    common(sp, out=True)
    sp.add_argument("--n-list", type=_n_list, default=list(DEFAULT_N_LIST))
    common(sub.add_parser("reach", help="reachable-set sampling; --samples sets the number of initial values"), out=True)
    sub.add_parser("list", help="list built-in scenarios")
    sp = sub.add_parser("show", help="print a scenario as JSON")
    sp.add_argument("scenario")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "list":
            print("\n".join(sorted(scn.BUILTINS)))
            return EXIT_OK
        sc = scn.load(args.scenario)
        if args.command == "show":
            sys.stdout.write(scn.dumps(sc))
            return EXIT_OK
        sc = _apply_overrides(sc, args)
        if args.command == "solve":
            return cmd_solve(sc, _out_dir(args), args.samples)
        if args.command == "certify":
            return cmd_certify(sc, args.samples, sc.solver.seed)
        if args.command == "converge":
            return cmd_converge(sc, args.n_list, _out_dir(args))
        return cmd_reach(sc, _out_dir(args), args.samples)
    except (ConfigurationError, InfeasibleInitial) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AdmissionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUTED
    except SweepError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main(argv=None) -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        sys.exit(run(argv))
