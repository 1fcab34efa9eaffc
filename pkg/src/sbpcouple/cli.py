"""Command line front end: ``run``, ``spectrum``, ``converge``, ``verify``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .analysis import (ConvergenceRow, assemble_global_operator, convergence_rates, problem_errors,
                       spectrum, symmetric_part_check, write_convergence_csv)
from .config import (ConfigError, build_problem, build_stepper, list_presets, load_config,
                     load_preset, validate_config, with_resolution)
from .time_integration import NumericalFailure, integrate
from .verification import SCOPES, format_report, run_checks, write_report_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("sbpcouple")


def _load(args) -> dict:
    if args.config and args.preset:
        raise ConfigError("/", "give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError("/", "one of --config or --preset is required")
    return validate_config(cfg)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _initial_state(cfg, problem, t0):
    if cfg.get("initial", "exact") == "zero":
        return np.zeros(problem.N)
    return problem.exact_state(t0)


def _write_snapshot(problem, state, out: Path) -> list:
    files = []
    X, Y = problem.points()
    for bid, u, x, y in zip(problem.ids, problem.split(state), problem.split(X), problem.split(Y)):
        name = f"snapshot_{bid}.csv"
        np.savetxt(out / name, np.column_stack([x, y, u]), delimiter=",", header="x,y,u",
                   comments="", fmt="%.17g")
        files.append(name)
    return files


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    problem = build_problem(cfg)
    stepper = build_stepper(cfg, problem)
    y0 = _initial_state(cfg, problem, stepper.t_start)
    t0 = time.perf_counter()
    result = integrate(problem, stepper, y0=y0, log_energy=True)
    wall = time.perf_counter() - t0
    files = _write_snapshot(problem, result.state, out)
    result.energy_csv(out / "energy.csv", problem.ids)
    files.append("energy.csv")
    manifest = {"config": cfg, "t_final": result.t, "dt": result.dt, "steps": result.steps,
                "blocks": problem.ids, "files": files}
    energies = [e[2] for e in result.energy_log]
    growth = max((b - a) / max(energies[0], 1e-300) for a, b in zip(energies, energies[1:])) \
        if len(energies) > 1 else 0.0
    manifest["max_relative_energy_increase"] = growth
    print(f"t = {result.t:.6g} after {result.steps} steps (dt = {result.dt:.3e}, {wall:.1f} s)")
    if problem.solution is not None:
        per, total = problem_errors(problem, result.state, result.t)
        manifest["errors"] = {"per_block": dict(zip(problem.ids, per)), "total": total}
        for bid, e in zip(problem.ids, per):
            print(f"  l2 error {bid:<8} {e:.4e}")
        print(f"  l2 error total    {total:.4e}")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    tol = args.tol if args.tol is not None else float(cfg.get("tol", 1e-8))
    problem = build_problem(cfg)
    if not problem.is_linear:
        raise ConfigError("/flux/name", "spectrum needs a linear flux")
    F = assemble_global_operator(problem)
    rep = spectrum(F, tol)
    if rep.error is not None:
        raise NumericalFailure(f"eigenvalue computation failed: {rep.error}")
    rep.write_csv(out / "spectrum.csv")
    sym = symmetric_part_check(problem, tol)
    summary = {"dof": problem.N, "spectral_abscissa": rep.spectral_abscissa,
               "threshold": rep.threshold, "positive_eigenvalues": rep.positive_count(),
               "verdict": rep.verdict, "symmetric_part_max_eigenvalue": sym.max_eigenvalue,
               "energy_estimate_holds": sym.passed}
    (out / "spectrum_summary.json").write_text(json.dumps(summary, indent=2))
    print(f"{rep.verdict}: spectral abscissa {rep.spectral_abscissa:.4e} "
          f"(threshold {rep.threshold:.2e}, {rep.positive_count()} eigenvalues above, N = {problem.N})")
    print(f"symmetric part max eigenvalue {sym.max_eigenvalue:.4e}")
    return EXIT_OK


def converge_rows(cfg: dict, progress=None) -> list:
    ladder = cfg.get("ladder")
    if not ladder or len(ladder) < 2:
        raise ConfigError("/ladder", "convergence needs a ladder of at least two resolutions")
    if cfg.get("solution") is None:
        raise ConfigError("/solution", "convergence needs an analytic solution")
    rows = []
    for m in ladder:
        c = with_resolution(cfg, m)
        problem = build_problem(c)
        stepper = build_stepper(c, problem)
        result = integrate(problem, stepper, y0=_initial_state(c, problem, stepper.t_start),
                           log_energy=False)
        per, _ = problem_errors(problem, result.state, result.t)
        kinds = [b.kind for b in problem.blocks]
        fe_h = [b.h_max for b in problem.blocks if b.kind == "fe"]
        rows.append(ConvergenceRow(
            m=int(m), r_max=max(fe_h) if fe_h else float("nan"),
            l2e_fd=sum(e for e, k in zip(per, kinds) if k == "fd"),
            l2e_fe=sum(e for e, k in zip(per, kinds) if k == "fe"),
            per_block=per, h=1.0 / (int(m) - 1)))
        if progress is not None:
            progress(rows[-1])
    convergence_rates(rows)
    return rows


def cmd_converge(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    print(f"{'m':>4} {'r_max':>9} {'l2e_fd':>10} {'l2e_fe':>10} {'l2e_total':>10} {'Q':>6}")

    def show(r):
        print(f"{r.m:>4} {r.r_max:>9.4g} {r.l2e_fd:>10.3e} {r.l2e_fe:>10.3e} {r.l2e_total:>10.3e}", flush=True)

    rows = converge_rows(cfg, show)
    write_convergence_csv(rows, out / "convergence.csv")
    print("Q:", ", ".join(f"{r.Q:.2f}" for r in rows[1:]))
    return EXIT_OK


def cmd_verify(args) -> int:
    scopes = tuple(args.scope) if args.scope else SCOPES
    checks = run_checks(scopes, inject_fault=args.inject_fault)
    if args.tol is not None:
        for c in checks:
            if c.kind == "le" and c.limit > 0:
                c.limit = max(c.limit, args.tol)
    print(format_report(checks))
    if args.out:
        write_report_csv(checks, _out_dir(args) / "verify.csv")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbpcouple", description="Hybrid SBP finite difference / "
                                "P1 finite element multiblock solver.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, out_required=True):
        sp_.add_argument("--config", help="JSON run configuration")
        sp_.add_argument("--preset", help=f"shipped configuration: {', '.join(list_presets())}")
        sp_.add_argument("--out", required=out_required, help="output directory")
        sp_.add_argument("--tol", type=float, default=None, help="stability / check tolerance")

    common(sub.add_parser("run", help="integrate in time and write snapshots"))
    common(sub.add_parser("spectrum", help="eigenvalues of the semi-discrete operator"))
    common(sub.add_parser("converge", help="run a resolution ladder and report rates"))
    v = sub.add_parser("verify", help="check operator, interpolation and coupling invariants")
    v.add_argument("--out", help="directory for verify.csv")
    v.add_argument("--tol", type=float, default=None, help="loosen upper-bound checks to this value")
    v.add_argument("--scope", action="append", choices=SCOPES, help="restrict to a check group")
    v.add_argument("--inject-fault", action="store_true",
                   help="corrupt one interpolation entry to demonstrate failure detection")
    return p


COMMANDS = {"run": cmd_run, "spectrum": cmd_spectrum, "converge": cmd_converge, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
