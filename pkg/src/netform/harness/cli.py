"""Command line front end: ``netform <command> --scenario s.json --out DIR``.

Exit status: 0 on success, 1 when a study or check fails, 2 on a bad or
missing scenario.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from ..dynamics import TRAJECTORY_COLUMNS, minimize, run_flow
from ..energy import continuum_pressure, total_energy_with_diffusion
from ..linsolve import IncompatibleRhs, NoConvergence
from ..mesh import q0
from ..sources import SourceError
from . import output
from .checks import run_checks
from .scenario import ScenarioError, load_scenario
from .studies import (LevelRecord, StudyResult, gamma_recovery_check, minimizer_convergence_study,
                      refinement_study, scenario_sources, weak_strong_check)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _svgs(sc, out, mesh, C):
    if sc.svg and mesh.dim == 2:
        c = q0(mesh, C)
        P, _ = continuum_pressure(mesh, c, sc.params, scenario_sources(sc, mesh))
        output.write_field_svgs(out, mesh, c, P)


def _write_study(out, result, sc):
    output.write_study_csv(out / "study.csv", result)
    output.write_json(out / "summary.json", output.summary(result, sc))


def cmd_solve(sc, out):
    result = StudyResult("solve", [], reference_kind="none")
    for k, N in enumerate(sc.levels):
        mesh = sc.mesh(N)
        C = sc.initial_conductivities(mesh)
        rep = total_energy_with_diffusion(mesh, C, sc.params, scenario_sources(sc, mesh))
        result.records.append(LevelRecord(k, N, 1.0 / N, rep))
    _write_study(out, result, sc)
    mesh = sc.mesh(sc.levels[-1])
    _svgs(sc, out, mesh, sc.initial_conductivities(mesh))
    return result


def cmd_minimize(sc, out):
    result = StudyResult("minimize", [], reference_kind="none",
                         table_columns=("N", "iterations", "grad_norm", "converged"))
    for k, N in enumerate(sc.levels):
        mesh = sc.mesh(N)
        res = minimize(mesh, sc.initial_conductivities(mesh), sc.params, scenario_sources(sc, mesh),
                       tol=sc.tol, max_iter=sc.max_iter)
        result.records.append(LevelRecord(k, N, 1.0 / N, res.energy))
        result.table.append([N, res.iterations, res.grad_norm, res.converged])
        np.savetxt(out / f"conductivities_N{N}.txt", res.C, fmt="%.17g")
        if not res.converged:
            result.fail(f"no convergence at N={N}: |grad| = {res.grad_norm:.3e} "
                        f"after {res.iterations} iterations")
        if k == len(sc.levels) - 1:
            _svgs(sc, out, mesh, res.C)
    _write_study(out, result, sc)
    return result


def cmd_flow(sc, out):
    N = sc.levels[-1]
    mesh = sc.mesh(N)
    traj = run_flow(mesh, sc.initial_conductivities(mesh), sc.params, scenario_sources(sc, mesh),
                    t_end=sc.t_end, dt=sc.dt)
    rows = traj.rows()
    output.write_rows(out / "trajectory.csv", TRAJECTORY_COLUMNS, rows)
    result = StudyResult("flow", [], reference_kind="none", extra={"stopped": traj.stopped, "N": N,
                                                                  "steps": len(rows) - 1})
    totals = [r[4] for r in rows]
    if any(b > a for a, b in zip(totals, totals[1:])):
        result.fail("energy increased along the trajectory")
    if any(r[5] < 0 for r in rows):
        result.fail("negative conductivity along the trajectory")
    result.records.append(LevelRecord(0, N, 1.0 / N, traj.states[-1].report))
    _write_study(out, result, sc)
    _svgs(sc, out, mesh, traj.states[-1].C)
    return result


def _table_study(fn, name):
    def run(sc, out):
        result = fn(sc)
        _write_study(out, result, sc)
        if result.table_columns:
            output.write_rows(out / f"{name}.csv", result.table_columns, result.table)
        return result
    return run


COMMANDS = {
    "solve": cmd_solve,
    "minimize": cmd_minimize,
    "flow": cmd_flow,
    "refine": _table_study(refinement_study, "refine"),
    "weakstrong": _table_study(weak_strong_check, "weakstrong"),
    "gamma": _table_study(gamma_recovery_check, "gamma"),
    "minconv": _table_study(minimizer_convergence_study, "minconv"),
}


def build_parser():
    p = argparse.ArgumentParser(prog="netform", description="Transport-network energy experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="scenario JSON file")
        s.add_argument("--out", default="netform-out", help="output directory")
    c = sub.add_parser("check", help="run the built-in verification suite")
    c.add_argument("--out", default=None, help="optional directory for check.json")
    return p


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "check":
        results = run_checks()
        for r in results:
            print(r.line())
        if args.out:
            output.write_json(_outdir(args) / "check.json",
                              [{"name": r.name, "passed": r.passed, "value": r.value, "limit": r.limit}
                               for r in results])
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL
    try:
        sc = load_scenario(args.scenario)
        out = _outdir(args)
        result = COMMANDS[args.command](sc, out)
    except (ScenarioError, SourceError, IncompatibleRhs) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for msg in result.messages:
        print(msg)
    print(f"{args.command}: {'ok' if result.passed else 'FAILED'} -> {out}")
    return EXIT_OK if result.passed else EXIT_FAIL


def main():
    sys.exit(run_cli())
