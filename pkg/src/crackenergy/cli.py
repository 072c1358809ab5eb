"""Command-line entry point.

Usage::

    crackenergy COMMAND --scenario FILE [--out DIR] [--mesh-h H]
                [--set key=value ...] [--convention tubular|normalized]
    crackenergy report --out DIR

Exit codes: 0 all checks pass, 1 usage error, 2 scenario error,
3 numerical failure or a check outside its tolerance budget.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import NORMALIZED, TUBULAR, ConcentrationError, c2_point, cantor_part_atoms, cm_plus
from .criteria import _jsonable, minimaxi_report, theorem61_check
from .dtn import assemble_dtn, dtn_energy_identity
from .equilibrium import SolverError, residual_norms, solve, total_energy
from .flow import FlowError, integrate_flow
from .geometry import GeometryError
from .jintegral import AnnulusError, k2_annulus, k2_domain, k2_measure, prop51_check
from .propagation import LoadedBody, LoadSchedule, PropagationError, run_quasistatic, summary, trajectory_csv
from .scenario import Scenario, ScenarioError
from .velocity import TangencyError

COMMANDS = ("solve", "dtn", "j-integral", "concentration", "verify-thm61", "prop51", "minimaxi",
            "propagate")
EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (SolverError, FlowError, ConcentrationError, AnnulusError, PropagationError,
                  TangencyError, GeometryError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


class ReportError(Exception):
    """Raised when a run directory holds no command results."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crackenergy", description="Energy release, J-integral and concentration checks "
                                                "for cracked elastic bodies.")
    p.add_argument("--version", action="version", version=f"crackenergy {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="YAML scenario file")
        s.add_argument("--out", default=None, help="output directory (default: scenario output.dir)")
        s.add_argument("--mesh-h", type=float, default=None, help="override mesh.h")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted override, value parsed as YAML (repeatable)")
        s.add_argument("--convention", choices=(TUBULAR, NORMALIZED), default=TUBULAR)
    r = sub.add_parser("report")
    r.add_argument("--out", required=True, help="run directory to consolidate")
    return p


# ---------------------------------------------------------------------------
# helpers


def _check(name, value, limit, passed, relation="<="):
    return {"name": name, "value": float(value), "limit": float(limit), "relation": relation,
            "passed": bool(passed)}


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _annulus_radii(mesh, tip):
    """``(r_inner, r_outer)`` giving three rings from ``4h`` when the body allows."""
    h = mesh.mesh_size_h
    clear = mesh.domain.boundary_distance(tip)[0]
    others = [np.linalg.norm(t - tip) for t in mesh.tips if np.linalg.norm(t - tip) > 1e-12]
    if others:
        clear = min(clear, min(others))
    r_in = min(4 * h, 0.95 * clear / 8)
    return r_in, 8 * r_in


# ---------------------------------------------------------------------------
# commands; each returns (results, checks)


def cmd_solve(sc: Scenario, out: Path, args):
    prob = sc.problem()
    u = solve(prob, method="direct")
    u.to_csv(out / "field.csv")
    prob.mesh.dump(out / "mesh.txt")
    res = residual_norms(u)
    checks = [_check("interior_residual", res["interior_residual"], 1e-8, res["interior_residual"] <= 1e-8),
              _check("crack_traction_residual", res["crack_traction_residual"], 1e-8,
                     res["crack_traction_residual"] <= 1e-8)]
    return {"energy": total_energy(u), "nodes": prob.mesh.n_nodes, "triangles": prob.mesh.n_triangles,
            "residuals": res, "solver": u.info}, checks


def cmd_dtn(sc: Scenario, out: Path, args):
    prob = sc.problem()
    T = assemble_dtn(prob.mesh, prob.model)
    T.to_csv(out / "dtn.csv")
    sym = T.symmetry_defect()
    lam = T.min_eigenvalue()
    scale = float(np.abs(T.matrix).max(initial=0.0))
    ident = dtn_energy_identity(T, prob.u0, prob.mesh, prob.model)
    checks = [_check("symmetry", sym, 1e-10, sym <= 1e-10),
              _check("min_eigenvalue", lam, -1e-10 * scale, lam >= -1e-10 * scale, ">="),
              _check("energy_identity", ident.relative_gap, 1e-10, ident.relative_gap <= 1e-10)]
    return {"boundary_dofs": int(T.matrix.shape[0]), "symmetry_defect": sym, "min_eigenvalue": lam,
            "half_quadratic": ident.lhs, "minimal_energy": ident.rhs, "relative_gap": ident.relative_gap}, checks


def cmd_j_integral(sc: Scenario, out: Path, args):
    prob = sc.problem()
    u = solve(prob, method="direct")
    mesh = prob.mesh
    results, checks = {"fields": [], "tips": []}, []
    for i, eta in enumerate(sc.velocities()):
        k = k2_domain(u, eta)
        results["fields"].append({"index": i, "k2": k.value,
                                  "k2_quad6": k2_domain(u, eta, check=False, quad=6).value})
    for tip in mesh.tips:
        r_in, r_out = _annulus_radii(mesh, tip)
        ann = k2_annulus(u, tip, r_in, r_out)
        spread = ann.details["spread"]
        results["tips"].append({"tip": tuple(tip), "annulus_mean": ann.value, "extrapolated": ann.extrapolated,
                                "per_radius": ann.per_radius, "spread": spread})
        checks.append(_check(f"annulus_spread@({tip[0]:.6g},{tip[1]:.6g})", spread, 0.015, spread <= 0.015))
    for i, eta in enumerate(sc.velocities()):
        center = getattr(eta, "center", None)
        if center is None:
            continue
        hit = [t for t in results["tips"] if np.linalg.norm(np.asarray(t["tip"]) - center) < 1e-9]
        if hit:
            tip = np.asarray(hit[0]["tip"])
            a = k2_annulus(u, tip, *_annulus_radii(mesh, tip), direction=eta.direction).value
            d = results["fields"][i]["k2"]
            rel = abs(d - a) / abs(a) if a else abs(d)
            checks.append(_check(f"domain_vs_annulus[{i}]", rel, 0.02, rel <= 0.02))
    meas = k2_measure(u, sc.regions()[-1])
    _write_csv(out / "k2_sweep.csv", ["tip_id", "angle", "r_inner", "r_outer", "k2", "measure"],
               [row + (meas.value,) for row in meas.rows])
    results["k2_measure"] = meas.value
    return results, checks


def cmd_concentration(sc: Scenario, out: Path, args):
    prob = sc.problem()
    u = solve(prob, method="direct")
    radii = sc.data["radii"]
    rows, results, checks = [], {"tips": [], "probes": [], "regions": []}, []
    atoms = cantor_part_atoms(u, radii=radii)
    for i, a in enumerate(atoms):
        rows += a.estimate.rows(f"tip{i}")
        results["tips"].append({"tip": a.tip, TUBULAR: a.tubular, NORMALIZED: a.normalized})
    tipmax = max((a.value(args.convention) for a in atoms), default=0.0)
    for i, x in enumerate(np.array(sc.data["probes"], dtype=float).reshape(-1, 2)):
        est = c2_point(u, x, radii, normalized=args.convention == NORMALIZED)
        rows += est.rows(f"probe{i}")
        val = abs(est.extrapolated)
        results["probes"].append({"point": tuple(x), "value": est.extrapolated})
        lim = 1e-3 * tipmax if tipmax > 0 else 1e-3
        checks.append(_check(f"probe{i}_localization", val, lim, val <= lim))
    for i, B in enumerate(sc.regions()):
        cm = cm_plus(u, B)
        rows += cm.rows(f"region{i}")
        results["regions"].append({"region": i, "total": cm.extrapolated, "tip_part": cm.tip_part,
                                   "jump_part": cm.jump_part, "decomposition_error": cm.decomposition_error})
    _write_csv(out / "concentration.csv", ["id", "r", "energy", "ratio", "fit", "convention"], rows)
    return results, checks


def cmd_verify_thm61(sc: Scenario, out: Path, args):
    prob = sc.problem()
    u = solve(prob, method="direct")
    reps = theorem61_check(u, sc.regions(), convention=args.convention)
    checks = [_check(f"region{r.details['region']}", r.lhs, r.rhs + r.tol, r.satisfied) for r in reps]
    return {"reports": [r.to_dict() for r in reps]}, checks


def cmd_prop51(sc: Scenario, out: Path, args):
    prob = sc.problem()
    fields = sc.velocities()
    if not fields:
        raise ScenarioError("velocity: prop51 needs at least one field")
    fl = sc.data["flow"]
    dt, t = float(fl["dt"]), float(fl.get("t", 0.0))
    flow = integrate_flow(fields[0], t + 2 * dt, dt / 8, points=np.zeros((0, 2)), samples=1)
    res = prop51_check(prob, flow, t, dt)
    checks = [_check("lhs<=rhs+tol", res.lhs - res.rhs, res.tol, res.satisfied)]
    return {"lhs": res.lhs, "rhs": res.rhs, "tol": res.tol, "relative_gap": res.relative_gap,
            "details": res.details}, checks


def cmd_minimaxi(sc: Scenario, out: Path, args):
    if len(sc.domain.tips) == 0:
        raise ScenarioError("domain.crack: minimaxi needs at least one crack tip")
    prob = sc.problem()
    try:
        rep = minimaxi_report(prob, dt=float(sc.data["flow"]["dt"]), convention=args.convention,
                              coarse=sc.problem(2 * sc.h))
    except ConcentrationError as exc:
        raise ConcentrationError(f"{exc} (the mesh-error budget also needs the 2h = {2 * sc.h:g} mesh; "
                                 "lower --mesh-h)") from exc
    checks = [_check("chain", rep.lhs, rep.rhs + rep.tol, rep.satisfied)]
    return {"report": rep.to_dict()}, checks


def cmd_propagate(sc: Scenario, out: Path, args):
    dom = sc.domain
    body = LoadedBody(dom.outer, sc.model, sc.load_function(), sc.h)
    sch = sc.data["schedule"]
    schedule = LoadSchedule.ramp(float(sch["T"]), int(sch["steps"]), float(sch.get("s_max", 1.0)))
    delta = float(sch["delta"]) if sch.get("delta") is not None else 2 * sc.h
    states = run_quasistatic(body, dom.crack, schedule, sc.G, delta)
    with open(out / "trajectory.jsonl", "w", encoding="utf-8") as fh:
        for st in states:
            fh.write(json.dumps(_jsonable(st.record()), sort_keys=True) + "\n")
    trajectory_csv(states, out / "trajectory.csv")
    summ = summary(states, sc.G)
    worst = max((max(st.bookkeeping.get("residuals", {}).values(), default=0.0) for st in states[1:]),
                default=0.0)
    checks = [_check("length_monotone", float(summ["length_monotone"]), 1.0, summ["length_monotone"], ">="),
              _check("bookkeeping", float(summ["bookkeeping_ok"]), 1.0, summ["bookkeeping_ok"], ">="),
              _check("balance_residual", worst, 1e-8, worst <= 1e-8)]
    return summ, checks


HANDLERS = {"solve": cmd_solve, "dtn": cmd_dtn, "j-integral": cmd_j_integral,
            "concentration": cmd_concentration, "verify-thm61": cmd_verify_thm61, "prop51": cmd_prop51,
            "minimaxi": cmd_minimaxi, "propagate": cmd_propagate}


def run_scenario(path, command: str, overrides=(), out=None, mesh_h=None, convention=TUBULAR) -> int:
    """Run one command; write ``<command>.json`` and ``run_meta.json`` into the output directory."""
    if command not in HANDLERS:
        raise UsageError(f"unknown command {command!r}")
    overrides = list(overrides)
    if mesh_h is not None:
        overrides.append(f"mesh.h={mesh_h!r}")
    sc = Scenario.load(path, overrides)
    out = Path(out if out is not None else sc.data["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    meta = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__,
            "command": command, "scenario": str(path), "scenario_digest": sc.digest()}
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    ns = argparse.Namespace(convention=convention)
    try:
        results, checks = HANDLERS[command](sc, out, ns)
        status = EXIT_OK if all(c["passed"] for c in checks) else EXIT_NUMERIC
        error = None
    except NUMERIC_ERRORS as exc:
        results, checks, status = {}, [], EXIT_NUMERIC
        error = {"type": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "dump", None):
            error["state"] = exc.dump
    record = {"command": command, "scenario": sc.name, "scenario_digest": sc.digest(),
              "version": __version__, "convention": convention, "exit_status": status,
              "results": results, "checks": checks, "error": error}
    (out / f"{command}.json").write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    if error:
        print(json.dumps(error), file=sys.stderr)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {command}:{c['name']} value={c['value']:.6g} "
              f"limit{c['relation']}{c['limit']:.6g}")
    return status


def emit_report(run_dir) -> dict:
    """Consolidate every ``<command>.json`` of a run directory into report.json and report.csv.

    Raises
    ------
    ReportError
        If the directory holds no command results.
    """
    run_dir = Path(run_dir)
    files = sorted(p for p in run_dir.glob("*.json") if p.stem in HANDLERS) if run_dir.is_dir() else []
    if not files:
        raise ReportError(f"no command results in {run_dir}")
    records = [json.loads(p.read_text(encoding="utf-8")) for p in files]
    report = {"version": __version__, "records": [
        {k: r[k] for k in ("command", "scenario", "scenario_digest", "convention", "exit_status",
                           "checks", "error")} for r in records]}
    report["passed"] = all(r["exit_status"] == 0 for r in records)
    (run_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    rows = [(r["command"], c["name"], c["value"], c["relation"], c["limit"], int(c["passed"]))
            for r in records for c in r["checks"]]
    _write_csv(run_dir / "report.csv", ["command", "check", "value", "relation", "limit", "passed"], rows)
    return report


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.command == "report":
            try:
                rep = emit_report(args.out)
            except ReportError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_USAGE
            return EXIT_OK if rep["passed"] else EXIT_NUMERIC
        return run_scenario(args.scenario, args.command, args.set, args.out, args.mesh_h, args.convention)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
