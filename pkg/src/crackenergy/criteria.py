"""Propagation criteria and the inequalities linking release rates, the
generalized Rice integral and energy concentration.

Every check returns a :class:`CriterionReport` whose ``tol`` is an explicit
sum of measured error estimates (finite differences, quadrature,
extrapolation). ``relation`` states the orientation: ``">="`` means
``lhs >= rhs - tol`` and ``"<="`` means ``lhs <= rhs + tol``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .concentration import NORMALIZED, TUBULAR, c2_point, cantor_part_atoms
from .dtn import release_rate_richardson
from .equilibrium import DisplacementField, EquilibriumProblem
from .flow import FlowMap, integrate_flow, transport_crack
from .geometry import Disc, Region, WholeBody, length_variation, perimeter_measure
from .jintegral import bulk_density, k2_domain, k2_measure
from .velocity import PlateauField, ScaledField, SumField, VelocityField

CONVENTIONS = (TUBULAR, NORMALIZED)


@dataclass(frozen=True)
class GriffithConfig:
    """Griffith constant (energy per unit crack length)."""

    G: float

    def __post_init__(self):
        if not self.G >= 0:
            raise ValueError(f"Griffith constant must be >= 0, got {self.G}")


@dataclass
class CriterionReport:
    criterion: str
    time: float
    lhs: float
    rhs: float
    tol: float
    satisfied: bool
    relation: str = ">="
    convention: str = TUBULAR
    details: dict = field(default_factory=dict)
    digest: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["details"] = _jsonable(self.details)
        return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def decide(lhs, rhs, tol, relation) -> bool:
    if relation == ">=":
        return bool(lhs >= rhs - tol)
    return bool(lhs <= rhs + tol)


def digest(*items) -> str:
    """SHA-256 over arrays (raw bytes) and JSON-able parameters."""
    hsh = hashlib.sha256()
    for it in items:
        if isinstance(it, DisplacementField):
            hsh.update(np.ascontiguousarray(it.mesh.nodes).tobytes())
            hsh.update(np.ascontiguousarray(it.values).tobytes())
        elif isinstance(it, np.ndarray):
            hsh.update(np.ascontiguousarray(it).tobytes())
        else:
            hsh.update(json.dumps(_jsonable(it), sort_keys=True, default=repr).encode())
    return hsh.hexdigest()[:16]


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def support_discs(eta: VelocityField) -> list:
    """Discs ``(center, radius)`` covering the support of ``eta``."""
    if isinstance(eta, SumField):
        return [d for f in eta.fields for d in support_discs(f)]
    if isinstance(eta, ScaledField):
        return support_discs(eta.base)
    sup = getattr(eta, "support", None)
    if sup is None:
        return []
    c, r = sup
    return [(np.asarray(c, dtype=float), float(r))]


def _k2_with_budget(u, eta):
    nodal = k2_domain(u, eta).value
    k3 = k2_domain(u, eta, check=False, quad=3).value
    k6 = k2_domain(u, eta, check=False, quad=6).value
    return nodal, abs(k6 - k3) + abs(nodal - k3), {"k2_quad3": k3, "k2_quad6": k6}


# ---------------------------------------------------------------------------
# Griffith


def griffith_classical(problem: EquilibriumProblem, flow: FlowMap, G: float, times, dt: float,
                       crack=None) -> list[CriterionReport]:
    """``E(t) >= G d/dt length(phi_t(K))`` at each listed time.

    ``E(t)`` is the Richardson-extrapolated release rate along the flow with
    fixed boundary data; the length rate is the first variation of length of
    the transported crack.
    """
    GriffithConfig(G)
    crack = problem.mesh.crack_polyline() if crack is None else np.asarray(crack, dtype=float)
    out = []
    for t in times:
        rr = release_rate_richardson(problem, flow, t, dt)
        img = transport_crack(flow, crack, t)
        rate = length_variation(img, flow.field_at(t))
        lhs, rhs = rr.value, G * rate
        tol = rr.error_estimate + 1e-10 * max(abs(lhs), abs(rhs), 1.0)
        out.append(CriterionReport("griffith_classical", float(t), lhs, rhs, tol,
                                   decide(lhs, rhs, tol, ">="), ">=", TUBULAR,
                                   {"release_rate": rr.value, "length_rate": rate, "G": G,
                                    "fd_coarse": rr.coarse, "fd_fine": rr.fine, "dt": dt},
                                   digest(problem.mesh.nodes, problem.u0.values, G, float(t), dt)))
    return out


def griffith_generalized(u: DisplacementField, eta: VelocityField, G: float,
                         time: float = 0.0) -> CriterionReport:
    """``K2(u, eta) >= G ||eta||_inf P(dK)(supp eta)``.

    The perimeter of the crack edge on the support is the number of tips in
    it. A passing check also bounds the release rate from below, since the
    release rate dominates ``K2``; that makes it stronger than the classical
    criterion.
    """
    GriffithConfig(G)
    mesh = u.mesh
    lhs, tol_k, extra = _k2_with_budget(u, eta)
    crack = mesh.crack_polyline() if len(mesh.crack_path) else np.zeros((0, 2))
    count, numeric = 0, 0.0
    if len(crack):
        for c, r in support_discs(eta):
            pm = perimeter_measure(crack, mesh.tips, Disc(tuple(c), r), mesh.domain)
            count += pm.analytic
            numeric += pm.numeric
    norm = eta.sup_norm
    rhs = G * norm * count
    tol = tol_k + 1e-10 * max(abs(lhs), abs(rhs), 1.0)
    return CriterionReport("griffith_generalized", float(time), lhs, rhs, tol,
                           decide(lhs, rhs, tol, ">="), ">=", TUBULAR,
                           {"G": G, "sup_norm": norm, "perimeter": count, "perimeter_numeric": numeric,
                            "implies_classical": "release rate >= K2, so a pass bounds the release rate",
                            **extra},
                           digest(u, G, float(time)))


# ---------------------------------------------------------------------------
# Irwin


def irwin_check(u: DisplacementField, G: float, tips=None, radii=None, convention: str = TUBULAR,
                time: float = 0.0) -> CriterionReport:
    """``max_tips C2+(u, x) >= G`` in the chosen convention; both are recorded.

    ``tol`` is the change of the extrapolated coefficient when the smallest
    radius is dropped from the fit.
    """
    _check_convention(convention)
    GriffithConfig(G)
    atoms = cantor_part_atoms(u, tips, radii)
    per_tip, tols = [], []
    for a in atoms:
        est = a.estimate
        if len(est.radii) >= 3:
            coarse = c2_point(u, a.tip, est.radii[:-1]).tubular_value
            err = abs(coarse - a.tubular)
        else:
            err = abs(est.ratios[-1] - a.tubular)
        tols.append(err)
        per_tip.append({"tip": a.tip, TUBULAR: a.tubular, NORMALIZED: a.normalized,
                        "extrapolation_error": err})
    if not atoms:
        lhs_t = lhs_n = 0.0
        tol_t = 0.0
    else:
        k = int(np.argmax([a.tubular for a in atoms]))
        lhs_t, lhs_n, tol_t = atoms[k].tubular, atoms[k].normalized, tols[k]
    tol_t += 1e-10 * max(abs(lhs_t), 1.0)
    tol_n = tol_t / np.pi
    both = {TUBULAR: decide(lhs_t, G, tol_t, ">="), NORMALIZED: decide(lhs_n, G, tol_n, ">=")}
    lhs, tol = (lhs_t, tol_t) if convention == TUBULAR else (lhs_n, tol_n)
    return CriterionReport("irwin", float(time), lhs, G, tol, both[convention], ">=", convention,
                           {"tips": per_tip, "satisfied_by_convention": both,
                            "lhs_by_convention": {TUBULAR: lhs_t, NORMALIZED: lhs_n}},
                           digest(u, G, float(time), convention))


# ---------------------------------------------------------------------------
# |K2| versus the Cantor part of CM+


def theorem61_check(u: DisplacementField, regions, convention: str = TUBULAR, rel_tol: float = 0.05,
                    density_tol: float = 1e-8, scale: float | None = None,
                    time: float = 0.0) -> list[CriterionReport]:
    """``|K2|(u)(B) <= CM+(u)^C(B)`` on each region, plus the bulk density test.

    ``lhs`` is the plateau-family lower bound of the K2 measure and ``rhs``
    the sum of tip atoms inside ``B``. The budget is ``rel_tol`` times the
    larger side plus ``1e-3 * scale`` (``scale`` defaults to the K2 tip total
    over the whole body, or 1 if that vanishes).

    For the converse direction the relative bulk density of
    ``|div sigma . grad u|`` must stay below ``density_tol``; a larger
    density means ``u`` is not an equilibrium and the report fails.
    """
    _check_convention(convention)
    mesh = u.mesh
    if scale is None:
        scale = k2_measure(u, WholeBody(mesh.domain), n_probe=0).tip_total
        scale = scale if scale > 0 else 1.0
    atoms = cantor_part_atoms(u) if len(mesh.tips) else []
    out = []
    for i, B in enumerate(regions):
        m = k2_measure(u, B)
        inside = [a for a in atoms if B.contains(a.tip)[0] and B.clearance(a.tip)[0] > 0]
        rhs = float(sum(a.value(convention) for a in inside))
        lhs = m.value
        dens = bulk_density(u, B)
        tol = rel_tol * max(abs(lhs), abs(rhs)) + 1e-3 * scale
        ok = decide(lhs, rhs, tol, "<=") and dens <= density_tol
        out.append(CriterionReport("theorem61", float(time), lhs, rhs, tol, ok, "<=", convention,
                                   {"region": i, "tips_inside": [a.tip for a in inside],
                                    "rhs_by_convention": {c: float(sum(a.value(c) for a in inside))
                                                          for c in CONVENTIONS},
                                    "k2_tip_total": m.tip_total, "k2_probe": m.probe.get("value", 0.0),
                                    "bulk_density": dens, "density_tol": density_tol,
                                    "equilibrium": dens <= density_tol,
                                    "inequality": decide(lhs, rhs, tol, "<=")},
                                   digest(u, i, convention, rel_tol)))
    return out


# ---------------------------------------------------------------------------
# min-max chain


def tip_field_family(mesh, radii_fraction=(0.5, 0.25), region: Region | None = None) -> list:
    """Unit plateau fields advancing the tips (all together and one at a time)."""
    from .geometry import tip_frames
    from .jintegral import tip_admissible_radius

    crack = mesh.crack_polyline()
    per_tip = []
    for end, p, tau in tip_frames(crack, mesh.domain):
        if region is not None and not region.contains(p)[0]:
            continue
        R = tip_admissible_radius(mesh, p, end, region)
        per_tip.append([PlateauField(p, tau, f * R, 2 * f * R) for f in radii_fraction])
    fam = []
    for k in range(len(radii_fraction)):
        fields = [f[k] for f in per_tip]
        if len(fields) == 1:
            fam.append(fields[0])
        elif fields:
            fam.append(SumField(fields))
    return fam


def minimaxi_report(problem: EquilibriumProblem, u: DisplacementField | None = None, family=None,
                    dt: float = 2e-3, convention: str = TUBULAR, time: float = 0.0,
                    coarse: EquilibriumProblem | None = None) -> CriterionReport:
    """``|K2|(Omega) <= sup_eta E(eta) <= CM+^C(Omega)`` with measured budgets.

    ``E(eta)`` is the release rate at ``t = 0`` along the flow of ``eta``
    (Richardson central differences). The reported ``lhs``/``rhs`` are the
    outer members of the chain; the middle one and both link checks are in
    ``details``. Each link's budget adds the FD error estimate, the K2
    quadrature and interpolation error of the maximizing field and the spread
    of the tip K2 values over plateau radii (a path-independence defect);
    the upper link also adds the extrapolation error of the tip atoms.

    With ``coarse`` (the same problem on a coarser mesh) both links also
    carry the mesh-discretization estimates ``|K2_h - K2_coarse|`` and
    ``|C_h - C_coarse|``, first-order error indicators for the fine values.
    """
    _check_convention(convention)
    mesh = problem.mesh
    if u is None:
        from .equilibrium import solve
        u = solve(problem, method="direct")
    whole = WholeBody(mesh.domain)
    meas = k2_measure(u, whole)
    family = tip_field_family(mesh) if family is None else family
    best, best_err, best_k2err, rates = 0.0, 0.0, 0.0, []
    for eta in family:
        flow = integrate_flow(eta, 2 * dt, dt / 8, points=np.zeros((0, 2)), samples=1)
        rr = release_rate_richardson(problem, flow, 0.0, dt)
        _, k2err, _ = _k2_with_budget(u, eta)
        rates.append(rr.value)
        if rr.value > best or not rates[:-1]:
            best, best_err, best_k2err = rr.value, rr.error_estimate, k2err
    if len(mesh.tips):
        irw = irwin_check(u, 0.0, convention=convention)
        atoms = irw.details["tips"]
        cm = float(sum(a[convention] for a in atoms))
        cm_err = float(sum(a["extrapolation_error"] for a in atoms))
        if convention == NORMALIZED:
            cm_err /= np.pi
    else:
        cm, cm_err, atoms = 0.0, 0.0, []
    spread = float(sum(t["level_spread"] for t in meas.tips))
    h_k2 = h_cm = 0.0
    if coarse is not None:
        from .equilibrium import solve
        uc = solve(coarse, method="direct")
        h_k2 = abs(k2_measure(uc, WholeBody(coarse.mesh.domain), n_probe=0).tip_total - meas.tip_total)
        if len(coarse.mesh.tips):
            h_cm = abs(float(sum(a.value(convention) for a in cantor_part_atoms(uc))) - cm)
    floor = 1e-10 * max(abs(meas.value), abs(best), abs(cm), 1e-300)
    tol_lo = best_err + best_k2err + spread + h_k2 + floor
    tol_hi = best_err + best_k2err + spread + h_k2 + cm_err + h_cm + floor
    lower_ok = decide(meas.value, best, tol_lo, "<=")
    upper_ok = decide(best, cm, tol_hi, "<=")
    return CriterionReport("minimaxi", float(time), meas.value, cm, tol_lo + tol_hi,
                           bool(lower_ok and upper_ok), "<=", convention,
                           {"k2_measure": meas.value, "sup_release_rate": best, "cantor_total": cm,
                            "release_rates": rates, "lower_link": lower_ok, "upper_link": upper_ok,
                            "tol_lower": tol_lo, "tol_upper": tol_hi, "level_spread": spread,
                            "mesh_error_k2": h_k2, "mesh_error_cantor": h_cm,
                            "atoms": atoms},
                           digest(u, dt, convention, float(time)))
