"""Generalized Rice integral (Eshelby energy-momentum flux) on FE fields.

For a displacement ``u`` and a transport field ``eta`` the domain form is

    K2(u, eta) = int  -w(grad u) div eta + sigma_ij u_{i,k} eta_{k,j}  dx,

with ``grad_u[i, k] = du_i/dx_k`` and ``grad_eta[k, j] = d eta_k/dx_j``. For
``eta`` equal to the unit crack tangent near a tip this is the classical
energy release rate ``J``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dtn import energy_along_flow, flowed_mesh
from .equilibrium import DisplacementField, EquilibriumProblem, StressField, solve_equilibrium
from .flow import FlowMap
from .geometry import Region, point_polyline_distance, straight_run, tip_frames
from .material import ElasticModel, energy_density, stress
from .velocity import PlateauField, VelocityField, check_tangency


class AnnulusError(ValueError):
    """Raised when an annulus leaves the body or contains another tip."""


# symmetric triangle rules: (barycentric points, weights summing to 1)
_R3 = (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
       np.full(3, 1 / 3))
_a, _b = 0.445948490915965, 0.091576213509771
_R6 = (np.array([[1 - 2 * _a, _a, _a], [_a, 1 - 2 * _a, _a], [_a, _a, 1 - 2 * _a],
                 [1 - 2 * _b, _b, _b], [_b, 1 - 2 * _b, _b], [_b, _b, 1 - 2 * _b]]),
       np.array([0.223381589678011] * 3 + [0.109951743655322] * 3))
QUADRATURE = {3: _R3, 6: _R6}


@dataclass
class K2Evaluation:
    """Result of a K2 evaluation.

    ``per_radius`` holds ``(r, value)`` pairs for annulus evaluations and
    ``extrapolated`` the ``r -> 0`` limit (equal to ``value`` for the domain form).
    """

    value: float
    method: str
    radii: tuple = ()
    per_radius: tuple = ()
    extrapolated: float = np.nan
    details: dict = field(default_factory=dict)


def _active_elements(mesh, eta: VelocityField):
    if eta.support is None:
        return np.arange(mesh.n_triangles)
    c, r = eta.support
    d = np.linalg.norm(mesh.centroids - np.asarray(c), axis=1)
    return np.flatnonzero(d <= r + mesh.element_sizes)


NODAL = 0


def k2_integrand(u: DisplacementField, eta: VelocityField, elements=None, quad: int = 3):
    """Element contributions ``A_e * mean_q(integrand)`` for the given elements.

    ``quad = NODAL`` replaces ``grad eta`` by the gradient of its P1 nodal
    interpolant. The element sum of that gradient telescopes to a boundary
    term, so a uniform ``grad u`` gives exactly zero.
    """
    mesh = u.mesh
    el = _active_elements(mesh, eta) if elements is None else np.asarray(elements)
    if len(el) == 0:
        return el, np.zeros(0)
    if quad == NODAL:
        vals = eta.value(mesh.nodes[mesh.triangles[el]].reshape(-1, 2)).reshape(len(el), 3, 2)
        G = np.einsum("eak,eaj->ekj", vals, mesh.shape_gradients[el])[:, None]
        wq = np.ones(1)
    else:
        bary, wq = QUADRATURE[quad]
        pts = np.einsum("qa,ead->eqd", bary, mesh.nodes[mesh.triangles[el]])
        G = eta.grad(pts.reshape(-1, 2)).reshape(len(el), len(wq), 2, 2)
    div = G[..., 0, 0] + G[..., 1, 1]
    w = u.energy_density[el]
    sig, gu = u.stress[el], u.grad[el]
    flux = np.einsum("mij,mik,mqkj->mq", sig, gu, G)
    val = (-w[:, None] * div + flux) @ wq
    return el, mesh.areas[el] * val


def k2_domain(u: DisplacementField, eta: VelocityField, model: ElasticModel | None = None,
              check: bool = True, quad: int = NODAL) -> K2Evaluation:
    """Domain form of the generalized Rice integral.

    Raises
    ------
    TangencyError
        If ``check`` and ``eta`` is not tangent to the crack.
    """
    if model is not None and model != u.model:
        u = DisplacementField(u.mesh, model, u.values)
    if check and len(u.mesh.crack_path):
        check_tangency(eta, u.mesh.crack_polyline())
    _, contrib = k2_integrand(u, eta, quad=quad)
    v = float(contrib.sum())
    return K2Evaluation(v, "domain", extrapolated=v)


def k2_vector(u: DisplacementField, center, r_inner, r_outer, profile=PlateauField, quad: int = NODAL):
    """``V`` with ``K2(u, q d) = d . V`` for the radial profile ``q`` centred at ``center``."""
    e1 = profile(center, (1.0, 0.0), r_inner, r_outer)
    e2 = e1.with_direction((0.0, 1.0))
    el = _active_elements(u.mesh, e1)
    return np.array([k2_integrand(u, e1, el, quad)[1].sum(), k2_integrand(u, e2, el, quad)[1].sum()])


# ---------------------------------------------------------------------------
# contour and annulus forms


def _as_matrix_grad(g, ncomp):
    g = np.asarray(g, dtype=float)
    return g.reshape(len(g), ncomp, 2)


def contour_integral(grad_fn, model: ElasticModel, center, radius, direction,
                     theta0: float = 0.0, panels: int = 16, npts: int = 16) -> float:
    """Flux ``int_{dB_r} -(w eta.nu - sigma_li u_{l,k} eta_k nu_i) ds`` for constant ``eta``.

    ``nu`` points into the ball. The circle is parameterized by the angle in
    ``(theta0 - pi, theta0 + pi)`` so that a crack leaving the centre in
    direction ``theta0 + pi`` sits at the panel ends.
    """
    gx, gw = np.polynomial.legendre.leggauss(npts)
    edges = np.linspace(theta0 - np.pi, theta0 + np.pi, panels + 1)
    th = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * np.diff(edges)[:, None] * gx).ravel()
    wt = (0.5 * np.diff(edges)[:, None] * gw).ravel()
    n = np.column_stack([np.cos(th), np.sin(th)])
    pts = np.asarray(center, dtype=float) + radius * n
    g = _as_matrix_grad(grad_fn(pts), model.ncomp)
    w = energy_density(model, g)
    s = stress(model, g)
    d = np.asarray(direction, dtype=float)
    # nu = -n
    integrand = w * (n @ d) - np.einsum("pli,pl,pi->p", s, g @ d, n)
    return float(radius * np.dot(wt, integrand))


def _tip_tangent(mesh, tip):
    frames = tip_frames(mesh.crack_polyline())
    for _, p, tau in frames:
        if np.linalg.norm(p - tip) <= 1e-9 * max(1.0, np.abs(p).max()):
            return tau
    raise AnnulusError(f"{tuple(tip)} is not a crack tip of this mesh")


def k2_annulus(u: DisplacementField, tip, r_inner: float, r_outer: float, direction=None,
               model: ElasticModel | None = None, contour: bool = True) -> K2Evaluation:
    """Shrinking-annulus evaluation around one tip.

    For radii ``r = r_inner * 2^k`` with ``2 r <= r_outer`` the domain form
    is evaluated with the plateau field ``q(|x - tip|) d`` (``q = 1`` inside
    ``r``, zero beyond ``2 r``); this is the contour flux averaged over the
    ring ``[r, 2r]``. Raw contour values at ``1.5 r`` are reported in
    ``details``. ``extrapolated`` is the ``r -> 0`` intercept of a linear fit.

    ``direction`` defaults to the outward crack tangent at ``tip``; any
    other direction (e.g. the crack normal) is evaluated without a tangency
    check.
    """
    if model is not None and model != u.model:
        u = DisplacementField(u.mesh, model, u.values)
    mesh = u.mesh
    tip = np.asarray(tip, dtype=float)
    if not (0 < r_inner and 2 * r_inner <= r_outer * (1 + 1e-12)):
        raise AnnulusError("need 0 < 2 r_inner <= r_outer")
    if mesh.domain.boundary_distance(tip)[0] <= r_outer:
        raise AnnulusError(f"annulus of radius {r_outer:g} around {tuple(tip)} leaves the body")
    others = [t for t in mesh.tips if np.linalg.norm(t - tip) > 1e-12]
    if others and min(np.linalg.norm(t - tip) for t in others) <= r_outer:
        raise AnnulusError("annulus contains another crack tip")
    tau = _tip_tangent(mesh, tip)
    d = tau if direction is None else np.asarray(direction, dtype=float)
    radii, values, contours = [], [], []
    r = r_inner
    while 2 * r <= r_outer * (1 + 1e-12):
        f = PlateauField(tip, d, r, 2 * r)
        values.append(k2_domain(u, f, check=False).value)
        radii.append(r)
        if contour:
            theta0 = float(np.arctan2(tau[1], tau[0]))
            contours.append(contour_integral(u.grad_at, u.model, tip, 1.5 * r, d, theta0,
                                             panels=64, npts=8))
        r *= 2
    radii = np.array(radii)
    values = np.array(values)
    ext = float(np.polyfit(radii, values, 1)[1]) if len(radii) >= 2 else float(values[0])
    mean = float(values.mean())
    spread = float((values.max() - values.min()) / abs(mean)) if mean != 0 else 0.0
    return K2Evaluation(mean, "annulus", tuple(radii), tuple(zip(radii.tolist(), values.tolist())),
                        ext, {"spread": spread, "contour": tuple(contours), "direction": tuple(d)})


# ---------------------------------------------------------------------------
# measure


@dataclass
class K2Measure:
    """Family lower bound for ``|K2|(u)(B)``.

    ``tips`` lists per-tip dicts with the best value, the maximizing angle,
    the plateau radii and the admissible radius. ``probe`` holds the best
    probe field placed away from tips.
    """

    value: float
    tip_total: float
    tips: list
    probe: dict
    rows: list


def _angle_grid(theta0, n):
    return theta0 + 2 * np.pi * np.arange(n) / n


def _best_direction(V, theta0, n_dir, tangent=None):
    ang = _angle_grid(theta0, n_dir)
    d = np.column_stack([np.cos(ang), np.sin(ang)])
    if tangent is not None:
        d = (d @ tangent)[:, None] * tangent
    vals = d @ V
    k = int(np.argmax(vals))   # first index on ties
    return float(vals[k]), float(ang[k]), vals


def _crack_kinks(crack):
    """Crack vertices where the direction changes, plus both endpoints."""
    crack = np.asarray(crack, dtype=float)
    keep = [0]
    for i in range(1, len(crack) - 1):
        a, b = crack[i] - crack[i - 1], crack[i + 1] - crack[i]
        if abs(a[0] * b[1] - a[1] * b[0]) > 1e-12 * np.linalg.norm(a) * np.linalg.norm(b):
            keep.append(i)
    keep.append(len(crack) - 1)
    return crack[keep]


def tip_admissible_radius(mesh, tip, end, region: Region | None = None) -> float:
    """Largest plateau support radius around ``tip`` meeting only the straight final run."""
    crack = mesh.crack_polyline()
    R = min(mesh.domain.boundary_distance(tip)[0], straight_run(crack, end))
    if region is not None:
        R = min(R, region.clearance(tip)[0])
    for t in mesh.tips:
        dd = np.linalg.norm(t - tip)
        if dd > 1e-12:
            R = min(R, 0.5 * dd)
    return 0.95 * R


def k2_measure(u: DisplacementField, region: Region, model: ElasticModel | None = None,
               n_dir: int = 32, n_levels: int = 3, n_probe: int = 5,
               min_radius: float | None = None) -> K2Measure:
    """Lower bound for the K2 measure of ``region`` over plateau fields.

    Per tip inside ``region``: fields ``q(|x - tip|) d`` with ``q = 1`` on
    ``r2/2`` and a cubic cutoff at ``r2``; ``r2`` runs over ``n_levels``
    dyadic levels below the admissible radius and ``d`` over ``n_dir``
    angles starting at the crack tangent, projected onto the tangent. Tip
    fields have disjoint supports and unit sup norm, so their best values
    add. Probe fields on a grid of tip-free points test the rest of
    ``region``. The result is the larger of the tip sum and the best probe.
    """
    if model is not None and model != u.model:
        u = DisplacementField(u.mesh, model, u.values)
    mesh = u.mesh
    h = mesh.mesh_size_h
    rmin = 4 * h if min_radius is None else min_radius
    crack = mesh.crack_polyline() if len(mesh.crack_path) else np.zeros((0, 2))
    rows, tips = [], []
    for tid, (end, p, tau) in enumerate(tip_frames(crack, mesh.domain) if len(crack) else []):
        if not (region.contains(p)[0] and region.clearance(p)[0] > 0):
            continue
        R = tip_admissible_radius(mesh, p, end, region)
        theta0 = float(np.arctan2(tau[1], tau[0]))
        best = {"tip": tuple(p), "value": 0.0, "angle": theta0, "r_inner": np.nan,
                "r_outer": np.nan, "admissible_radius": R, "tip_id": tid, "vector": (0.0, 0.0),
                "levels": []}
        bestval = -np.inf
        for k in range(n_levels):
            r2 = R / 2**k
            if r2 < rmin:
                break
            V = k2_vector(u, p, 0.5 * r2, r2)
            val, ang, allv = _best_direction(V, theta0, n_dir, tau)
            best["levels"].append(val)
            for a, v in zip(_angle_grid(theta0, n_dir), allv):
                rows.append((tid, float(a), 0.5 * r2, r2, float(v)))
            if val > bestval:
                bestval = val
                best.update(value=val, angle=ang, r_inner=0.5 * r2, r_outer=r2, vector=tuple(V))
        tips.append(best)
    tip_total = float(sum(max(0.0, t["value"]) for t in tips))
    for t in tips:
        lv = t["levels"]
        t["level_spread"] = float(max(lv) - min(lv)) if lv else 0.0

    probe = {"value": 0.0, "center": None, "r_outer": np.nan}
    if n_probe:
        kinks = _crack_kinks(crack) if len(crack) else np.zeros((0, 2))
        centers = region.probe_centers(n_probe)
        centers = centers[mesh.domain.contains(centers)] if len(centers) else centers
        for c in centers:
            R = min(region.clearance(c)[0], mesh.domain.boundary_distance(c)[0])
            if len(kinks):
                R = min(R, np.linalg.norm(kinks - c, axis=1).min())
            R *= 0.95
            if R < rmin:
                continue
            tangent = None
            if len(crack) and point_polyline_distance(c, crack)[0] < R:
                # support meets a straight part of the crack: slide along it
                segs = np.diff(crack, axis=0)
                a = crack[:-1]
                L2 = np.einsum("ij,ij->i", segs, segs)
                tt = np.clip(np.einsum("ij,ij->i", c - a, segs) / L2, 0, 1)
                k = int(np.argmin(np.linalg.norm(a + tt[:, None] * segs - c, axis=1)))
                tangent = segs[k] / np.sqrt(L2[k])
            V = k2_vector(u, c, 0.5 * R, R)
            val, ang, _ = _best_direction(V, 0.0, n_dir, tangent)
            rows.append((-1, ang, 0.5 * R, R, val))
            if val > probe["value"]:
                probe = {"value": val, "center": tuple(c), "r_outer": R, "angle": ang}
    value = max(tip_total, probe["value"])
    return K2Measure(value, tip_total, tips, probe, rows)


# ---------------------------------------------------------------------------
# energy derivative vs K2, and configurational forces


@dataclass
class Prop51Result:
    lhs: float
    rhs: float
    tol: float
    satisfied: bool
    relative_gap: float
    details: dict


def prop51_check(problem: EquilibriumProblem, flow: FlowMap, t: float, dt: float) -> Prop51Result:
    """Compare ``d/dt <T(phi_t) u0, u0>`` with ``-2 K2(u(phi_t), eta_t)``.

    The derivative is a Richardson-extrapolated central difference on
    flow-carried meshes. ``tol`` adds the difference between the two FD
    steps and the spread of K2 between the nodal-interpolant form (which the
    carried-mesh derivative differentiates) and the 3- and 6-point rules.
    """
    def d_quad(step):
        ep = energy_along_flow(problem, flow, t + step)
        em = energy_along_flow(problem, flow, t - step)
        return 2.0 * (ep - em) / (2 * step)

    a, b = d_quad(dt), d_quad(dt / 2)
    lhs = (4 * b - a) / 3
    fd_err = abs(lhs - b)
    mesh_t = flowed_mesh(problem.mesh, flow, t)
    u_t = solve_equilibrium(mesh_t, problem.model, problem.u0, method="direct")
    eta_t = flow.field_at(t)
    k_nodal = k2_domain(u_t, eta_t).value
    k3 = k2_domain(u_t, eta_t, check=False, quad=3).value
    k6 = k2_domain(u_t, eta_t, check=False, quad=6).value
    rhs = -2.0 * k_nodal
    quad_err = 2.0 * abs(k6 - k3)
    interp_err = 2.0 * abs(k_nodal - k3)
    scale = max(abs(lhs), abs(rhs))
    tol = fd_err + quad_err + interp_err + 1e-10 * max(scale, 1.0)
    rel = abs(lhs - rhs) / abs(rhs) if rhs != 0 else abs(lhs - rhs)
    return Prop51Result(lhs, rhs, tol, bool(lhs <= rhs + tol), rel,
                        {"fd_coarse": a, "fd_fine": b, "fd_error": fd_err, "quad_error": quad_err,
                         "interpolation_error": interp_err, "k2": k_nodal, "k2_quad3": k3, "k2_quad6": k6})


def configurational_forces(u: DisplacementField) -> np.ndarray:
    """Nodal forces ``G_a`` with ``K2(u, sum_a eta_a phi_a) = sum_a eta_a . G_a``."""
    mesh = u.mesh
    gN = mesh.shape_gradients                       # (M, 3, 2) d phi_a / dx_j
    w = u.energy_density
    su = np.einsum("mij,mik->mkj", u.stress, u.grad)   # sigma_ij u_{i,k}
    contrib = (-w[:, None, None] * gN + np.einsum("mkj,maj->mak", su, gN)) * mesh.areas[:, None, None]
    G = np.zeros((mesh.n_nodes, 2))
    np.add.at(G, mesh.triangles, contrib)
    return G


def configurational_density(u: DisplacementField, region: Region, crack_margin: float | None = None) -> float:
    """Bulk density of nodal configurational forces in ``region``.

    ``sum |G_a| / area`` over nodes inside ``region`` farther than
    ``crack_margin`` (default ``2 h``) from the crack. Vanishes, up to
    discretization error, for equilibrium fields.
    """
    mesh = u.mesh
    G = configurational_forces(u)
    margin = 2 * mesh.mesh_size_h if crack_margin is None else crack_margin
    inside = region.contains(mesh.nodes)
    bmask = np.ones(mesh.n_nodes, dtype=bool)
    bmask[mesh.boundary_nodes] = False
    inside &= bmask
    if len(mesh.crack_path):
        inside &= point_polyline_distance(mesh.nodes, mesh.crack_polyline()) > margin
    if not np.any(inside):
        return 0.0
    lumped = np.zeros(mesh.n_nodes)
    np.add.at(lumped, mesh.triangles, np.repeat(mesh.areas[:, None] / 3, 3, axis=1))
    return float(np.linalg.norm(G[inside], axis=1).sum() / lumped[inside].sum())


def bulk_density(u: DisplacementField, region: Region) -> float:
    """Relative bulk density of ``|div(sigma) grad u|`` on ``region``.

    Uses the assembled nodal residual ``r_a = int sigma : grad phi_a`` at free
    nodes off the crack, contracted with area-averaged nodal gradients, and
    divides by the same sum with ``|r|`` replaced by its absolute-value scale.
    Zero to solver precision for discrete equilibria; O(1) for fields far from
    equilibrium.
    """
    mesh = u.mesh
    nc = u.model.ncomp
    r, s = StressField.from_displacement(u).nodal_divergence()
    r, s = r.reshape(-1, nc), s.reshape(-1, nc)
    g = np.zeros((mesh.n_nodes, nc, 2))
    wsum = np.zeros(mesh.n_nodes)
    np.add.at(g, mesh.triangles, np.repeat((u.grad * mesh.areas[:, None, None])[:, None], 3, axis=1))
    np.add.at(wsum, mesh.triangles, np.repeat(mesh.areas[:, None], 3, axis=1))
    g /= wsum[:, None, None]
    mask = region.contains(mesh.nodes)
    mask[mesh.boundary_nodes] = False
    mask[mesh.crack_nodes] = False
    if not np.any(mask):
        return 0.0
    num = np.linalg.norm(np.einsum("al,alk->ak", r[mask], g[mask]), axis=1).sum()
    den = np.linalg.norm(np.einsum("al,alk->ak", s[mask], np.abs(g[mask])), axis=1).sum()
    return float(num / den) if den > 0 else 0.0
