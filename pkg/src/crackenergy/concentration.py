"""Energy concentration at points and along the crack.

Ball and tube energies are divided by the radius and extrapolated to
``r -> 0`` by a short power fit in ``r`` whose linear coefficient is the
concentration (see :func:`fit_concentration`).

Two conventions are carried: ``tubular`` (plain ``E(B_r)/r`` limit) and
``normalized`` (the same divided by ``pi``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import DisplacementField
from .geometry import Region, ball_weights, polyline_length, set_weights, tube_weights

TUBULAR = "tubular"
NORMALIZED = "normalized"


class ConcentrationError(ValueError):
    """Raised for radii below the mesh resolution or leaving the body."""


BALL_POWERS = (1, 2, 4)
TUBE_POWERS = (1, 2, 3)


def fit_concentration(radii, energies, powers=BALL_POWERS):
    """Least-squares fit ``E(r) = sum_k c_k r^p_k``; returns the coefficients.

    The first power must be 1: its coefficient is the concentration. Ball
    integrals of a smooth density only carry even powers, hence the default
    ``(1, 2, 4)``. Tubes around a segment carry odd powers plus an ``r^2``
    end effect where the region cuts the tube, hence ``(1, 2, 3)``. With
    fewer radii than powers the trailing powers are dropped.
    """
    r = np.asarray(radii, dtype=float)
    e = np.asarray(energies, dtype=float)
    if len(r) < 2:
        raise ConcentrationError("need at least two radii")
    used = powers[:len(r)]
    A = np.column_stack([r**p for p in used])
    coef = np.linalg.lstsq(A, e, rcond=None)[0]
    return tuple(float(c) for c in coef) + (0.0,) * (len(powers) - len(used))


@dataclass
class ConcentrationEstimate:
    """Ball-energy ratios at one point.

    ``liminf`` and ``limsup`` are the min and max of the last three ratios;
    ``extrapolated`` is the fitted limit in the requested convention.
    """

    point: tuple
    radii: np.ndarray
    energies: np.ndarray
    ratios: np.ndarray
    liminf: float
    limsup: float
    extrapolated: float
    normalized: bool
    tubular_value: float
    normalized_value: float
    fit: tuple

    def rows(self, ident="x"):
        conv = NORMALIZED if self.normalized else TUBULAR
        return [(ident, float(r), float(e), float(q), self.extrapolated, conv)
                for r, e, q in zip(self.radii, self.energies, self.ratios)]


def _base_radius(mesh, x):
    x = np.asarray(x, dtype=float)
    cands = [mesh.domain.boundary_distance(x)[0]]
    if len(mesh.crack_path):
        cands.append(polyline_length(mesh.crack_polyline()))
    for t in mesh.tips:
        d = np.linalg.norm(t - x)
        if d > 1e-12:
            cands.append(d)
    return min(cands) / 4


def radius_schedule(mesh, x=None, levels: int = 5, floor: float | None = None, min_count: int = 3,
                    r0: float | None = None):
    """``r_k = r0 2^-k`` with ``r0 = min(dist(x, dOmega), crack length, dist to other tips) / 4``.

    Radii below ``floor`` (default ``4 h``) are dropped.

    Raises
    ------
    ConcentrationError
        If fewer than ``min_count`` radii remain.
    """
    floor = 4 * mesh.mesh_size_h if floor is None else floor
    r0 = _base_radius(mesh, x) if r0 is None else r0
    radii = r0 * 0.5 ** np.arange(levels)
    radii = radii[radii >= floor * (1 - 1e-12)]
    if len(radii) < min_count:
        raise ConcentrationError(
            f"only {len(radii)} radii above {floor:.3g} (r0={r0:.3g}); refine the mesh")
    return radii


def _check_radii(mesh, x, radii):
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if len(np.unique(radii)) != len(radii):
        raise ConcentrationError("radii must be distinct")
    h = mesh.mesh_size_h
    if radii[-1] < 2 * h:
        raise ConcentrationError(f"radius {radii[-1]:.3g} is below the mesh resolution 2h={2 * h:.3g}")
    if x is not None and radii[0] >= mesh.domain.boundary_distance(x)[0]:
        raise ConcentrationError(f"radius {radii[0]:.3g} reaches the outer boundary")
    return radii


def c2_point(u: DisplacementField, x, radii=None, normalized: bool = False) -> ConcentrationEstimate:
    """Concentration coefficient of the elastic energy at ``x``.

    Ball energies use exact disc/triangle intersection areas. Default radii
    follow :func:`radius_schedule`; when fewer than three radii clear the
    ``4 h`` floor the floor drops to ``2 h`` and two radii are accepted.
    """
    mesh = u.mesh
    x = np.asarray(x, dtype=float)
    if radii is None:
        try:
            radii = radius_schedule(mesh, x)
        except ConcentrationError:
            radii = radius_schedule(mesh, x, floor=2 * mesh.mesh_size_h, min_count=2)
    radii = _check_radii(mesh, x, radii)
    energies = np.array([u.energy(ball_weights(mesh, x, r)) for r in radii])
    ratios = energies / radii
    fit = fit_concentration(radii, energies)
    a = fit[0]
    tail = ratios[-3:]
    return ConcentrationEstimate(tuple(x), radii, energies, ratios, float(tail.min()), float(tail.max()),
                                 a / np.pi if normalized else a, normalized, a, a / np.pi, fit)


@dataclass
class CMPlusEstimate:
    """Tube-energy ratios restricted to a region, split into tip and face parts.

    ``tip_part = extrapolated - jump_part``; ``tip_check`` is the independent
    fit of the tip-ball energies and ``decomposition_error`` the relative
    mismatch between the sampled tube energy and ball plus strip energies.
    """

    radii: np.ndarray
    energies: np.ndarray
    ratios: np.ndarray
    extrapolated: float
    tip_part: float
    jump_part: float
    tip_ratios: np.ndarray
    jump_ratios: np.ndarray
    decomposition_error: float
    details: dict = field(default_factory=dict)

    def rows(self, ident="B"):
        return [(ident, float(r), float(e), float(q), self.extrapolated, TUBULAR)
                for r, e, q in zip(self.radii, self.energies, self.ratios)]


def _tip_ball_energy(u, region, tip, rs, nsub):
    mesh = u.mesh
    if region.clearance(tip)[0] >= rs:
        return u.energy(ball_weights(mesh, tip, rs))
    cand = np.linalg.norm(mesh.centroids - tip, axis=1) <= rs + mesh.element_sizes

    def ind(p):
        return (np.linalg.norm(p - tip, axis=1) < rs) & region.contains(p)

    return u.energy(set_weights(mesh, ind, cand, nsub))


def cm_plus(u: DisplacementField, region: Region, radii=None, r_sep=None, nsub: int = 10) -> CMPlusEstimate:
    """Upper concentration of the elastic energy around the whole crack, on ``region``.

    For each ``r`` the energy of ``{dist(x, K) < r} ∩ region`` is fitted
    with :data:`TUBE_POWERS`. The face (jump) part uses the same tube minus
    the balls ``B_{r_sep}(tip)``; ``r_sep`` defaults to ``r`` so the strips
    shrink onto the faces. Default radii halve from a quarter of the
    feature size down to ``2 h``; two radii are accepted when the region is
    too small for three.
    """
    mesh = u.mesh
    if len(mesh.crack_path) == 0:
        z = np.zeros(0)
        return CMPlusEstimate(z, z, z, 0.0, 0.0, 0.0, z, z, 0.0)
    crack = mesh.crack_polyline()
    tips = [t for t in mesh.tips if region.contains(t)[0]]
    if radii is None:
        anchors = tips if tips else [crack[len(crack) // 2]]
        r0 = min(_base_radius(mesh, p) for p in anchors)
        try:
            radii = radius_schedule(mesh, r0=r0, floor=2 * mesh.mesh_size_h)
        except ConcentrationError:
            radii = radius_schedule(mesh, r0=r0, floor=2 * mesh.mesh_size_h, min_count=2)
    radii = _check_radii(mesh, None, radii)
    tot, tip_e, jump_e = [], [], []
    reach = mesh.element_sizes.max()
    for r in radii:
        rs = r if r_sep is None else r_sep
        tot.append(u.energy(tube_weights(mesh, crack, r, region, nsub=nsub)))
        te = 0.0
        for t in mesh.tips:
            if region.clearance(t)[0] > 0 or np.linalg.norm(mesh.centroids - t, axis=1).min() <= rs + reach:
                te += _tip_ball_energy(u, region, t, rs, nsub)
        tip_e.append(te)
        balls = [(t, rs) for t in mesh.tips]
        jump_e.append(u.energy(tube_weights(mesh, crack, r, region, balls, nsub=nsub)))
    tot, tip_e, jump_e = map(np.array, (tot, tip_e, jump_e))
    a_tot = fit_concentration(radii, tot, TUBE_POWERS)[0]
    a_jump = fit_concentration(radii, jump_e, TUBE_POWERS)[0]
    a_tip = fit_concentration(radii, tip_e, TUBE_POWERS)[0]
    scale = np.abs(tot).max(initial=0.0)
    dec = float(np.abs(tot - tip_e - jump_e).max() / scale) if scale > 0 else 0.0
    return CMPlusEstimate(radii, tot, tot / radii, a_tot, max(a_tot - a_jump, 0.0), max(a_jump, 0.0),
                          tip_e / radii, jump_e / radii, dec,
                          {"tip_check": a_tip, "jump_fit": a_jump, "r_sep": r_sep})


@dataclass
class TipAtom:
    tip: tuple
    tubular: float
    normalized: float
    estimate: ConcentrationEstimate

    def value(self, convention: str = TUBULAR) -> float:
        return self.tubular if convention == TUBULAR else self.normalized


def cantor_part_atoms(u: DisplacementField, tips=None, radii=None) -> list[TipAtom]:
    """Per-tip concentration atoms in both conventions."""
    mesh = u.mesh
    tips = mesh.tips if tips is None else np.atleast_2d(np.asarray(tips, dtype=float)).reshape(-1, 2)
    out = []
    for t in tips:
        est = c2_point(u, t, radii)
        out.append(TipAtom(tuple(t), est.tubular_value, est.normalized_value, est))
    return out
