"""Flows of transport velocity fields and crack transport.

A steady field ``eta`` (or a time-dependent family ``eta(t)``) generates the
flow ``d/dt phi_t(x) = eta_t(phi_t(x))``, ``phi_0 = id``. Trajectories are
integrated with the classical fourth-order Runge-Kutta scheme. The Jacobian
determinant follows from the variational equation ``dF/dt = grad eta F``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import length_variation, point_polyline_distance, polyline_length
from .velocity import VelocityField, check_tangency


class FlowError(RuntimeError):
    """Raised when the flow loses invertibility (Jacobian determinant <= 0)."""


def _field_at(eta, t):
    return eta(t) if callable(eta) and not isinstance(eta, VelocityField) else eta


def _rk4_step(eta, t, x, F, dt):
    def rhs(tt, xx, FF):
        e = _field_at(eta, tt)
        return e.value(xx), np.einsum("pkj,pjl->pkl", e.grad(xx), FF)

    k1 = rhs(t, x, F)
    k2 = rhs(t + dt / 2, x + dt / 2 * k1[0], F + dt / 2 * k1[1])
    k3 = rhs(t + dt / 2, x + dt / 2 * k2[0], F + dt / 2 * k2[1])
    k4 = rhs(t + dt, x + dt * k3[0], F + dt * k3[1])
    x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    F = F + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return x, F


def _integrate(eta, x0, t_end, dt, t0=0.0):
    x = np.array(x0, dtype=float, copy=True)
    F = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
    if t_end == t0:
        return x, F
    n = max(1, int(np.ceil(abs(t_end - t0) / dt - 1e-9)))
    step = (t_end - t0) / n
    t = t0
    for _ in range(n):
        x, F = _rk4_step(eta, t, x, F, step)
        t += step
        det = np.linalg.det(F)
        if np.any(det <= 0):
            k = int(np.argmin(det))
            raise FlowError(f"Jacobian determinant {det[k]:.3e} <= 0 at t={t:.6g}, "
                            f"x=({x[k, 0]:.6g}, {x[k, 1]:.6g})")
    return x, F


@dataclass
class FlowMap:
    """Flow of ``eta`` sampled on a time grid.

    Attributes
    ----------
    eta : VelocityField or callable ``t -> VelocityField``
    times : (T,) array
        Sample times ``0, dt, ..., T``.
    points : (P, 2) array
        Lattice of verification points.
    trajectories : (T, P, 2) array
    jacobians : (T, P) array
        Jacobian determinants along the trajectories.
    dt : float
        Integration step.
    """

    eta: object
    times: np.ndarray
    points: np.ndarray
    trajectories: np.ndarray
    jacobians: np.ndarray
    dt: float

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def field_at(self, t) -> VelocityField:
        return _field_at(self.eta, t)

    def map(self, points, t: float) -> np.ndarray:
        """``phi_t(points)``; negative ``t`` integrates backward (steady fields)."""
        return _integrate(self.eta, np.atleast_2d(points), t, self.dt)[0]

    def map_with_jacobian(self, points, t: float):
        return _integrate(self.eta, np.atleast_2d(points), t, self.dt)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,point,x,y,jacobian\n")
            for k, t in enumerate(self.times):
                for p in range(len(self.points)):
                    x, y = self.trajectories[k, p]
                    fh.write(f"{t!r},{p},{x!r},{y!r},{self.jacobians[k, p]!r}\n")


def lattice(lo=(0.0, 0.0), hi=(1.0, 1.0), n: int = 21) -> np.ndarray:
    gx = np.linspace(lo[0], hi[0], n)
    gy = np.linspace(lo[1], hi[1], n)
    return np.stack(np.meshgrid(gx, gy), axis=-1).reshape(-1, 2)


def integrate_flow(eta, T: float, dt: float, points=None, samples: int = 10) -> FlowMap:
    """Integrate the flow of ``eta`` up to time ``T`` with RK4 step ``dt``.

    ``points`` defaults to a 21 x 21 lattice on the unit square. The map is
    stored at ``samples + 1`` equally spaced times.

    Raises
    ------
    FlowError
        If the Jacobian determinant becomes nonpositive.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    pts = lattice() if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    times = np.linspace(0.0, T, samples + 1)
    traj = [pts.copy()]
    jac = [np.ones(len(pts))]
    x, F = pts.copy(), np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy()
    for t0, t1 in zip(times[:-1], times[1:]):
        n = max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))
        step = (t1 - t0) / n
        t = t0
        for _ in range(n):
            x, F = _rk4_step(eta, t, x, F, step)
            t += step
        det = np.linalg.det(F)
        if np.any(det <= 0):
            k = int(np.argmin(det))
            raise FlowError(f"Jacobian determinant {det[k]:.3e} <= 0 at t={t1:.6g}, "
                            f"x=({x[k, 0]:.6g}, {x[k, 1]:.6g})")
        traj.append(x.copy())
        jac.append(det)
    return FlowMap(eta, times, pts, np.array(traj), np.array(jac), float(dt))


def transport_crack(flow: FlowMap, crack, t: float, max_stretch: float = 1.5) -> np.ndarray:
    """Image ``phi_t(K)`` of a polyline crack.

    Segments whose image is longer than ``max_stretch`` times the original are
    subdivided (in the reference configuration) and re-mapped.
    """
    crack = np.asarray(crack, dtype=float)
    pts = crack
    for _ in range(20):
        img = flow.map(pts, t)
        L0 = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        L1 = np.linalg.norm(np.diff(img, axis=0), axis=1)
        bad = L1 > max_stretch * L0
        if not np.any(bad):
            return img
        new = [pts[0]]
        for k in range(len(L0)):
            if bad[k]:
                new.append(0.5 * (pts[k] + pts[k + 1]))
            new.append(pts[k + 1])
        pts = np.array(new)
    return flow.map(pts, t)


def _one_sided_hausdorff(a, b) -> float:
    """``sup_{x in a} dist(x, polyline b)`` sampled densely on ``a``."""
    dense = [a[0]]
    for p, q in zip(a[:-1], a[1:]):
        s = np.linspace(0, 1, 33)[1:, None]
        dense.extend(p + s * (q - p))
    return float(point_polyline_distance(np.array(dense), b).max())


@dataclass
class MonotonicityReport:
    passed: bool
    tol_geom: float
    containment: list
    length_variations: list
    lengths: list
    violations: list


def monotonicity_check(flow: FlowMap, crack, t_list, tol: float | None = None) -> MonotonicityReport:
    """Check ``phi_t(K) <= phi_t'(K)`` for consecutive ``t < t'`` and the growth condition.

    Containment is measured by the one-sided Hausdorff distance and accepted
    below ``tol_geom = max(1e-6, 10 dt^4)``. The first variation of length
    must be ``>= -tol_geom`` at every listed time.

    The velocity field must be tangent to the crack; otherwise
    :class:`~crackenergy.velocity.TangencyError` is raised before any check.
    """
    crack = np.asarray(crack, dtype=float)
    check_tangency(flow.field_at(0.0), crack)
    tol_geom = max(1e-6, 10 * flow.dt**4) if tol is None else tol
    t_list = sorted(t_list)
    images = [transport_crack(flow, crack, t) for t in t_list]
    contain, violations = [], []
    for (t0, a), (t1, b) in zip(zip(t_list, images), zip(t_list[1:], images[1:])):
        d = _one_sided_hausdorff(a, b)
        contain.append((t0, t1, d))
        if d > tol_geom:
            violations.append(f"phi_{t0:g}(K) not contained in phi_{t1:g}(K): distance {d:.3e}")
    lv = []
    for t, img in zip(t_list, images):
        v = length_variation(img, flow.field_at(t))
        lv.append((t, v))
        if v < -tol_geom:
            violations.append(f"length decreases at t={t:g}: rate {v:.3e}")
    lengths = [(t, polyline_length(img)) for t, img in zip(t_list, images)]
    return MonotonicityReport(not violations, tol_geom, contain, lv, lengths, violations)
