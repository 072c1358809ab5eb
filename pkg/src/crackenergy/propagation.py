"""Quasi-static crack growth driven by the generalized Griffith criterion.

At each load step the equilibrium field is recomputed, every tip is probed
with unit plateau fields, and tips whose best K2 value reaches ``G`` advance
by a fixed length ``delta`` in the direction maximizing the K2 vector. Fields
are solved at unit load and scaled, since the boundary data are ``s(t) u0``.

Energy bookkeeping per step compares, on one triangulation containing the
candidate extension, the work of the boundary data with the stored energy
increase plus ``G`` times the length increase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .criteria import CriterionReport, decide, digest
from .equilibrium import (BoundaryDisplacement, DisplacementField, residual_norms,
                          solve_equilibrium)
from .geometry import CrackedDomain, GeometryError, Mesh, WholeBody, build_mesh, polyline_length, tip_frames
from .jintegral import _angle_grid, k2_measure
from .material import ElasticModel


class PropagationError(RuntimeError):
    """Raised when a crack extension cannot be meshed; carries a state dump."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


@dataclass(frozen=True)
class LoadSchedule:
    """Piecewise-linear load factor ``s(t)`` on a time grid."""

    times: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.scales, dtype=float)
        if t.ndim != 1 or t.shape != s.shape or len(t) < 2:
            raise ValueError("times and scales must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(s)):
            raise ValueError("scales must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "scales", s)

    @classmethod
    def ramp(cls, T: float, n_steps: int, s_max: float = 1.0) -> "LoadSchedule":
        """``s(t) = s_max t / T`` sampled at ``n_steps + 1`` times."""
        t = np.linspace(0.0, T, n_steps + 1)
        return cls(t, s_max * t / T)

    def scale(self, t) -> float:
        return float(np.interp(t, self.times, self.scales))

    def scaled(self, factor: float) -> "LoadSchedule":
        return LoadSchedule(self.times, factor * self.scales)


@dataclass(frozen=True)
class LoadedBody:
    """Everything needed to mesh and solve a crack configuration."""

    outer: np.ndarray
    model: ElasticModel
    load: object          # callable: points (N, 2) -> (N,) or (N, ncomp) at unit load
    h: float
    mesh_kw: dict = field(default_factory=dict)

    def mesh(self, crack, active=None) -> Mesh:
        return build_mesh(CrackedDomain(self.outer, crack), self.h, active_segments=active, **self.mesh_kw)

    def solve_unit(self, mesh: Mesh) -> DisplacementField:
        u0 = BoundaryDisplacement.from_function(mesh, self.load, self.model.ncomp, "load")
        return solve_equilibrium(mesh, self.model, u0, method="direct")


@dataclass
class PropagationState:
    step: int
    time: float
    scale: float
    crack: np.ndarray
    mesh: Mesh
    unit_field: DisplacementField
    unit_energy: float
    tips: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    grew: bool = False
    bookkeeping: dict = field(default_factory=dict)

    @property
    def u(self) -> DisplacementField:
        return self.unit_field.scaled(self.scale)

    @property
    def energy(self) -> float:
        return self.scale**2 * self.unit_energy

    @property
    def length(self) -> float:
        return polyline_length(self.crack)

    def record(self) -> dict:
        """JSON-ready summary (no field arrays)."""
        return {"step": self.step, "time": self.time, "scale": self.scale,
                "crack": self.crack.tolist(), "length": self.length, "energy": self.energy,
                "grew": self.grew,
                "tips": [{k: (list(v) if isinstance(v, tuple) else v) for k, v in t.items()} for t in self.tips],
                "bookkeeping": self.bookkeeping,
                "reports": [r.to_dict() for r in self.reports]}


def initial_state(body: LoadedBody, crack, schedule: LoadSchedule) -> PropagationState:
    crack = np.asarray(crack, dtype=float)
    mesh = body.mesh(crack)
    u1 = body.solve_unit(mesh)
    s = schedule.scale(schedule.times[0])
    return PropagationState(0, float(schedule.times[0]), s, crack, mesh, u1, u1.energy())


def _tip_sweep(u1: DisplacementField, s: float, n_dir: int = 32):
    """Per-tip best plateau value at load ``s`` and growth direction."""
    meas = k2_measure(u1, WholeBody(u1.mesh.domain), n_probe=0, n_dir=n_dir)
    out = []
    for t in meas.tips:
        V = np.asarray(t["vector"])
        theta0 = t["angle"]
        ang = _angle_grid(theta0, n_dir)
        d = np.column_stack([np.cos(ang), np.sin(ang)])
        vals = d @ V
        # forward half-plane only; first index (the tangent) wins ties
        tau = np.array([np.cos(theta0), np.sin(theta0)])
        vals = np.where(d @ tau > 0, vals, -np.inf)
        k = int(np.argmax(vals))
        out.append({"tip": t["tip"], "tip_id": t["tip_id"], "value": s * s * t["value"],
                    "unit_value": t["value"], "angle": float(ang[k]),
                    "direction": (float(d[k, 0]), float(d[k, 1])), "r_outer": t["r_outer"]})
    return out


def _extend(crack, body_domain: CrackedDomain, growing, delta):
    """Append ``delta`` steps at the growing ends; returns the new polyline and active run."""
    crack = np.asarray(crack, dtype=float)
    frames = tip_frames(crack, body_domain)
    new = crack.copy()
    first = 0
    for t in growing:
        end = min(frames, key=lambda f: np.linalg.norm(f[1] - np.asarray(t["tip"])))[0]
        step = delta * np.asarray(t["direction"])
        if end == 0:
            new = np.vstack([new[0] + step, new])
            first = 1
        else:
            new = np.vstack([new, new[-1] + step])
    return new, list(range(first, first + len(crack) - 1))


def step(state: PropagationState, schedule: LoadSchedule, G: float, delta: float,
         body: LoadedBody) -> PropagationState:
    """Advance one load step; grow tips with ``K2 >= G`` (and ``K2 > 0``) by ``delta``.

    Raises
    ------
    PropagationError
        If the extended crack leaves the body or cannot be meshed.
    """
    k = state.step + 1
    if k >= len(schedule.times):
        raise ValueError("schedule exhausted")
    t = float(schedule.times[k])
    s_old, s = state.scale, schedule.scale(t)
    tips = _tip_sweep(state.unit_field, s)
    growing = [tp for tp in tips if tp["value"] > 0 and tp["value"] >= G]
    reports = [CriterionReport("growth", t, tp["value"], G, 0.0, tp in growing, ">=", "tubular",
                               {"tip": tp["tip"], "direction": tp["direction"],
                                "rule": "grow by delta when the unit plateau K2 reaches G"},
                               digest(state.unit_field, G, t, s)) for tp in tips]

    if not growing:
        E_prev, E_new = state.scale**2 * state.unit_energy, s * s * state.unit_energy
        work = E_new - E_prev
        book = {"work": work, "stored_increase": E_new - E_prev, "dissipated": 0.0,
                "tol": 1e-10 * max(abs(E_new), 1e-300), "transfer": 0.0, "length_increase": 0.0}
        book["satisfied"] = decide(work, book["stored_increase"], book["tol"], ">=")
        return PropagationState(k, t, s, state.crack, state.mesh, state.unit_field, state.unit_energy,
                                tips, reports, False, book)

    domain = state.mesh.domain
    try:
        new_crack, old_run = _extend(state.crack, domain, growing, delta)
        mesh_old = body.mesh(new_crack, active=old_run)
        mesh_new = body.mesh(new_crack)
    except GeometryError as exc:
        dump = json.dumps({"step": k, "time": t, "crack": state.crack.tolist(),
                           "growing": [tp["tip"] for tp in growing], "delta": delta})
        raise PropagationError(f"cannot extend the crack at step {k}: {exc}", dump) from exc
    u_old = body.solve_unit(mesh_old)
    u_new = body.solve_unit(mesh_new)
    e_old, e_new = u_old.energy(), u_new.energy()
    dl = polyline_length(new_crack) - state.length
    work = (s * s - s_old**2) * e_old
    stored = s * s * e_new - s_old**2 * e_old
    dissipated = G * dl
    # first-order growth: release over the step may fall short of the value at its start
    j_before = sum(tp["value"] for tp in growing)
    after = {tuple(np.round(tp["tip"], 12)): tp for tp in _tip_sweep(u_new, s)}
    j_after = sum(tp["value"] for tp in after.values())
    transfer = s_old**2 * abs(state.unit_energy - e_old)
    tol = 0.5 * delta * max(0.0, j_before - j_after) + transfer + 1e-10 * max(abs(stored), 1.0)
    book = {"work": work, "stored_increase": stored, "dissipated": dissipated, "tol": tol,
            "transfer": transfer, "length_increase": dl, "released": s * s * (e_old - e_new),
            "k2_before": j_before, "k2_after": j_after}
    book["satisfied"] = decide(work, stored + dissipated, tol, ">=")
    return PropagationState(k, t, s, new_crack, mesh_new, u_new, e_new, tips, reports, True, book)


def run_quasistatic(body: LoadedBody, crack, schedule: LoadSchedule, G: float, delta: float,
                    T: float | None = None, check_balance: bool = True) -> list[PropagationState]:
    """Run :func:`step` over the schedule up to time ``T`` (default: its end).

    Every accepted state is checked for discrete equilibrium when
    ``check_balance`` is set; the relative residuals are stored in the
    bookkeeping record.
    """
    states = [initial_state(body, crack, schedule)]
    T = schedule.times[-1] if T is None else T
    while states[-1].step + 1 < len(schedule.times) and schedule.times[states[-1].step + 1] <= T + 1e-12:
        nxt = step(states[-1], schedule, G, delta, body)
        if check_balance:
            nxt.bookkeeping["residuals"] = residual_norms(nxt.unit_field)
        states.append(nxt)
    return states


def summary(states, G: float) -> dict:
    """Trajectory totals: dissipated ``G * (length increase)`` against the work input."""
    dl = states[-1].length - states[0].length
    work = float(sum(st.bookkeeping.get("work", 0.0) for st in states[1:]))
    first = next((st.step for st in states if st.grew), None)
    return {"length_increase": dl, "dissipated": G * dl, "work_input": work,
            "stored_increase": states[-1].energy - states[0].energy,
            "initiation_step": first, "steps": len(states) - 1,
            "length_monotone": bool(np.all(np.diff([st.length for st in states]) >= 0)),
            "bookkeeping_ok": bool(all(st.bookkeeping.get("satisfied", True) for st in states[1:]))}


def trajectory_csv(states, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,crack_length,tip_values,grew\n")
        for st in states:
            vals = ";".join(repr(float(tp["value"])) for tp in st.tips)
            fh.write(f"{st.time!r},{st.length!r},{vals},{int(st.grew)}\n")
