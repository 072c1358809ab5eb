"""Scenario files: YAML description of a cracked body, its loading and the
parameters of every command.

Example::

    name: edge-mode3
    domain:
      outer: [[0, 0], [1, 0], [1, 1], [0, 1]]
      crack: [[0, 0.5], [0.5, 0.5]]
    material: {mode: anti_plane, lambda: 0.0, mu: 1.0}
    boundary: {type: mode3, K: 1.0, tip: [0.5, 0.5], direction: [1, 0]}
    mesh: {h: 0.0078125}

Floats are read with Python's ``float``, so decimal strings round-trip
exactly. Overrides use dotted keys (``mesh.h=0.01``); the value is parsed
as YAML.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .benchmarks import mode3_displacement
from .equilibrium import BoundaryDisplacement, EquilibriumProblem
from .geometry import CrackedDomain, Disc, GeometryError, Rect, WholeBody, build_mesh, polyline_length
from .material import ANTI_PLANE, PLANE_STRAIN, ElasticModel, MaterialError
from .velocity import PlateauField, tip_advance_field


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending field."""


DEFAULTS = {
    "name": "scenario",
    "domain": {"crack": []},
    "material": {"mode": ANTI_PLANE, "lambda": 0.0, "mu": 1.0},
    "boundary": {"type": "linear", "A": [[1.0, 0.0]]},
    "mesh": {"h": 1 / 64},
    "radii": None,
    "probes": [],
    "regions": None,
    "velocity": None,
    "flow": {"dt": 2e-3, "t": 0.0},
    "griffith": {"G": 0.0},
    "schedule": {"T": 1.0, "steps": 40, "s_max": 1.0, "delta": None},
    "output": {"dir": "out"},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def apply_override(data: dict, item: str) -> None:
    """Apply ``key.sub=value`` in place; ``value`` is parsed as YAML."""
    if "=" not in item:
        raise ScenarioError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"override {key}: cannot parse value {raw!r}: {exc}") from exc
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def _points(value, where, min_len=0):
    try:
        arr = np.array(value, dtype=float).reshape(-1, 2) if len(value) else np.zeros((0, 2))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: expected a list of [x, y] pairs ({exc})") from exc
    if len(arr) < min_len:
        raise ScenarioError(f"{where}: need at least {min_len} points")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{where}: non-finite coordinate")
    return arr


def _positive(value, where):
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: expected a number, got {value!r}") from exc
    if not v > 0 or not np.isfinite(v):
        raise ScenarioError(f"{where}: must be positive, got {value!r}")
    return v


@dataclass
class Scenario:
    data: dict
    source: str = "<dict>"

    # -- construction ------------------------------------------------------

    @classmethod
    def load(cls, path, overrides=()) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_text(text, str(path), overrides)

    @classmethod
    def from_text(cls, text, source="<text>", overrides=()) -> "Scenario":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ScenarioError(f"{source}: YAML error{where}: {getattr(exc, 'problem', exc)}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ScenarioError(f"{source}: top level must be a mapping")
        return cls.from_dict(raw, source, overrides)

    @classmethod
    def from_dict(cls, raw, source="<dict>", overrides=()) -> "Scenario":
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise ScenarioError(f"{source}: unknown top-level keys {sorted(unknown)}")
        data = _merge(DEFAULTS, raw)
        for item in overrides:
            apply_override(data, item)
        sc = cls(data, source)
        sc.validate()
        return sc

    def validate(self) -> None:
        d = self.data
        if "outer" not in d["domain"]:
            raise ScenarioError("domain.outer: missing")
        _points(d["domain"]["outer"], "domain.outer", 3)
        _points(d["domain"]["crack"], "domain.crack")
        try:
            self.domain
        except GeometryError as exc:
            raise ScenarioError(f"domain: {exc}") from exc
        _positive(d["mesh"]["h"], "mesh.h")
        try:
            self.model
        except (MaterialError, ValueError, TypeError, KeyError) as exc:
            raise ScenarioError(f"material: {exc}") from exc
        bt = d["boundary"].get("type")
        if bt not in ("linear", "mode3", "table"):
            raise ScenarioError(f"boundary.type: expected linear|mode3|table, got {bt!r}")
        if bt == "table":
            pts = d["boundary"].get("points")
            if not pts or any(len(p) < 3 for p in pts):
                raise ScenarioError("boundary.points: need rows [x, y, value...]")
        if d["radii"] is not None:
            for i, r in enumerate(d["radii"]):
                _positive(r, f"radii[{i}]")
        G = d["griffith"].get("G", 0.0)
        try:
            if float(G) < 0:
                raise ScenarioError("griffith.G: must be >= 0")
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"griffith.G: expected a number, got {G!r}") from exc
        sch = d["schedule"]
        _positive(sch["T"], "schedule.T")
        if not isinstance(sch["steps"], int) or sch["steps"] < 1:
            raise ScenarioError("schedule.steps: must be a positive integer")
        if sch.get("delta") is not None:
            _positive(sch["delta"], "schedule.delta")
        _positive(d["flow"]["dt"], "flow.dt")
        for i, reg in enumerate(d["regions"] or []):
            self._region(reg, f"regions[{i}]")
        for i, v in enumerate(d["velocity"] or []):
            self._velocity(v, f"velocity[{i}]")
        _points(d["probes"], "probes")

    # -- derived objects ---------------------------------------------------

    @property
    def name(self) -> str:
        return str(self.data["name"])

    @property
    def h(self) -> float:
        return float(self.data["mesh"]["h"])

    @property
    def domain(self) -> CrackedDomain:
        return CrackedDomain(_points(self.data["domain"]["outer"], "domain.outer", 3),
                             _points(self.data["domain"]["crack"], "domain.crack"))

    @property
    def model(self) -> ElasticModel:
        m = self.data["material"]
        mode = m.get("mode", ANTI_PLANE)
        if mode not in (ANTI_PLANE, PLANE_STRAIN):
            raise ValueError(f"mode must be {ANTI_PLANE} or {PLANE_STRAIN}, got {mode!r}")
        return ElasticModel(mode, float(m.get("lambda", 0.0)), float(m.get("mu", 1.0)))

    @property
    def G(self) -> float:
        return float(self.data["griffith"].get("G", 0.0))

    def load_function(self):
        """Unit-load boundary displacement as a function of position."""
        b = self.data["boundary"]
        nc = self.model.ncomp
        if b["type"] == "linear":
            A = np.array(b.get("A", [[1.0, 0.0]]), dtype=float).reshape(nc, 2)
            c = np.array(b.get("b", [0.0] * nc), dtype=float).reshape(nc)
            if nc == 1:
                return lambda p: np.atleast_2d(p) @ A[0] + c[0]
            return lambda p: np.atleast_2d(p) @ A.T + c
        if b["type"] == "mode3":
            if nc != 1:
                raise ScenarioError("boundary.type mode3 needs material.mode anti_plane")
            tip = b.get("tip", self.domain.tips[-1] if len(self.domain.tips) else (0.5, 0.5))
            direction = b.get("direction", (1.0, 0.0))
            K = float(b.get("K", 1.0))
            mu = self.model.lame_mu
            return lambda p: mode3_displacement(p, tuple(tip), tuple(direction), K, mu)
        return self._table_function(b["points"], nc)

    def _table_function(self, rows, nc):
        rows = np.array(rows, dtype=float)
        if rows.shape[1] != 2 + nc:
            raise ScenarioError(f"boundary.points: rows need {2 + nc} entries")
        outer = self.domain.outer
        closed = np.vstack([outer, outer[:1]])
        seg = np.diff(closed, axis=0)
        cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(seg, axis=1))])
        per = cum[-1]

        def arclength(p):
            p = np.atleast_2d(p)
            L2 = np.einsum("ij,ij->i", seg, seg)
            t = np.clip(np.einsum("pij,ij->pi", p[:, None, :] - closed[:-1][None], seg) / L2, 0, 1)
            foot = closed[:-1][None] + t[..., None] * seg[None]
            k = np.argmin(np.linalg.norm(foot - p[:, None, :], axis=2), axis=1)
            return cum[k] + t[np.arange(len(p)), k] * np.sqrt(L2[k])

        s_tab = arclength(rows[:, :2])
        order = np.argsort(s_tab)
        s_tab, vals = s_tab[order], rows[order, 2:]

        def fn(p):
            s = arclength(p)
            out = np.column_stack([np.interp(s, s_tab, vals[:, i], period=per) for i in range(nc)])
            return out[:, 0] if nc == 1 else out
        return fn

    def mesh(self, h: float | None = None):
        try:
            return build_mesh(self.domain, self.h if h is None else h)
        except GeometryError as exc:
            raise ScenarioError(f"mesh: {exc}") from exc

    def problem(self, h: float | None = None) -> EquilibriumProblem:
        mesh = self.mesh(h)
        u0 = BoundaryDisplacement.from_function(mesh, self.load_function(), self.model.ncomp,
                                                self.data["boundary"]["type"])
        return EquilibriumProblem(mesh, self.model, u0)

    def _region(self, reg, where):
        if not isinstance(reg, dict) or "type" not in reg:
            raise ScenarioError(f"{where}: expected a mapping with a type")
        t = reg["type"]
        if t == "disc":
            c = _points([reg.get("center", [])], f"{where}.center", 1)[0]
            return Disc(tuple(c), _positive(reg.get("radius"), f"{where}.radius"))
        if t == "rect":
            lo = _points([reg.get("lo", [])], f"{where}.lo", 1)[0]
            hi = _points([reg.get("hi", [])], f"{where}.hi", 1)[0]
            if np.any(hi <= lo):
                raise ScenarioError(f"{where}: hi must exceed lo")
            return Rect(tuple(lo), tuple(hi))
        if t == "body":
            return WholeBody(self.domain)
        raise ScenarioError(f"{where}.type: expected disc|rect|body, got {t!r}")

    def regions(self):
        """Configured regions; default is a disc around each tip plus the whole body."""
        if self.data["regions"] is not None:
            return [self._region(r, f"regions[{i}]") for i, r in enumerate(self.data["regions"])]
        dom = self.domain
        out = []
        for tip in dom.tips:
            R = 0.5 * min(dom.boundary_distance(tip)[0], polyline_length(dom.crack))
            others = [np.linalg.norm(tip - q) for q in dom.tips if np.linalg.norm(tip - q) > 0]
            if others:
                R = min(R, 0.45 * min(others))
            out.append(Disc(tuple(tip), R))
        return out + [WholeBody(dom)]

    def _velocity(self, spec, where):
        if not isinstance(spec, dict) or "type" not in spec:
            raise ScenarioError(f"{where}: expected a mapping with a type")
        t = spec["type"]
        if t == "tip_advance":
            crack = self.domain.crack
            if len(crack) < 2:
                raise ScenarioError(f"{where}: tip_advance needs a crack")
            return tip_advance_field(crack, int(spec.get("tip", -1)),
                                     _positive(spec.get("r_inner", 0.1), f"{where}.r_inner"),
                                     _positive(spec.get("r_outer", 0.2), f"{where}.r_outer"),
                                     float(spec.get("speed", 1.0)))
        if t == "plateau":
            c = _points([spec.get("center", [])], f"{where}.center", 1)[0]
            d = _points([spec.get("direction", [1.0, 0.0])], f"{where}.direction", 1)[0]
            return PlateauField(c, d, _positive(spec.get("r_inner"), f"{where}.r_inner"),
                                _positive(spec.get("r_outer"), f"{where}.r_outer"))
        raise ScenarioError(f"{where}.type: expected tip_advance|plateau, got {t!r}")

    def velocities(self):
        """Configured fields; default advances each tip with half its clearance."""
        if self.data["velocity"] is not None:
            return [self._velocity(v, f"velocity[{i}]") for i, v in enumerate(self.data["velocity"])]
        dom = self.domain
        out = []
        crack = dom.crack
        for end in (0, -1):
            if len(crack) < 2 or dom.boundary_distance(crack[end])[0] <= dom.tol:
                continue
            R = 0.45 * min(dom.boundary_distance(crack[end])[0], polyline_length(crack))
            others = [np.linalg.norm(crack[end] - q) for q in dom.tips if np.linalg.norm(crack[end] - q) > 0]
            if others:
                R = min(R, 0.45 * min(others))
            out.append(tip_advance_field(crack, end, 0.5 * R, R))
        return out

    def digest(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
