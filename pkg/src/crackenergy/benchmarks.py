"""Closed-form anti-plane crack-tip field and the standard benchmark problems."""

from __future__ import annotations

import numpy as np

from .equilibrium import BoundaryDisplacement, EquilibriumProblem
from .geometry import CrackedDomain, build_mesh
from .material import ANTI_PLANE, ElasticModel

UNIT_SQUARE = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
EDGE_CRACK = np.array([(0.0, 0.5), (0.5, 0.5)])
CENTER_CRACK = np.array([(0.25, 0.5), (0.75, 0.5)])


def _local_polar(x, tip, direction):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    rel = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(tip, dtype=float)
    xl = rel @ d
    yl = rel @ np.array([-d[1], d[0]])
    return np.hypot(xl, yl), np.arctan2(yl, xl), d


def mode3_displacement(x, tip=(0.5, 0.5), direction=(1.0, 0.0), K=1.0, mu=1.0):
    """``u = (K/mu) sqrt(2 r / pi) sin(theta / 2)``, faces at ``theta = +-pi``."""
    r, th, _ = _local_polar(x, tip, direction)
    return K / mu * np.sqrt(2.0 * r / np.pi) * np.sin(0.5 * th)


def mode3_gradient(x, tip=(0.5, 0.5), direction=(1.0, 0.0), K=1.0, mu=1.0):
    """Gradient of :func:`mode3_displacement` in global coordinates, shape ``(N, 2)``."""
    r, th, d = _local_polar(x, tip, direction)
    with np.errstate(divide="ignore"):
        amp = K / mu / np.sqrt(2.0 * np.pi * r)
    gl = np.column_stack([-amp * np.sin(0.5 * th), amp * np.cos(0.5 * th)])
    n = np.array([-d[1], d[0]])
    return gl[:, :1] * d + gl[:, 1:] * n


def mode3_energy_density(x, tip=(0.5, 0.5), K=1.0, mu=1.0):
    """``w = K^2 / (4 pi mu r)``."""
    r = np.linalg.norm(np.atleast_2d(x) - np.asarray(tip), axis=1)
    return K * K / (4.0 * np.pi * mu * r)


def mode3_release_rate(K=1.0, mu=1.0) -> float:
    return K * K / (2.0 * mu)


def edge_crack_mode3(h: float, K: float = 1.0, mu: float = 1.0, **mesh_kw) -> EquilibriumProblem:
    """Unit square with an edge crack from the left side to its center, loaded
    by the exact anti-plane tip field on the whole outer boundary."""
    domain = CrackedDomain(UNIT_SQUARE, EDGE_CRACK)
    mesh = build_mesh(domain, h, **mesh_kw)
    model = ElasticModel(ANTI_PLANE, 0.0, mu)
    u0 = BoundaryDisplacement.from_function(
        mesh, lambda p: mode3_displacement(p, EDGE_CRACK[-1], (1.0, 0.0), K, mu), 1, "mode3")
    return EquilibriumProblem(mesh, model, u0)


def center_crack_shear(h: float, mu: float = 1.0, amplitude: float = 1.0,
                       **mesh_kw) -> EquilibriumProblem:
    """Unit square with a central crack, out-of-plane shear ``u0 = amplitude * x_2``."""
    domain = CrackedDomain(UNIT_SQUARE, CENTER_CRACK)
    mesh = build_mesh(domain, h, **mesh_kw)
    model = ElasticModel(ANTI_PLANE, 0.0, mu)
    u0 = BoundaryDisplacement.linear(mesh, [[0.0, amplitude]])
    return EquilibriumProblem(mesh, model, u0)


def uncracked_linear(h: float, A=((1.0, 0.0),), model: ElasticModel | None = None) -> EquilibriumProblem:
    """Uncracked unit square with affine data ``u0 = A x``."""
    model = ElasticModel(ANTI_PLANE, 0.0, 1.0) if model is None else model
    mesh = build_mesh(CrackedDomain(UNIT_SQUARE), h)
    return EquilibriumProblem(mesh, model, BoundaryDisplacement.linear(mesh, A))
