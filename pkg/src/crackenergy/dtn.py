"""Dirichlet-to-Neumann operator of a cracked body and energy release rates.

The discrete operator is the Schur complement of the stiffness matrix on the
outer-boundary dofs,

    T = K_bb - K_bi K_ii^{-1} K_ib,

so that ``1/2 u0^T T u0`` is the minimal elastic energy with boundary data
``u0``. Release rates are central differences of that energy along the flow
of a crack-transport field, with the mesh carried by the flow so that the
boundary discretization is the same at ``t - dt`` and ``t + dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .equilibrium import (BoundaryDisplacement, EquilibriumProblem, SolverError,
                          assemble_stiffness, rigid_pins, solve_equilibrium, total_energy)
from .flow import FlowError, FlowMap
from .geometry import Mesh
from .material import ElasticModel


@dataclass(frozen=True)
class DtNOperator:
    """Dense boundary operator.

    Attributes
    ----------
    matrix : (nb * ncomp, nb * ncomp) array
    boundary_nodes : (nb,) int array
        Node index of each block row (dof ``k * ncomp + i`` is component ``i``
        of ``boundary_nodes[k]``).
    ncomp : int
    coordinates : (nb, 2) array
    """

    matrix: np.ndarray
    boundary_nodes: np.ndarray
    ncomp: int
    coordinates: np.ndarray

    def _vector(self, u0) -> np.ndarray:
        if isinstance(u0, BoundaryDisplacement):
            order = {int(n): k for k, n in enumerate(u0.nodes)}
            idx = [order[int(n)] for n in self.boundary_nodes]
            return u0.values[idx].ravel()
        return np.asarray(u0, dtype=float).ravel()

    def apply(self, u0) -> np.ndarray:
        return self.matrix @ self._vector(u0)

    def quadratic(self, u0) -> float:
        """``<T u0, u0>``."""
        v = self._vector(u0)
        return float(v @ self.matrix @ v)

    def symmetry_defect(self) -> float:
        """``max |T - T^t| / max |T|``."""
        s = np.abs(self.matrix).max(initial=0.0)
        return float(np.abs(self.matrix - self.matrix.T).max(initial=0.0) / s) if s > 0 else 0.0

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))[0])

    def is_psd(self, rtol: float = 1e-10) -> bool:
        return self.min_eigenvalue() >= -rtol * np.abs(self.matrix).max(initial=0.0)

    def to_csv(self, path) -> None:
        """Matrix dump; the header row lists ``node:component@x:y`` per column."""
        cols = [f"{int(n)}:{i}@{x!r}:{y!r}" for n, (x, y) in zip(self.boundary_nodes, self.coordinates)
                for i in range(self.ncomp)]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for row in self.matrix:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def assemble_dtn(mesh: Mesh, model: ElasticModel, block: int = 64) -> DtNOperator:
    """Schur complement of the stiffness matrix on the boundary dofs.

    Interior and seam dofs are eliminated with one sparse LU factorization.
    Rigid modes of components not attached to the boundary are pinned
    (they do not couple to the boundary).
    """
    nc = model.ncomp
    K = assemble_stiffness(mesh, model).tocsr()
    n = mesh.n_nodes * nc
    bnodes = np.sort(mesh.boundary_nodes)
    b = (bnodes[:, None] * nc + np.arange(nc)).ravel()
    mask = np.ones(n, dtype=bool)
    mask[b] = False
    pins, _ = rigid_pins(mesh, nc)
    mask[pins] = False
    i = np.flatnonzero(mask)
    Kbb = K[b][:, b].toarray()
    if len(i) == 0:
        return DtNOperator(Kbb, bnodes, nc, mesh.nodes[bnodes])
    Kii = K[i][:, i].tocsc()
    Kib = K[i][:, b].tocsc()
    try:
        lu = spla.splu(Kii)
    except RuntimeError as exc:
        raise SolverError(f"interior block is singular beyond rigid modes: {exc}") from exc
    T = Kbb.copy()
    KbiT = Kib.T.tocsr()
    for s in range(0, len(b), block):
        cols = Kib[:, s:s + block].toarray()
        X = lu.solve(cols)
        if not np.all(np.isfinite(X)):
            raise SolverError("interior block is singular beyond rigid modes")
        T[:, s:s + block] -= KbiT @ X
    return DtNOperator(T, bnodes, nc, mesh.nodes[bnodes])


@dataclass(frozen=True)
class EnergyIdentity:
    lhs: float
    rhs: float
    gap: float
    relative_gap: float


def dtn_energy_identity(T: DtNOperator, u0: BoundaryDisplacement, mesh: Mesh,
                        model: ElasticModel, method: str = "direct") -> EnergyIdentity:
    """Compare ``1/2 <T u0, u0>`` with the minimized elastic energy."""
    lhs = 0.5 * T.quadratic(u0)
    rhs = total_energy(solve_equilibrium(mesh, model, u0, method=method))
    gap = abs(lhs - rhs)
    scale = max(abs(lhs), abs(rhs))
    return EnergyIdentity(lhs, rhs, gap, gap / scale if scale > 0 else 0.0)


# ---------------------------------------------------------------------------
# release rates


def minimal_energy(problem: EquilibriumProblem, method: str = "direct") -> float:
    """``1/2 <T u0, u0>`` computed matrix-free by one solve."""
    return total_energy(solve_equilibrium(problem.mesh, problem.model, problem.u0, method=method))


def flowed_mesh(mesh: Mesh, flow: FlowMap, t: float, tol: float = 1e-12) -> Mesh:
    """The mesh carried by ``phi_t``.

    Raises
    ------
    FlowError
        If the flow moves outer-boundary nodes (the boundary trace must stay
        fixed) or inverts an element.
    """
    if t == 0.0:
        return mesh
    moved = flow.map(mesh.nodes, t)
    drift = np.abs(moved[mesh.boundary_nodes] - mesh.nodes[mesh.boundary_nodes]).max(initial=0.0)
    if drift > tol:
        raise FlowError(f"flow moves the outer boundary by {drift:.3e}; velocity support must "
                        "stay away from the boundary")
    try:
        return mesh.with_nodes(moved)
    except ValueError as exc:
        raise FlowError(f"mesh carried to t={t:g} is invalid: {exc}") from exc


def energy_along_flow(problem: EquilibriumProblem, flow: FlowMap, t: float) -> float:
    return minimal_energy(problem.with_mesh(flowed_mesh(problem.mesh, flow, t)))


def release_rate_fd(problem: EquilibriumProblem, flow: FlowMap, t: float, dt: float) -> float:
    """``-1/2 d/dt <T(phi_t) u0, u0>`` by a central difference with step ``dt``.

    ``problem.mesh`` is the reference (``t = 0``) mesh; the boundary data
    are held fixed.
    """
    ep = energy_along_flow(problem, flow, t + dt)
    em = energy_along_flow(problem, flow, t - dt)
    return -(ep - em) / (2.0 * dt)


@dataclass(frozen=True)
class ReleaseRate:
    value: float
    coarse: float
    fine: float
    dt: float
    error_estimate: float


def release_rate_richardson(problem: EquilibriumProblem, flow: FlowMap, t: float,
                            dt: float) -> ReleaseRate:
    """Central differences at ``dt`` and ``dt/2`` combined by Richardson extrapolation."""
    a = release_rate_fd(problem, flow, t, dt)
    b = release_rate_fd(problem, flow, t, dt / 2)
    v = (4.0 * b - a) / 3.0
    return ReleaseRate(v, a, b, dt, abs(v - b))
