"""P1 finite elements for the traction-free crack Dirichlet problem.

Degrees of freedom are numbered ``node * ncomp + component``. Crack faces
carry no constraint, so the traction-free condition holds in the natural
(weak) sense.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .geometry import Mesh
from .material import (ANTI_PLANE, ElasticModel, complementary_energy_density,
                       energy_density, stress)


class SolverError(RuntimeError):
    """Raised when the linear solve fails to reach its tolerance."""


class InadmissibleStress(ValueError):
    """Raised when a stress field is not statically admissible."""


# ---------------------------------------------------------------------------
# assembly


def element_stiffness(mesh: Mesh, model: ElasticModel) -> np.ndarray:
    """``(M, 3 ncomp, 3 ncomp)`` element matrices, row index ``a * ncomp + i``."""
    G = mesh.shape_gradients
    nc = model.ncomp
    Ke = np.einsum("ikjl,eak,ebl->eaibj", model.C, G, G) * mesh.areas[:, None, None, None, None]
    return Ke.reshape(mesh.n_triangles, 3 * nc, 3 * nc)


def element_dofs(mesh: Mesh, ncomp: int) -> np.ndarray:
    return (mesh.triangles[:, :, None] * ncomp + np.arange(ncomp)).reshape(mesh.n_triangles, -1)


def assemble_stiffness(mesh: Mesh, model: ElasticModel) -> sp.csr_matrix:
    """Global stiffness matrix (sum order fixed by element order)."""
    Ke = element_stiffness(mesh, model)
    dofs = element_dofs(mesh, model.ncomp)
    n = mesh.n_nodes * model.ncomp
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def floating_components(mesh: Mesh) -> list[np.ndarray]:
    """Node sets of mesh components that do not touch the outer boundary."""
    t = mesh.triangles
    rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    A = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(mesh.n_nodes,) * 2)
    ncomp, labels = connected_components(A, directed=False)
    grounded = set(labels[mesh.boundary_nodes].tolist())
    return [np.flatnonzero(labels == c) for c in range(ncomp) if c not in grounded]


def rigid_pins(mesh: Mesh, ncomp: int) -> tuple[np.ndarray, list[dict]]:
    """Minimal dof set removing the rigid modes of floating components."""
    dofs, report = [], []
    for comp in floating_components(mesh):
        a = int(comp[0])
        if ncomp == 1:
            pinned = [a * ncomp]
            report.append({"nodes": [a], "dofs": pinned, "modes": "translation"})
        else:
            d = np.linalg.norm(mesh.nodes[comp] - mesh.nodes[a], axis=1)
            b = int(comp[int(np.argmax(d))])
            # rotation about a moves b perpendicular to (b - a)
            v = mesh.nodes[b] - mesh.nodes[a]
            k = 1 if abs(v[0]) >= abs(v[1]) else 0
            pinned = [2 * a, 2 * a + 1, 2 * b + k]
            report.append({"nodes": [a, b], "dofs": pinned, "modes": "translation+rotation"})
        dofs.extend(pinned)
    return np.array(sorted(dofs), dtype=np.int64), report


# ---------------------------------------------------------------------------
# boundary data and fields


@dataclass(frozen=True)
class BoundaryDisplacement:
    """Prescribed displacement on the outer-boundary nodes.

    Attributes
    ----------
    nodes : (B,) int array
        Mesh node indices (``mesh.boundary_nodes``).
    values : (B, ncomp) array
    provenance : str
    """

    nodes: np.ndarray
    values: np.ndarray
    provenance: str = "table"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if len(v) != len(self.nodes):
            raise ValueError("one value row per boundary node is required")
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary displacement must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=np.int64))

    @property
    def ncomp(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_function(cls, mesh: Mesh, fn, ncomp: int = 1, provenance: str = "analytic"):
        """Sample ``fn(points) -> (N,) or (N, ncomp)`` at the boundary nodes.

        Points are nudged into an incident element so that the two copies
        of a crack mouth see their own side of a discontinuous field.
        """
        pts = mesh.sample_points()[mesh.boundary_nodes]
        vals = np.asarray(fn(pts), dtype=float).reshape(len(pts), ncomp)
        return cls(mesh.boundary_nodes, vals, provenance)

    @classmethod
    def linear(cls, mesh: Mesh, A, b=None):
        """``u0(x) = A x + b`` with ``A`` of shape ``(ncomp, 2)``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
        vals = mesh.nodes[mesh.boundary_nodes] @ A.T + b
        return cls(mesh.boundary_nodes, vals, "linear")

    @classmethod
    def table(cls, mesh: Mesh, values):
        return cls(mesh.boundary_nodes, values, "table")

    def scaled(self, s: float) -> "BoundaryDisplacement":
        return BoundaryDisplacement(self.nodes, s * self.values, self.provenance)

    def lift(self, n_nodes: int) -> np.ndarray:
        """Nodal field equal to the data on the boundary and zero elsewhere."""
        u = np.zeros((n_nodes, self.ncomp))
        u[self.nodes] = self.values
        return u


@dataclass(frozen=True)
class DisplacementField:
    """Nodal P1 displacement (both crack-face copies included)."""

    mesh: Mesh
    model: ElasticModel
    values: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(self.mesh.n_nodes, self.model.ncomp)
        object.__setattr__(self, "values", v)

    @cached_property
    def grad(self) -> np.ndarray:
        """``(M, ncomp, 2)`` element gradients ``du_i/dx_k``."""
        return np.einsum("eai,eak->eik", self.values[self.mesh.triangles], self.mesh.shape_gradients)

    @cached_property
    def stress(self) -> np.ndarray:
        return stress(self.model, self.grad)

    @cached_property
    def energy_density(self) -> np.ndarray:
        return energy_density(self.model, self.grad)

    def energy(self, weights=None) -> float:
        """``int w`` over the mesh, optionally with per-element coverage weights."""
        e = self.mesh.areas * self.energy_density
        if weights is not None:
            e = e * weights
        return float(e.sum())

    def jump(self) -> np.ndarray:
        """``u+ - u-`` at interior crack-node pairs."""
        sp_ = self.mesh.seam_pairs
        return self.values[sp_[:, 0]] - self.values[sp_[:, 1]]

    def scaled(self, s: float) -> "DisplacementField":
        return DisplacementField(self.mesh, self.model, s * self.values, dict(self.info))

    def with_values(self, values) -> "DisplacementField":
        return DisplacementField(self.mesh, self.model, values, {})

    def evaluate(self, points) -> np.ndarray:
        el, lam = self.mesh.locate(points)
        return np.einsum("pa,pai->pi", lam, self.values[self.mesh.triangles[el]])

    def grad_at(self, points) -> np.ndarray:
        el, _ = self.mesh.locate(points)
        return self.grad[el]

    def to_csv(self, path) -> None:
        nc = self.model.ncomp
        head = "node,x,y," + ",".join(f"u{i + 1}" for i in range(nc))
        data = np.column_stack([np.arange(self.mesh.n_nodes), self.mesh.nodes, self.values])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(head + "\n")
            for row in data:
                fh.write(f"{int(row[0])}," + ",".join(repr(float(v)) for v in row[1:]) + "\n")


# ---------------------------------------------------------------------------
# solve


@dataclass(frozen=True)
class EquilibriumProblem:
    """Mesh, material and Dirichlet data of one traction-free crack problem."""

    mesh: Mesh
    model: ElasticModel
    u0: BoundaryDisplacement

    def with_mesh(self, mesh: Mesh) -> "EquilibriumProblem":
        """Same boundary values on a mesh with the same boundary numbering."""
        return EquilibriumProblem(mesh, self.model, self.u0)


def solve_equilibrium(mesh: Mesh, model: ElasticModel, u0: BoundaryDisplacement,
                      method: str = "cg", rtol: float = 1e-12, K=None) -> DisplacementField:
    """Minimize the discrete elastic energy with Dirichlet data ``u0``.

    Parameters
    ----------
    method : {"cg", "direct"}
        Jacobi-preconditioned conjugate gradients (default) or sparse LU.
    rtol : float
        Relative residual tolerance for CG.

    Returns
    -------
    DisplacementField
        ``info`` records the pinned rigid modes of floating components,
        the iteration count and the final relative residual.
    """
    nc = model.ncomp
    if u0.ncomp != nc:
        raise ValueError(f"boundary data has {u0.ncomp} components, model needs {nc}")
    if not np.array_equal(np.sort(u0.nodes), np.sort(mesh.boundary_nodes)):
        raise ValueError("boundary data must cover exactly the mesh boundary nodes")
    K = assemble_stiffness(mesh, model) if K is None else K
    n = mesh.n_nodes * nc
    u = u0.lift(mesh.n_nodes).ravel()
    fixed = np.zeros(n, dtype=bool)
    fixed[(u0.nodes[:, None] * nc + np.arange(nc)).ravel()] = True
    pins, pin_report = rigid_pins(mesh, nc)
    fixed[pins] = True
    free = np.flatnonzero(~fixed)
    info = {"pinned": pin_report, "method": method, "iterations": 0, "relative_residual": 0.0}
    if len(free):
        Kff = K[free][:, free].tocsr()
        rhs = -(K[free] @ u)
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            x = np.zeros(len(free))
        elif method == "direct":
            x = spla.splu(Kff.tocsc()).solve(rhs)
        elif method == "cg":
            count = [0]

            def cb(_):
                count[0] += 1

            d = Kff.diagonal()
            M = sp.diags(1.0 / np.where(d > 0, d, 1.0))
            x, flag = spla.cg(Kff, rhs, rtol=rtol, atol=0.0, M=M, maxiter=20 * len(free),
                              callback=cb)
            info["iterations"] = count[0]
            if flag != 0:
                res = np.linalg.norm(Kff @ x - rhs) / bnorm
                raise SolverError(f"CG did not converge after {count[0]} iterations "
                                  f"(relative residual {res:.3e})")
        else:
            raise ValueError(f"unknown solver method {method!r}")
        res = np.linalg.norm(Kff @ x - rhs) / bnorm if bnorm > 0 else 0.0
        if not np.isfinite(res) or res > max(1e3 * rtol, 1e-8):
            raise SolverError(f"linear solve failed: relative residual {res:.3e}")
        info["relative_residual"] = float(res)
        u[free] = x
    return DisplacementField(mesh, model, u.reshape(-1, nc), info)


def solve(problem: EquilibriumProblem, **kw) -> DisplacementField:
    return solve_equilibrium(problem.mesh, problem.model, problem.u0, **kw)


def total_energy(u: DisplacementField, model: ElasticModel | None = None) -> float:
    """``int_Omega w(grad u) dx``. P1 gradients are element-wise constant, so
    the element integral is exact."""
    if model is not None and model != u.model:
        u = DisplacementField(u.mesh, model, u.values)
    return u.energy()


# ---------------------------------------------------------------------------
# residuals and duality


def _split_rows(mesh: Mesh, nc: int, exclude_dofs):
    """Row masks for bulk interior dofs and crack-node dofs (free only)."""
    n = mesh.n_nodes * nc
    free = np.ones(n, dtype=bool)
    free[(mesh.boundary_nodes[:, None] * nc + np.arange(nc)).ravel()] = False
    free[exclude_dofs] = False
    crack = np.zeros(mesh.n_nodes, dtype=bool)
    crack[mesh.crack_nodes] = True
    crack = np.repeat(crack, nc)
    return free & ~crack, free & crack


def _norms(r, scale, interior, crack):
    out = {}
    for name, rows in (("interior_residual", interior), ("crack_traction_residual", crack)):
        s = np.linalg.norm(scale[rows])
        out[name] = float(np.linalg.norm(r[rows]) / s) if s > 0 else 0.0
    return out


def residual_norms(u: DisplacementField, model: ElasticModel | None = None,
                   mesh: Mesh | None = None) -> dict:
    """Relative residuals of ``K u`` on bulk rows and on crack-face rows.

    Each norm is ``||r_rows|| / || |K| |u| ||_rows``, which is 0 for an
    exact discrete equilibrium and O(1) for a field far from equilibrium.
    """
    mesh = u.mesh if mesh is None else mesh
    model = u.model if model is None else model
    K = assemble_stiffness(mesh, model)
    x = u.values.ravel()
    r = K @ x
    scale = abs(K) @ np.abs(x)
    pins, _ = rigid_pins(mesh, model.ncomp)
    interior, crack = _split_rows(mesh, model.ncomp, pins)
    return _norms(r, scale, interior, crack)


@dataclass(frozen=True)
class StressField:
    """Element-wise constant stress ``(M, ncomp, 2)``."""

    mesh: Mesh
    model: ElasticModel
    values: np.ndarray

    @classmethod
    def from_displacement(cls, u: DisplacementField) -> "StressField":
        return cls(u.mesh, u.model, u.stress.copy())

    def scaled(self, s: float) -> "StressField":
        return StressField(self.mesh, self.model, s * self.values)

    def symmetry_defect(self) -> float:
        if self.model.mode == ANTI_PLANE:
            return 0.0
        return float(np.abs(self.values - self.values.transpose(0, 2, 1)).max(initial=0.0))

    def nodal_divergence(self):
        """Assembled ``int sigma : grad(phi_a)`` and its absolute-value scale."""
        nc = self.model.ncomp
        contrib = np.einsum("eik,eak->eai", self.values, self.mesh.shape_gradients) \
            * self.mesh.areas[:, None, None]
        r = np.zeros((self.mesh.n_nodes, nc))
        s = np.zeros((self.mesh.n_nodes, nc))
        np.add.at(r, self.mesh.triangles, contrib)
        np.add.at(s, self.mesh.triangles, np.abs(contrib))
        return r.ravel(), s.ravel()

    def residual_norms(self) -> dict:
        r, s = self.nodal_divergence()
        pins, _ = rigid_pins(self.mesh, self.model.ncomp)
        interior, crack = _split_rows(self.mesh, self.model.ncomp, pins)
        return _norms(r, s, interior, crack)


@dataclass(frozen=True)
class MoreauResult:
    lower_bound: float
    energy: float
    gap: float
    relative_gap: float
    boundary_work: float
    complementary_energy: float


def moreau_bound(sigma: StressField, u0: BoundaryDisplacement, model: ElasticModel | None = None,
                 energy: float | None = None, admissibility_tol: float = 1e-8) -> MoreauResult:
    """Dual lower bound ``int_{dOmega} (sigma n) . u0 - W*(sigma)`` on the minimal energy.

    The boundary pairing is evaluated in weak form as ``int sigma : grad(lift u0)``,
    which equals the boundary integral for equilibrated stresses.

    Raises
    ------
    InadmissibleStress
        If ``sigma`` is not symmetric (plane strain) or not in discrete
        equilibrium with traction-free crack faces.
    """
    model = sigma.model if model is None else model
    mesh = sigma.mesh
    problems = []
    scale = max(np.abs(sigma.values).max(initial=0.0), 1e-300)
    if sigma.symmetry_defect() > 1e-10 * scale:
        problems.append(f"stress not symmetric (defect {sigma.symmetry_defect():.3e})")
    res = sigma.residual_norms()
    if res["interior_residual"] > admissibility_tol:
        problems.append(f"div sigma != 0 in the body (relative residual {res['interior_residual']:.3e})")
    if res["crack_traction_residual"] > admissibility_tol:
        problems.append(f"crack faces not traction free (relative residual "
                        f"{res['crack_traction_residual']:.3e})")
    if problems:
        raise InadmissibleStress("; ".join(problems))
    lift = DisplacementField(mesh, model, u0.lift(mesh.n_nodes))
    work = float(np.sum(mesh.areas * np.einsum("eik,eik->e", sigma.values, lift.grad)))
    wstar = float(np.sum(mesh.areas * complementary_energy_density(model, sigma.values)))
    if energy is None:
        energy = total_energy(solve_equilibrium(mesh, model, u0))
    bound = work - wstar
    gap = energy - bound
    return MoreauResult(bound, energy, gap, gap / energy if energy > 0 else abs(gap),
                        work, wstar)
