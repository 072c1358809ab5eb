"""Linear elastic constitutive law in two dimensions.

Two kinematic settings are supported:

* ``plane_strain``: the displacement is a 2-vector and ``grad_u`` a 2x2 matrix
  ``grad_u[i, k] = du_i/dx_k``.
* ``anti_plane``: the out-of-plane displacement is a scalar and ``grad_u`` is
  a 2-vector. Internally it is handled as a 1x2 matrix.

The energy density is the quadratic form ``w = 1/2 C grad_u : grad_u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PLANE_STRAIN = "plane_strain"
ANTI_PLANE = "anti_plane"


class MaterialError(ValueError):
    """Raised for a non-coercive or non-symmetric elasticity tensor."""


def isotropic_tensor(lame_lambda: float, lame_mu: float) -> np.ndarray:
    """Return ``C_ijkl = lambda d_ij d_kl + mu (d_ik d_jl + d_il d_jk)`` (2D)."""
    d = np.eye(2)
    return (lame_lambda * np.einsum("ij,kl->ijkl", d, d)
            + lame_mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d)))


def check_symmetries(C: np.ndarray, rtol: float = 1e-12) -> None:
    """Raise :class:`MaterialError` unless ``C_ijkl = C_jikl = C_klij``."""
    C = np.asarray(C, dtype=float)
    if C.shape != (2, 2, 2, 2):
        raise MaterialError(f"elasticity tensor must have shape (2, 2, 2, 2), got {C.shape}")
    scale = max(np.abs(C).max(), 1e-300)
    minor = np.abs(C - C.transpose(1, 0, 2, 3)).max()
    major = np.abs(C - C.transpose(2, 3, 0, 1)).max()
    if minor > rtol * scale or major > rtol * scale:
        raise MaterialError(
            f"elasticity tensor lacks required symmetries (minor defect {minor:.3e}, "
            f"major defect {major:.3e})")


@dataclass(frozen=True)
class ElasticModel:
    """Isotropic plane strain or anti-plane shear, or a user tensor (plane strain).

    Parameters
    ----------
    mode : str
        ``"plane_strain"`` or ``"anti_plane"``.
    lame_lambda, lame_mu : float
        Lame constants. Only ``lame_mu`` is used in anti-plane shear.
    tensor : ndarray, optional
        Full ``C_ijkl`` replacing the isotropic one (plane strain only).
    """

    mode: str = ANTI_PLANE
    lame_lambda: float = 0.0
    lame_mu: float = 1.0
    tensor: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in (PLANE_STRAIN, ANTI_PLANE):
            raise MaterialError(f"unknown mode {self.mode!r}")
        if self.tensor is not None:
            if self.mode != PLANE_STRAIN:
                raise MaterialError("a full tensor is only meaningful in plane strain")
            C = np.array(self.tensor, dtype=float)
            check_symmetries(C)
            C.setflags(write=False)
            object.__setattr__(self, "tensor", C)
            return
        if not self.lame_mu > 0:
            raise MaterialError(f"shear modulus must be positive, got {self.lame_mu}")
        if self.mode == PLANE_STRAIN and not self.lame_lambda + self.lame_mu > 0:
            raise MaterialError("plane strain requires lambda + mu > 0")

    @classmethod
    def from_tensor(cls, C) -> "ElasticModel":
        return cls(mode=PLANE_STRAIN, lame_lambda=np.nan, lame_mu=np.nan, tensor=C)

    @property
    def ncomp(self) -> int:
        """Number of displacement components per node."""
        return 1 if self.mode == ANTI_PLANE else 2

    @property
    def C(self) -> np.ndarray:
        """Elasticity tensor with shape ``(ncomp, 2, ncomp, 2)``."""
        if self.mode == ANTI_PLANE:
            return self.lame_mu * np.eye(2).reshape(1, 2, 1, 2)
        if self.tensor is not None:
            return self.tensor
        return isotropic_tensor(self.lame_lambda, self.lame_mu)

    def as_matrix(self) -> np.ndarray:
        """``C`` flattened to a ``(2 ncomp, 2 ncomp)`` matrix acting on ``grad_u.ravel()``."""
        n = 2 * self.ncomp
        return self.C.reshape(n, n)

    def voigt(self) -> np.ndarray:
        """Stiffness in engineering Voigt notation ``[e11, e22, 2 e12]`` (plane strain)."""
        C = self.C
        idx = [(0, 0), (1, 1), (0, 1)]
        return np.array([[C[i + j] for j in idx] for i in idx])


def _as_matrix_grad(model: ElasticModel, grad_u):
    g = np.asarray(grad_u, dtype=float)
    if model.mode == ANTI_PLANE:
        if g.shape[-1] != 2:
            raise ValueError("anti-plane gradient must end with a length-2 axis")
        if g.ndim >= 2 and g.shape[-2:] == (1, 2):
            return g, False
        return g[..., None, :], True
    if g.shape[-2:] != (2, 2):
        raise ValueError("plane strain gradient must end with a 2x2 block")
    return g, False


def stress(model: ElasticModel, grad_u) -> np.ndarray:
    """Return ``C grad_u`` with the same shape as ``grad_u`` (batched over leading axes)."""
    g, squeezed = _as_matrix_grad(model, grad_u)
    s = np.einsum("ijkl,...kl->...ij", model.C, g)
    return s[..., 0, :] if squeezed else s


def energy_density(model: ElasticModel, grad_u) -> np.ndarray:
    """Return ``w = 1/2 C grad_u : grad_u``."""
    g, _ = _as_matrix_grad(model, grad_u)
    s = np.einsum("ijkl,...kl->...ij", model.C, g)
    return 0.5 * np.einsum("...ij,...ij->...", s, g)


def complementary_energy_density(model: ElasticModel, sigma) -> np.ndarray:
    """Polar of ``w`` evaluated on a symmetric stress: ``1/2 C^-1 sigma : sigma``."""
    s = np.asarray(sigma, dtype=float)
    if model.mode == ANTI_PLANE:
        if s.shape[-2:] == (1, 2):
            s = s[..., 0, :]
        return 0.5 * np.einsum("...i,...i->...", s, s) / model.lame_mu
    voigt_s = np.stack([s[..., 0, 0], s[..., 1, 1], s[..., 0, 1]], axis=-1)
    S = np.linalg.inv(model.voigt())
    return 0.5 * np.einsum("...i,ij,...j->...", voigt_s, S, voigt_s)


@dataclass(frozen=True)
class GrowthConstants:
    """Constants with ``c |E_sym|^2 <= w(E) <= C |E|^2``."""

    c_lower: float
    C_upper: float


def verify_growth(model: ElasticModel) -> GrowthConstants:
    """Extreme eigenvalues of ``w`` on symmetric matrices (lower) and on all matrices (upper).

    Raises :class:`MaterialError` if ``w`` is not coercive on symmetric gradients.
    """
    Q = 0.5 * model.as_matrix()
    Q = 0.5 * (Q + Q.T)
    if model.mode == ANTI_PLANE:
        basis = np.eye(2)
    else:
        r = 1.0 / np.sqrt(2.0)
        # orthonormal basis of symmetric 2x2 matrices, flattened row-major
        basis = np.array([[1.0, 0, 0, 0], [0, 0, 0, 1.0], [0, r, r, 0]]).T
    lower = np.linalg.eigvalsh(basis.T @ Q @ basis).min()
    upper = np.linalg.eigvalsh(Q).max()
    if not lower > 0:
        raise MaterialError(f"energy is not coercive on symmetric gradients (min eigenvalue {lower:.3e})")
    return GrowthConstants(float(lower), float(upper))
