"""Transport velocity fields ``eta`` with analytic gradients.

All fields are evaluated on batches of points ``x`` with shape ``(N, 2)``.
``value`` returns ``(N, 2)`` and ``grad`` returns ``(N, 2, 2)`` with
``grad[:, k, j] = d eta_k / d x_j``.
"""

from __future__ import annotations

import numpy as np


class TangencyError(ValueError):
    """Raised when a field is not tangent to the crack it is used with."""


class VelocityField:
    """Base class. Subclasses implement ``value`` and ``grad``."""

    #: bounding disc of the support as ``(center, radius)``; ``None`` if unbounded
    support = None

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def div(self, x):
        g = self.grad(x)
        return g[:, 0, 0] + g[:, 1, 1]

    @property
    def sup_norm(self) -> float:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def breakpoints(self):
        """Circles ``(center, radius)`` across which the field is not smooth."""
        return []

    def __mul__(self, s):
        return ScaledField(self, float(s))

    __rmul__ = __mul__

    def __add__(self, other):
        return SumField([self, other])

    def vanishes_outside(self, x) -> np.ndarray:
        """Boolean mask of points guaranteed to lie outside the support."""
        if self.support is None:
            return np.zeros(len(x), dtype=bool)
        c, r = self.support
        return np.linalg.norm(np.asarray(x) - c, axis=1) >= r


class ZeroField(VelocityField):
    def value(self, x):
        return np.zeros((len(x), 2))

    def grad(self, x):
        return np.zeros((len(x), 2, 2))

    @property
    def support(self):
        return (np.zeros(2), 0.0)

    @property
    def sup_norm(self):
        return 0.0


class ConstantField(VelocityField):
    """Spatially constant field (no compact support; test use only)."""

    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=float)

    def value(self, x):
        return np.broadcast_to(self.vector, (len(x), 2)).copy()

    def grad(self, x):
        return np.zeros((len(x), 2, 2))

    @property
    def sup_norm(self):
        return float(np.linalg.norm(self.vector))


class AffineField(VelocityField):
    """``eta(x) = A x + b`` (no compact support; test use only)."""

    def __init__(self, A, b=(0.0, 0.0)):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def value(self, x):
        return np.asarray(x) @ self.A.T + self.b

    def grad(self, x):
        return np.broadcast_to(self.A, (len(x), 2, 2)).copy()

    @property
    def sup_norm(self):
        return np.inf


class ShearField(VelocityField):
    """``eta(x) = (f(x_2), 0)``, whose flow is ``x_1 + t f(x_2)`` exactly."""

    def __init__(self, f, fprime, bound=np.inf):
        self.f = f
        self.fprime = fprime
        self._bound = bound

    def value(self, x):
        x = np.asarray(x)
        out = np.zeros_like(x, dtype=float)
        out[:, 0] = self.f(x[:, 1])
        return out

    def grad(self, x):
        x = np.asarray(x)
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 1] = self.fprime(x[:, 1])
        return g

    @property
    def sup_norm(self):
        return self._bound


class RadialProfileField(VelocityField):
    """``eta(x) = q(|x - c|) d`` for a radial profile ``q`` with compact support."""

    def __init__(self, center, direction, radius):
        self.center = np.asarray(center, dtype=float)
        self.direction = np.asarray(direction, dtype=float)
        self.radius = float(radius)
        self.support = (self.center, self.radius)

    def profile(self, rho):
        """Return ``q(rho)`` and ``q'(rho)``."""
        raise NotImplementedError

    def value(self, x):
        rho = np.linalg.norm(np.asarray(x) - self.center, axis=1)
        q, _ = self.profile(rho)
        return q[:, None] * self.direction

    def grad(self, x):
        dx = np.asarray(x) - self.center
        rho = np.linalg.norm(dx, axis=1)
        _, dq = self.profile(rho)
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.where(rho[:, None] > 0, dx / rho[:, None], 0.0)
        return (dq[:, None] * e)[:, None, :] * self.direction[None, :, None]

    @property
    def sup_norm(self):
        return float(np.linalg.norm(self.direction))

    def breakpoints(self):
        return [(self.center, self.radius)]

    def with_direction(self, direction):
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.direction = np.asarray(direction, dtype=float)
        return clone


class PlateauField(RadialProfileField):
    """Equal to ``d`` inside ``r_inner``, cubic (C^1) decay to zero at ``r_outer``."""

    def __init__(self, center, direction, r_inner, r_outer):
        if not 0 <= r_inner < r_outer:
            raise ValueError("need 0 <= r_inner < r_outer")
        super().__init__(center, direction, r_outer)
        self.r_inner = float(r_inner)
        self.r_outer = float(r_outer)

    def profile(self, rho):
        width = self.r_outer - self.r_inner
        s = np.clip((rho - self.r_inner) / width, 0.0, 1.0)
        q = 1.0 - 3.0 * s**2 + 2.0 * s**3
        dq = (-6.0 * s + 6.0 * s**2) / width
        return q, dq

    def breakpoints(self):
        return [(self.center, self.r_inner), (self.center, self.r_outer)]


class LinearPlateauField(PlateauField):
    """Plateau with a linear ramp (the classical domain J-integral weight)."""

    def profile(self, rho):
        width = self.r_outer - self.r_inner
        s = (rho - self.r_inner) / width
        inside = (s > 0) & (s < 1)
        q = np.clip(1.0 - s, 0.0, 1.0)
        dq = np.where(inside, -1.0 / width, 0.0)
        return q, dq


class BumpField(RadialProfileField):
    """C-infinity bump ``exp(1 - 1 / (1 - (rho/R)^2))``; equal to ``d`` at the center."""

    def profile(self, rho):
        s = rho / self.radius
        inside = s < 1.0
        q = np.zeros_like(s)
        dq = np.zeros_like(s)
        si = s[inside]
        den = 1.0 - si**2
        q[inside] = np.exp(1.0 - 1.0 / den)
        dq[inside] = q[inside] * (-2.0 * si / den**2) / self.radius
        return q, dq


class ScaledField(VelocityField):
    def __init__(self, base, scale):
        self.base = base
        self.scale = scale
        self.support = base.support

    def value(self, x):
        return self.scale * self.base.value(x)

    def grad(self, x):
        return self.scale * self.base.grad(x)

    def breakpoints(self):
        return self.base.breakpoints()

    @property
    def sup_norm(self):
        return abs(self.scale) * self.base.sup_norm


class SumField(VelocityField):
    """Sum of fields. ``sup_norm`` is exact when the supports are disjoint."""

    def __init__(self, fields):
        self.fields = list(fields)
        supports = [f.support for f in self.fields]
        if all(s is not None for s in supports):
            centers = np.array([s[0] for s in supports])
            lo = np.min([c - s[1] for c, s in zip(centers, supports)], axis=0)
            hi = np.max([c + s[1] for c, s in zip(centers, supports)], axis=0)
            center = 0.5 * (lo + hi)
            self.support = (center, max(np.linalg.norm(c - center) + s[1]
                                        for c, s in zip(centers, supports)))

    def value(self, x):
        return sum(f.value(x) for f in self.fields)

    def grad(self, x):
        return sum(f.grad(x) for f in self.fields)

    def breakpoints(self):
        return [b for f in self.fields for b in f.breakpoints()]

    def vanishes_outside(self, x):
        mask = np.ones(len(x), dtype=bool)
        for f in self.fields:
            mask &= f.vanishes_outside(x)
        return mask

    @property
    def sup_norm(self):
        if self._disjoint():
            return max(f.sup_norm for f in self.fields)
        return sum(f.sup_norm for f in self.fields)

    def _disjoint(self):
        sup = [f.support for f in self.fields]
        if any(s is None for s in sup):
            return False
        for i in range(len(sup)):
            for j in range(i + 1, len(sup)):
                if np.linalg.norm(sup[i][0] - sup[j][0]) < sup[i][1] + sup[j][1]:
                    return False
        return True


def tip_advance_field(crack, tip_index: int = -1, r_inner: float = 0.1,
                      r_outer: float = 0.2, speed: float = 1.0, profile=PlateauField):
    """Plateau field moving one crack tip along the crack tangent at ``speed``."""
    crack = np.asarray(crack, dtype=float)
    if tip_index in (-1, len(crack) - 1):
        tip, prev = crack[-1], crack[-2]
    else:
        tip, prev = crack[0], crack[1]
    tangent = (tip - prev) / np.linalg.norm(tip - prev)
    return profile(tip, speed * tangent, r_inner, r_outer)


def check_tangency(field: VelocityField, crack, tol: float = 1e-8, npts: int = 8) -> float:
    """Check ``eta . n = 0`` at Gauss points of every crack segment.

    Returns the worst ``|eta . n|``. Raises :class:`TangencyError` naming the
    worst point when it exceeds ``tol * sup_norm``.
    """
    crack = np.asarray(crack, dtype=float)
    if len(crack) < 2:
        return 0.0
    gx, _ = np.polynomial.legendre.leggauss(npts)
    s = 0.5 * (gx + 1.0)
    a, b = crack[:-1], crack[1:]
    t = b - a
    n = np.stack([-t[:, 1], t[:, 0]], axis=1) / np.linalg.norm(t, axis=1)[:, None]
    # include the vertices, where tips sit
    s = np.concatenate([[0.0], s, [1.0]])
    pts = (a[:, None, :] + s[None, :, None] * t[:, None, :]).reshape(-1, 2)
    normals = np.repeat(n, len(s), axis=0)
    eta_n = np.abs(np.einsum("ij,ij->i", field.value(pts), normals))
    worst = int(np.argmax(eta_n))
    scale = field.sup_norm if np.isfinite(field.sup_norm) else max(np.abs(field.value(pts)).max(), 1.0)
    if eta_n[worst] > tol * max(scale, 1e-300) and eta_n[worst] > 0:
        raise TangencyError(
            f"velocity field is not tangent to the crack: |eta.n| = {eta_n[worst]:.3e} "
            f"at ({pts[worst, 0]:.6g}, {pts[worst, 1]:.6g})")
    return float(eta_n[worst])
