import numpy as np
import pytest

from crackenergy.flow import FlowError, integrate_flow, lattice, monotonicity_check, transport_crack
from crackenergy.geometry import point_polyline_distance
from crackenergy.velocity import (BumpField, ConstantField, PlateauField, ShearField,
                                  TangencyError, ZeroField, check_tangency, tip_advance_field)

CRACK = np.array([(0.25, 0.5), (0.75, 0.5)])


class ModulatedShear(ShearField):
    """``(cos(t) f(x2), 0)``; its flow is ``x1 + sin(t) f(x2)``."""

    def __init__(self, t):
        super().__init__(np.sin, np.cos, 1.0)
        self.t = t

    def value(self, x):
        return np.cos(self.t) * super().value(x)

    def grad(self, x):
        return np.cos(self.t) * super().grad(x)


def test_zero_field_is_identity():
    pts = lattice(n=5)
    flow = integrate_flow(ZeroField(), 1.0, 0.1, points=pts)
    assert np.all(flow.trajectories == pts)
    assert np.all(flow.jacobians == 1.0)


def test_steady_shear_is_integrated_exactly():
    pts = lattice(n=7)
    flow = integrate_flow(ShearField(np.sin, np.cos, 1.0), 0.8, 0.1, points=pts)
    exact = pts + np.column_stack([0.8 * np.sin(pts[:, 1]), 0 * pts[:, 1]])
    assert np.abs(flow.trajectories[-1] - exact).max() < 1e-14


def _modulated_error(dt, T=1.0):
    pts = lattice(n=7)
    flow = integrate_flow(ModulatedShear, T, dt, points=pts, samples=1)
    exact = pts + np.column_stack([np.sin(T) * np.sin(pts[:, 1]), 0 * pts[:, 1]])
    return np.abs(flow.trajectories[-1] - exact).max()


def test_modulated_shear_fourth_order():
    errs = [_modulated_error(dt) for dt in (0.2, 0.1, 0.05)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.9), orders


def test_jacobian_matches_liouville():
    eta = BumpField((0.5, 0.5), (1.0, 0.5), 0.3)
    pts = np.array([(0.45, 0.5), (0.55, 0.52), (0.5, 0.6)])
    T = 0.1
    flow = integrate_flow(eta, T, 1e-3, points=pts, samples=100)
    # log det = int_0^T div eta(phi_t x) dt along each trajectory
    div = np.array([eta.div(x) for x in flow.trajectories])
    w = np.full(len(flow.times), T / (len(flow.times) - 1))
    w[[0, -1]] /= 2
    assert np.allclose(np.log(flow.jacobians[-1]), w @ div, atol=1e-5)


def test_unresolved_step_that_folds_the_map_raises():
    eta = BumpField((0.5, 0.5), (3.0, 0.0), 0.2)
    with pytest.raises(FlowError):
        integrate_flow(eta, 1.0, 0.5, points=lattice(n=21))
    # the exact flow is a diffeomorphism; a resolved step keeps det > 0
    assert np.all(integrate_flow(eta, 1.0, 0.005, points=lattice(n=21)).jacobians > 0)


def test_identity_transport():
    flow = integrate_flow(ZeroField(), 1.0, 0.1, points=np.zeros((0, 2)))
    assert np.array_equal(transport_crack(flow, CRACK, 0.5), CRACK)


def test_tip_advance_transport():
    eta = tip_advance_field(CRACK, -1, 0.15, 0.2)
    flow = integrate_flow(eta, 0.1, 1e-3, points=np.zeros((0, 2)), samples=1)
    img = transport_crack(flow, CRACK, 0.1)
    assert np.allclose(img[-1], (0.85, 0.5), atol=1e-10)
    assert point_polyline_distance(img, CRACK[None, 0] + [[0, 0], [1, 0]]).max() < 1e-6


def test_tangency_rejection():
    with pytest.raises(TangencyError):
        check_tangency(ConstantField((0.0, 1.0)), CRACK)
    rot = BumpField((0.5, 0.5), (0.0, 1.0), 0.1)
    with pytest.raises(TangencyError):
        check_tangency(rot, CRACK)
    check_tangency(tip_advance_field(CRACK), CRACK)


def test_monotonicity_tip_advance():
    eta = tip_advance_field(CRACK, -1, 0.05, 0.2)
    flow = integrate_flow(eta, 0.1, 1e-3, points=np.zeros((0, 2)))
    rep = monotonicity_check(flow, CRACK, [0.0, 0.05, 0.1], tol=1e-6)
    assert rep.passed, rep.violations
    rep0 = monotonicity_check(integrate_flow(ZeroField(), 0.1, 1e-2, points=np.zeros((0, 2))),
                              CRACK, [0.0, 0.1])
    assert rep0.passed


def test_monotonicity_rejects_nontangent_field():
    flow = integrate_flow(BumpField((0.5, 0.5), (0.0, 1.0), 0.1), 0.1, 1e-2, points=np.zeros((0, 2)))
    with pytest.raises(TangencyError):
        monotonicity_check(flow, CRACK, [0.0, 0.1])


def test_plateau_field_profile():
    f = PlateauField((0.0, 0.0), (1.0, 0.0), 0.1, 0.2)
    v = f.value(np.array([(0.05, 0.0), (0.15, 0.0), (0.25, 0.0)]))
    assert v[0, 0] == 1.0 and 0 < v[1, 0] < 1 and v[2, 0] == 0.0
    assert f.sup_norm == 1.0
