import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackenergy.benchmarks import UNIT_SQUARE
from crackenergy.geometry import (CrackedDomain, Disc, GeometryError, Rect, WholeBody, ball_weights,
                                  build_mesh, disc_triangle_area, length_variation, perimeter_measure,
                                  polyline_length, tangential_divergence, tube_weights)
from crackenergy.velocity import AffineField, ConstantField, PlateauField, tip_advance_field


# ---------------------------------------------------------------- meshing

def test_uncracked_mesh_has_no_seam():
    m = build_mesh(CrackedDomain(UNIT_SQUARE), 0.25)
    assert len(m.seam_pairs) == 0
    assert m.n_triangles >= 16
    assert np.isclose(m.areas.sum(), 1.0)


def test_edge_crack_has_seam_and_one_tip():
    m = build_mesh(CrackedDomain(UNIT_SQUARE, [(0, 0.5), (0.5, 0.5)]), 0.1)
    assert len(m.seam_pairs) > 0
    assert len(m.tip_nodes) == 1
    assert np.allclose(m.nodes[m.tip_nodes[0]], (0.5, 0.5))
    # duplicated nodes coincide in space and lie on the crack segment
    a, b = m.nodes[m.seam_pairs[:, 0]], m.nodes[m.seam_pairs[:, 1]]
    assert np.allclose(a, b)
    assert np.allclose(a[:, 1], 0.5) and np.all(a[:, 0] < 0.5)


def test_interior_crack_seam_strictly_between_tips():
    m = build_mesh(CrackedDomain(UNIT_SQUARE, [(0.25, 0.5), (0.75, 0.5)]), 0.05)
    assert len(m.tip_nodes) == 2
    x = m.nodes[m.seam_pairs[:, 0], 0]
    assert np.all((x > 0.25) & (x < 0.75))
    m.check()


def test_crack_leaving_body_rejected():
    with pytest.raises(GeometryError):
        CrackedDomain(UNIT_SQUARE, [(0.5, 0.5), (1.5, 0.5)])


def test_self_intersecting_crack_rejected():
    with pytest.raises(GeometryError):
        CrackedDomain(UNIT_SQUARE, [(0.2, 0.2), (0.8, 0.8), (0.8, 0.2), (0.2, 0.8)])


# ---------------------------------------------------------------- tangential divergence

CRACK = np.array([(0.25, 0.5), (0.75, 0.5)])


def test_divs_of_constant_field_is_zero():
    v = tangential_divergence(ConstantField((0.3, -1.0)), CRACK, s=np.linspace(0, 0.5, 7))
    assert np.allclose(v, 0.0)


def test_divs_of_identity_is_one():
    v = tangential_divergence(AffineField(np.eye(2)), CRACK, s=np.linspace(0, 0.5, 7))
    assert np.allclose(v, 1.0)


def test_divs_of_shear_along_crack_is_zero():
    eta = AffineField([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(tangential_divergence(eta, CRACK, point=[(0.4, 0.5), (0.6, 0.5)]), 0.0)


def test_divs_point_off_crack_rejected():
    with pytest.raises(GeometryError):
        tangential_divergence(ConstantField((1, 0)), CRACK, point=[(0.4, 0.6)])


@settings(max_examples=25, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(0.1, 2.0))
def test_divs_of_identity_is_one_on_any_segment(angle, length):
    d = np.array([np.cos(angle), np.sin(angle)])
    crack = np.array([(0.0, 0.0), tuple(length * d)])
    v = tangential_divergence(AffineField(np.eye(2)), crack, s=np.linspace(0, length, 5))
    assert np.allclose(v, 1.0)


# ---------------------------------------------------------------- length variation

def test_length_variation_of_translation_is_zero():
    assert abs(length_variation(CRACK, ConstantField((1.0, 0.0)))) < 1e-14


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0))
def test_length_variation_of_identity_is_length(L):
    crack = np.array([(0.0, 0.0), (L, 0.0), (L, L)])
    assert np.isclose(length_variation(crack, AffineField(np.eye(2))), polyline_length(crack))


def _flowed_length(crack, eta, t, dt):
    from crackenergy.flow import integrate_flow

    flow = integrate_flow(eta, abs(t), dt, points=np.zeros((0, 2)), samples=1)
    return polyline_length(flow.map(crack, t))


def test_length_variation_matches_flowed_length_fd():
    eta = tip_advance_field(CRACK, -1, 0.05, 0.1)
    exact = length_variation(CRACK, eta)
    assert np.isclose(exact, 1.0)
    for dt in (1e-2, 1e-3):
        fd = (_flowed_length(CRACK, eta, dt, dt / 4) - _flowed_length(CRACK, eta, -dt, dt / 4)) / (2 * dt)
        assert abs(fd - exact) < 1e-6


# ---------------------------------------------------------------- perimeter measure

def test_perimeter_measure_counts():
    dom = CrackedDomain(UNIT_SQUARE, CRACK)
    tips = dom.tips
    whole = perimeter_measure(CRACK, tips, Rect((0.1, 0.3), (0.9, 0.7)), dom)
    one = perimeter_measure(CRACK, tips, Disc((0.75, 0.5), 0.05), dom)
    none = perimeter_measure(CRACK, tips, Disc((0.5, 0.5), 0.1), dom)
    assert (whole.analytic, one.analytic, none.analytic) == (2, 1, 0)
    assert np.isclose(whole.numeric, 2.0) and np.isclose(one.numeric, 1.0) and none.numeric == 0.0


# ---------------------------------------------------------------- weights

@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.01, 0.6))
def test_disc_triangle_area_sums_to_clipped_disc(cx, cy, r):
    # two triangles tiling the unit square; disc fully inside gives pi r^2
    tris = np.array([[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]], dtype=float)
    a = disc_triangle_area((cx, cy), r, tris)
    assert np.all(a >= -1e-14) and np.all(a <= 0.5 + 1e-14)
    if min(cx, cy, 1 - cx, 1 - cy) >= r:
        assert np.isclose(a.sum(), np.pi * r * r, rtol=1e-10)


def test_ball_weights_area():
    m = build_mesh(CrackedDomain(UNIT_SQUARE), 1 / 16)
    w = ball_weights(m, (0.5, 0.5), 0.2)
    assert np.isclose(np.sum(w * m.areas), np.pi * 0.04, rtol=1e-10)


def test_tube_weights_area_of_interior_segment():
    m = build_mesh(CrackedDomain(UNIT_SQUARE), 1 / 32)
    r = 0.05
    w = tube_weights(m, CRACK, r, nsub=16)
    exact = 2 * r * 0.5 + np.pi * r * r
    assert abs(np.sum(w * m.areas) - exact) < 2e-3 * exact


def test_regions():
    dom = CrackedDomain(UNIT_SQUARE, CRACK)
    assert WholeBody(dom).contains([(0.5, 0.2)])[0]
    assert Disc((0.5, 0.5), 0.1).clearance([(0.5, 0.5)])[0] == pytest.approx(0.1)
    assert not Rect((0, 0), (0.4, 0.4)).contains([(0.5, 0.5)])[0]
