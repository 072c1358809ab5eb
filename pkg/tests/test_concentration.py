import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackenergy.concentration import (BALL_POWERS, TUBE_POWERS, ConcentrationError, c2_point,
                                       cantor_part_atoms, cm_plus, fit_concentration, radius_schedule)
from crackenergy.geometry import Disc, WholeBody

TIP = (0.5, 0.5)


# ---------------------------------------------------------------- fits

@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(-3, 3), st.floats(-10, 10))
def test_ball_fit_recovers_polynomial(a, b, d):
    r = 0.1 * 0.5 ** np.arange(4)
    e = a * r + b * r**2 + d * r**4
    assert fit_concentration(r, e, BALL_POWERS)[0] == pytest.approx(a, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(-3, 3), st.floats(-10, 10))
def test_tube_fit_recovers_polynomial(a, b, c):
    r = 0.1 * 0.5 ** np.arange(3)
    e = a * r + b * r**2 + c * r**3
    assert fit_concentration(r, e, TUBE_POWERS)[0] == pytest.approx(a, abs=1e-9)


def test_fit_needs_two_radii():
    with pytest.raises(ConcentrationError):
        fit_concentration([0.1], [0.05])


def test_radius_schedule_respects_floor(edge128):
    _, u = edge128
    r = radius_schedule(u.mesh, TIP)
    assert np.all(r >= 4 * u.mesh.mesh_size_h - 1e-15)
    assert np.allclose(r[1:] / r[:-1], 0.5)


def test_radius_schedule_too_coarse(edge64):
    _, u = edge64
    with pytest.raises(ConcentrationError):
        radius_schedule(u.mesh, TIP)


# ---------------------------------------------------------------- point coefficients

def test_tip_coefficient_both_conventions(edge64):
    _, u = edge64
    tub = c2_point(u, TIP)
    assert tub.extrapolated == pytest.approx(0.5, rel=0.05)
    nrm = c2_point(u, TIP, normalized=True)
    assert nrm.extrapolated == pytest.approx(0.5 / np.pi, rel=0.05)
    assert nrm.extrapolated == pytest.approx(tub.extrapolated / np.pi, rel=1e-12)


def test_uniform_gradient_point_is_zero(flat32):
    _, u = flat32
    assert abs(c2_point(u, (0.5, 0.5)).extrapolated) <= 1e-3


def test_face_point_is_zero(edge128):
    _, u = edge128
    e = c2_point(u, (0.25, 0.5))
    # raw ratios decay like r, the fitted limit is near zero
    assert np.all(np.diff(e.ratios) < 0)
    assert abs(e.extrapolated) <= 1e-3


@pytest.mark.parametrize("x", [(0.25, 0.3), (0.75, 0.75)])
def test_interior_probes_localize(edge64, x):
    _, u = edge64
    assert abs(c2_point(u, x).extrapolated) <= 1e-3 * 0.5


def test_radius_outside_body_rejected(edge64):
    _, u = edge64
    with pytest.raises(ConcentrationError):
        c2_point(u, (0.9, 0.9), radii=[0.2, 0.1])


# ---------------------------------------------------------------- tubular measure

def test_cm_plus_uncracked_is_zero(flat32):
    _, u = flat32
    cm = cm_plus(u, WholeBody(u.mesh.domain))
    assert cm.extrapolated == 0.0


def test_cm_plus_tip_part(edge64):
    _, u = edge64
    cm = cm_plus(u, Disc(TIP, 0.2))
    assert cm.tip_part == pytest.approx(0.5, rel=0.05)
    assert cm.details["tip_check"] == pytest.approx(0.5, rel=0.05)
    assert cm.decomposition_error < 1e-3


def test_cm_plus_face_part_matches_strip_integral(edge128):
    # both faces carry w = 1/(4 pi rho): 2 int_{0.15}^{0.35} w d rho
    _, u = edge128
    oracle = np.log(0.35 / 0.15) / (2 * np.pi)
    cm = cm_plus(u, Disc((0.25, 0.5), 0.1))
    assert cm.tip_part <= 0.05 * cm.extrapolated
    assert cm.jump_part == pytest.approx(oracle, rel=0.03)
    q = cm.jump_ratios
    assert (q.max() - q.min()) <= 0.10 * q.mean()


# ---------------------------------------------------------------- atoms

def test_zero_field_atoms(edge64):
    _, u = edge64
    atoms = cantor_part_atoms(u.scaled(0.0))
    assert all(a.tubular == 0.0 and a.normalized == 0.0 for a in atoms)


def test_single_tip_atom(edge64):
    _, u = edge64
    (atom,) = cantor_part_atoms(u)
    assert atom.value() == pytest.approx(0.5, rel=0.05)
    assert atom.value("normalized") == pytest.approx(0.5 / np.pi, rel=0.05)


def test_two_tip_atoms_symmetric(center64):
    _, u = center64
    a, b = cantor_part_atoms(u)
    assert a.tubular > 0 and b.tubular > 0
    assert a.tubular == pytest.approx(b.tubular, rel=0.05)
