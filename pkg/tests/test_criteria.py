import json

import numpy as np
import pytest

from crackenergy.concentration import NORMALIZED, TUBULAR
from crackenergy.criteria import (GriffithConfig, decide, digest, griffith_classical, griffith_generalized,
                                  irwin_check, minimaxi_report, theorem61_check)
from crackenergy.flow import integrate_flow
from crackenergy.geometry import Disc, WholeBody
from crackenergy.velocity import PlateauField, ZeroField, tip_advance_field

TIP = (0.5, 0.5)


def test_griffith_config_rejects_negative():
    with pytest.raises(ValueError):
        GriffithConfig(-1.0)


def test_decide_relations():
    assert decide(1.0, 1.05, 0.1, ">=")
    assert not decide(1.0, 1.2, 0.1, ">=")
    assert decide(1.05, 1.0, 0.1, "<=")


def test_digest_is_stable(edge64):
    _, u = edge64
    assert digest(u, 0.3) == digest(u, 0.3)
    assert digest(u, 0.3) != digest(u, 0.4)


# ---------------------------------------------------------------- classical Griffith

@pytest.fixture(scope="module")
def tip_flow(edge64):
    prob, _ = edge64
    eta = tip_advance_field(prob.mesh.crack_polyline(), -1, 0.1, 0.2)
    return integrate_flow(eta, 0.01, 2.5e-4, points=np.zeros((0, 2)), samples=1)


def test_classical_zero_toughness(edge64, tip_flow):
    prob, _ = edge64
    (r,) = griffith_classical(prob, tip_flow, 0.0, [0.0], 2e-3)
    assert r.satisfied and r.lhs == pytest.approx(0.5, rel=0.03)
    assert r.details["length_rate"] == pytest.approx(1.0)


def test_classical_threshold(edge64, tip_flow):
    prob, _ = edge64
    (r,) = griffith_classical(prob, tip_flow, 0.6, [0.0], 2e-3)
    assert not r.satisfied


def test_classical_stationary(edge64):
    prob, _ = edge64
    flow = integrate_flow(ZeroField(), 0.01, 1e-3, points=np.zeros((0, 2)), samples=1)
    (r,) = griffith_classical(prob, flow, 5.0, [0.0], 1e-3)
    assert r.satisfied and r.rhs == 0.0 and abs(r.lhs) <= 1e-8


# ---------------------------------------------------------------- generalized Griffith

@pytest.mark.parametrize("G,ok", [(0.4, True), (0.6, False)])
def test_generalized_threshold(edge64, G, ok):
    _, u = edge64
    eta = PlateauField(TIP, (1.0, 0.0), 0.1, 0.2)
    r = griffith_generalized(u, eta, G)
    assert r.details["perimeter"] == 1 and r.details["sup_norm"] == 1.0
    assert r.satisfied is ok


def test_generalized_tip_free(edge64):
    _, u = edge64
    r = griffith_generalized(u, PlateauField((0.75, 0.25), (1.0, 0.0), 0.05, 0.15), 1.0)
    assert r.rhs == 0.0 and abs(r.lhs) <= r.tol and r.satisfied


# ---------------------------------------------------------------- Irwin

def test_irwin_zero_toughness(edge64):
    assert irwin_check(edge64[1], 0.0).satisfied


def test_irwin_conventions_disagree_between_atoms(edge64):
    _, u = edge64
    G = 0.3  # between 0.5/pi and 0.5
    r = irwin_check(u, G, convention=NORMALIZED)
    assert r.details["satisfied_by_convention"] == {TUBULAR: True, NORMALIZED: False}
    assert not r.satisfied
    assert irwin_check(u, G).satisfied


def test_irwin_interior_point_violates(edge64):
    _, u = edge64
    r = irwin_check(u, 0.05, tips=[(0.75, 0.75)])
    assert r.lhs == pytest.approx(0.0, abs=1e-3)
    assert r.rhs > r.tol and not r.satisfied


# ---------------------------------------------------------------- |K2| vs tip atoms

def test_k2_bounded_by_concentration_forward(edge64):
    _, u = edge64
    regions = [Disc(TIP, 0.2), Disc((0.75, 0.25), 0.15), WholeBody(u.mesh.domain)]
    reps = theorem61_check(u, regions)
    assert all(r.satisfied for r in reps)
    assert reps[0].lhs == pytest.approx(reps[0].rhs, rel=0.05)
    assert reps[1].rhs == 0.0 and reps[1].lhs <= reps[1].tol


def test_k2_bounded_by_concentration_two_tips(center64):
    _, u = center64
    reps = theorem61_check(u, [Disc((0.25, 0.5), 0.2), Disc((0.75, 0.5), 0.2), WholeBody(u.mesh.domain)])
    assert all(r.satisfied for r in reps)


def test_concentration_free_k2_flagged_on_noise(edge64):
    _, u = edge64
    rng = np.random.default_rng(7)
    noisy = u.with_values(u.values + 0.1 * np.abs(u.values).max() * rng.normal(size=u.values.shape))
    (free,) = theorem61_check(noisy, [Disc((0.75, 0.25), 0.15)], scale=0.5)
    assert not free.details["equilibrium"]
    assert not free.details["inequality"]
    assert not free.satisfied


def test_report_is_json_serializable(edge64):
    _, u = edge64
    (r,) = theorem61_check(u, [Disc(TIP, 0.2)])
    d = json.loads(json.dumps(r.to_dict()))
    assert d["criterion"] == "theorem61" and d["relation"] == "<="


# ---------------------------------------------------------------- min-max chain

def test_minimaxi_zero_data(edge64):
    prob, _ = edge64
    from crackenergy.equilibrium import EquilibriumProblem

    zero = EquilibriumProblem(prob.mesh, prob.model, prob.u0.scaled(0.0))
    r = minimaxi_report(zero)
    d = r.details
    assert abs(d["k2_measure"]) < 1e-12 and abs(d["sup_release_rate"]) < 1e-8 and d["cantor_total"] == 0.0
    assert r.satisfied


def test_minimaxi_two_tips_sum():
    from crackenergy.benchmarks import center_crack_shear

    prob, coarse = center_crack_shear(1 / 128), center_crack_shear(1 / 64)
    r = minimaxi_report(prob, coarse=coarse)
    d = r.details
    per_tip = sum(a["tubular"] for a in d["atoms"])
    assert r.satisfied
    assert d["cantor_total"] == pytest.approx(per_tip)
    assert d["k2_measure"] == pytest.approx(per_tip, rel=0.05)
    assert d["sup_release_rate"] == pytest.approx(per_tip, rel=0.05)
