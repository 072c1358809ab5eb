import numpy as np
import pytest

from crackenergy.benchmarks import CENTER_CRACK, UNIT_SQUARE, edge_crack_mode3, mode3_displacement, uncracked_linear
from crackenergy.equilibrium import (BoundaryDisplacement, InadmissibleStress, StressField, moreau_bound,
                                     residual_norms, solve, solve_equilibrium, total_energy)
from crackenergy.geometry import CrackedDomain, ball_weights, build_mesh
from crackenergy.material import ANTI_PLANE, PLANE_STRAIN, ElasticModel


def test_affine_data_reproduced_exactly(flat32):
    prob, u = flat32
    assert np.allclose(u.values[:, 0], prob.mesh.nodes[:, 0], atol=1e-12)
    assert total_energy(u) == pytest.approx(0.5, rel=1e-12)


def test_plane_strain_affine_data_reproduced():
    model = ElasticModel(PLANE_STRAIN, 1.0, 1.0)
    A = [[0.1, 0.3], [-0.2, 0.05]]
    prob = uncracked_linear(1 / 8, A=A, model=model)
    u = solve(prob, method="direct")
    assert np.allclose(u.values, prob.mesh.nodes @ np.array(A).T, atol=1e-12)


def test_zero_data_gives_zero_field():
    mesh = build_mesh(CrackedDomain(UNIT_SQUARE, CENTER_CRACK), 1 / 16)
    u = solve_equilibrium(mesh, ElasticModel(), BoundaryDisplacement.linear(mesh, [[0.0, 0.0]]))
    assert np.all(u.values == 0.0)
    assert total_energy(u) == 0.0


def test_cg_matches_direct(center64):
    prob, u = center64
    v = solve(prob, method="cg")
    assert np.abs(u.values - v.values).max() < 1e-8 * np.abs(u.values).max()


def _l2_error(prob, u):
    m = prob.mesh
    c = m.centroids
    uh = u.values[m.triangles, 0].mean(axis=1)
    exact = mode3_displacement(c, (0.5, 0.5), (1.0, 0.0))
    return np.sqrt(np.sum(m.areas * (uh - exact) ** 2))


def test_mode3_field_converges(edge64):
    # centroid-rule L2 error; the centroid rule itself is second order
    errs = []
    for h in (1 / 16, 1 / 32):
        prob = edge_crack_mode3(h)
        errs.append(_l2_error(prob, solve(prob, method="direct")))
    errs.append(_l2_error(*edge64))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes >= 0.9), (errs, slopes)


@pytest.mark.parametrize("r", [4 / 64, 0.08, 0.125])
def test_mode3_ball_energy(edge64, r):
    prob, u = edge64
    e = u.energy(ball_weights(prob.mesh, (0.5, 0.5), r))
    assert e == pytest.approx(r / 2, rel=0.03)


def test_residuals_at_equilibrium(edge64):
    _, u = edge64
    res = residual_norms(u)
    assert res["interior_residual"] <= 1e-10
    assert res["crack_traction_residual"] <= 1e-10


def test_residual_detects_perturbation(edge64):
    prob, u = edge64
    v = u.values.copy()
    k = prob.mesh.free_nodes()[len(prob.mesh.free_nodes()) // 2]
    v[k] += 1.0
    assert residual_norms(u.with_values(v))["interior_residual"] > 1e-3


def test_uniform_gradient_residuals_vanish(flat32):
    res = residual_norms(flat32[1])
    assert max(res.values()) <= 1e-12


# ---------------------------------------------------------------- Moreau duality

def test_moreau_equality_at_equilibrium(edge64):
    prob, u = edge64
    r = moreau_bound(StressField.from_displacement(u), prob.u0)
    assert abs(r.relative_gap) <= 1e-9


def test_moreau_zero_stress_gives_zero_bound(edge64):
    prob, u = edge64
    r = moreau_bound(StressField.from_displacement(u).scaled(0.0), prob.u0)
    assert r.lower_bound == 0.0
    assert r.gap == pytest.approx(total_energy(u))


@pytest.mark.parametrize("s", [0.5, 0.9, 1.3])
def test_moreau_scaled_stress_gap_is_quadratic(edge64, s):
    # bound(s sigma) = 2 s E - s^2 E, so gap = (1 - s)^2 E
    prob, u = edge64
    E = total_energy(u)
    r = moreau_bound(StressField.from_displacement(u).scaled(s), prob.u0)
    assert r.gap > 0
    assert abs(r.gap - (1 - s) ** 2 * E) <= 1e-6 * E


def test_moreau_rejects_unbalanced_stress(edge64):
    prob, u = edge64
    rng = np.random.default_rng(1)
    noisy = u.with_values(u.values + 0.1 * rng.normal(size=u.values.shape))
    with pytest.raises(InadmissibleStress):
        moreau_bound(StressField.from_displacement(noisy), prob.u0)
