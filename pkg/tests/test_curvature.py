import dataclasses

import numpy as np
import pytest

from halflight import fixtures
from halflight.curvature import (
    TIERS,
    Residual,
    cartan_pipeline,
    cartan_sum,
    cartan_sum_conformal,
    connection,
    induced_curvature,
    identity_residuals,
    leaf_curvature,
    lemma31_iii_residual,
    lemma32_2_residual,
    prop31_residuals,
    ricci,
    screen_eigenframe,
    theorem41_from_objects,
    theorem41_residual,
)
from halflight.gauss_weingarten import induced_objects

PROP_ITEMS = ("item1_gauss", "item2_codazzi_B", "item3_codazzi_D", "item4_B_AN", "item5_codazzi_AN",
              "item6_D_AN", "item7_codazzi_AL", "item8_B_AL", "item9_D_AL", "item10_codazzi_Astar")


def _curv(name, k=0, route="fd", **kw):
    fx = fixtures.get(name)
    return induced_curvature(fx.spec, fx.point_array[k], route=route, **kw)


def _all_residuals(curv):
    out = {**prop31_residuals(curv), **identity_residuals(curv)}
    return {k: v for k, v in out.items() if isinstance(v, Residual)}


def test_residual_serialization():
    r = Residual(1e-9, 1e-7, "one_fd")
    assert r.passed and r.to_dict() == {"value": 1e-9, "tolerance": 1e-7, "pass": True}
    assert not Residual(1.0, 1e-7, "one_fd").passed


def test_plane_is_flat():
    c = _curv("plane")
    assert np.max(np.abs(c.obj.Gamma)) < 1e-12
    assert np.max(np.abs(c.Rm)) < 1e-9
    Ric, _ = ricci(c)
    assert np.max(np.abs(Ric)) < 1e-9
    for key, r in _all_residuals(c).items():
        assert r.value < 1e-9, key


def test_connection_reconstructs_second_derivatives():
    fx = fixtures.get("example1")
    pts = fixtures.sample_points(fx.spec, 20, seed=3)
    for u in pts:
        con = connection(induced_objects(fx.spec, u))
        assert con.reconstruction_residual < 1e-10
        np.testing.assert_allclose(con.Gamma, np.swapaxes(con.Gamma, 0, 1), atol=1e-12)


def test_curvature_is_antisymmetric():
    c = _curv("ruled")
    np.testing.assert_allclose(c.Rm, -np.swapaxes(c.Rm, 0, 1), atol=1e-12)
    np.testing.assert_allclose(c.two_dtau, -c.two_dtau.T, atol=1e-15)


@pytest.mark.parametrize("route", ["fd", "jet"])
@pytest.mark.parametrize("name", fixtures.list_fixtures())
def test_all_identities_hold_on_fixtures(name, route):
    fx = fixtures.get(name)
    for u in fx.point_array[:3]:
        c = induced_curvature(fx.spec, u, route=route)
        res = _all_residuals(c)
        assert set(PROP_ITEMS) <= set(res)
        for key, r in res.items():
            assert r.passed, (key, r.value, r.tolerance)


def test_tiers_assigned_by_number_of_derivatives():
    res = prop31_residuals(_curv("example1"))
    assert res["item1_gauss"].tier == "one_fd" and res["item1_gauss"].tolerance == TIERS["one_fd"]
    assert res["item2_codazzi_B"].tier == "two_fd"
    assert res["item9_D_AL"].tier == "one_fd"


def test_example1_ricci_symmetric():
    fx = fixtures.get("example1")
    for u in fx.point_array[:3]:
        Ric, _ = ricci(induced_curvature(fx.spec, u))
        assert np.max(np.abs(Ric - Ric.T)) < 1e-5


def test_ricci_antisymmetry_equals_dtau_when_tau_not_closed():
    c = _curv("example1_twisted")
    ids = identity_residuals(c)
    assert ids["two_dtau_max"] > 1e-2  # the 1-form tau is genuinely not closed here
    Ric, r = ricci(c)
    assert np.max(np.abs(Ric - Ric.T)) > 1e-2
    assert r.value < 1e-5
    assert prop31_residuals(c)["item10_dtau_term"] > 1e-2


def test_example1_item4_reduces_to_symmetry():
    c = _curv("example1")
    o = c.obj
    BA = o.B @ o.AN
    assert np.max(np.abs(BA - BA.T)) < 1e-6
    assert prop31_residuals(c)["item4_B_AN"].value < 1e-6


@pytest.mark.parametrize("name", ["example1", "ruled"])
def test_richardson_convergence_of_gauss_equation(name):
    fx = fixtures.get(name)
    u = fx.point_array[0]
    Hs = (0.04, 0.02, 0.01)
    for richardson, order in ((False, 2), (True, 4)):
        vals = [prop31_residuals(induced_curvature(fx.spec, u, H=H * np.ones(fx.spec.m),
                                                   richardson=richardson))["item1_gauss"].value for H in Hs]
        rates = [np.log2(vals[i] / vals[i + 1]) for i in range(len(vals) - 1)]
        assert min(rates) > order - 0.2, rates


def test_unsupported_ambient_curvature():
    spec = fixtures.get("plane").spec
    with pytest.raises(ValueError, match="k = 0"):
        induced_curvature(dataclasses.replace(spec, k=1.0), [0.1, 0.1])


def test_random_immersions_satisfy_all_identities():
    rng = np.random.default_rng(31)
    worst = {}
    for n in range(200):
        spec = fixtures.random_spec(rng)
        u = fixtures.sample_points(spec, 1, seed=n)[0]
        route = "fd" if n < 30 else "jet"
        for key, r in _all_residuals(induced_curvature(spec, u, route=route)).items():
            worst[key] = max(worst.get(key, 0.0), r.value / r.tolerance)
    assert max(worst.values()) < 1.0, worst


# -- Cartan sums ---------------------------------------------------------------------

def test_cartan_empty_sum():
    np.testing.assert_array_equal(cartan_sum([0.3, 0.3, 0.3], [1, 2, 3], np.eye(3), k=2.0), 0.0)


def test_cartan_hand_input_zero_numerator():
    np.testing.assert_array_equal(cartan_sum([2.0, 1.0], [0.0, 0.0], np.zeros((2, 2))), [0.0, 0.0])


def test_cartan_hand_input_arithmetic():
    AL = np.array([[1.0, 0.5], [0.5, 2.0]])
    S = cartan_sum([1.0, -1.0], [1.0, 2.0], AL, k=0.3)
    np.testing.assert_allclose(S, [1.525, -1.525], rtol=1e-15)


def test_cartan_conformal_variant():
    np.testing.assert_allclose(cartan_sum_conformal([1.0, -1.0], 0.5, sigma=1.0), [0.0, 0.0], atol=1e-15)
    S = cartan_sum_conformal([1.0, 0.0], 0.5, k=-1.0)
    np.testing.assert_allclose(S, [-1.0, 1.0])


@pytest.mark.parametrize("name", ["example1", "example2", "cone_product"])
def test_cartan_sum_vanishes_on_fixtures(name):
    fx = fixtures.get(name)
    for u in fx.point_array:
        out = cartan_pipeline(induced_objects(fx.spec, u), phi=0.5)
        assert np.max(np.abs(out["S"])) < 1e-5
        assert np.max(np.abs(out["S_conformal"])) < 1e-5


# -- the conformal-co-screen identity ------------------------------------------------------

def test_theorem41_hand_inputs():
    g = np.eye(2)
    assert theorem41_residual(1.0, 1.0, g, g, 1.0, k=0.0) == pytest.approx(3 * np.linalg.norm(g))
    assert theorem41_residual(0.7, 0.0, np.diag([3.0, -1.0]), g, 2.0, k=-4.0) == 0.0


def test_theorem41_example2():
    fx = fixtures.get("example2")
    for u in fx.point_array:
        assert theorem41_from_objects(induced_objects(fx.spec, u), 0.5, 0.0) < 1e-8


# -- leaves and lemmas -------------------------------------------------------------------

def test_leaf_curvature_cone_product():
    fx = fixtures.get("cone_product")
    for u in fx.point_array[:4]:
        c = induced_curvature(fx.spec, u)
        lam, S = screen_eigenframe(c.obj)
        idx = np.flatnonzero(np.abs(lam) > 1e-6)
        assert len(idx) == 2
        lam_nz = lam[idx[0]]
        assert leaf_curvature(c, S[:, idx[0]], S[:, idx[1]]) == pytest.approx(2 * 0.5 * lam_nz**2, abs=1e-4)


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
def test_lemma31_iii_symmetry(name):
    fx = fixtures.get(name)
    for u in fx.point_array[:3]:
        assert lemma31_iii_residual(induced_curvature(fx.spec, u)) < 1e-5


@pytest.mark.parametrize("name", ["example1", "example2", "cone_product"])
def test_lemma32_2_eigenspace_orthogonality(name):
    fx = fixtures.get(name)
    for u in fx.point_array[:3]:
        c = induced_curvature(fx.spec, u)
        lam = -1.0 / u[0]
        assert lemma32_2_residual(c, lam, 0.0) < 1e-5
        assert lemma32_2_residual(c, 0.0, lam) < 1e-5
