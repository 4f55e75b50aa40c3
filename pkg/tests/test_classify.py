import math

import numpy as np
import pytest

from halflight import fixtures
from halflight.classify import (
    TOL_CONSTANT,
    classify,
    fit_coscreen_conformal,
    fit_screen_conformal,
    principal_curvatures,
    two_eigenvalue_check,
    two_eigenvalue_verdict,
    umbilicity,
)
from halflight.gauss_weingarten import induced_objects

U1 = np.array([2.0, 1.0, 1.0])
U3 = np.array([2.0, 1.0, 0.3, 0.7])


def _report(name, n=None, route="jet"):
    fx = fixtures.get(name)
    pts = fx.point_array if n is None else fx.point_array[:n]
    return classify(fx.spec, pts, route=route)


# -- principal curvatures ----------------------------------------------------------------

def test_principal_curvatures_example1():
    o = induced_objects(fixtures.get("example1").spec, U1)
    pc = principal_curvatures(o.Astar_screen)
    np.testing.assert_allclose(pc.values, [0.0, -0.5], atol=1e-9)
    assert pc.multiplicities == (1, 1)


def test_principal_curvatures_example3_multiplicity():
    o = induced_objects(fixtures.get("example3").spec, U3)
    pc = principal_curvatures(o.Astar_screen)
    np.testing.assert_allclose(pc.values, [0.0, -0.5, -0.5], atol=1e-9)
    assert pc.multiplicities == (1, 2)
    assert pc.classes[1][0] == pytest.approx(-0.5, abs=1e-9)


def test_principal_curvatures_zero_matrix():
    pc = principal_curvatures(np.zeros((3, 3)))
    assert pc.classes == [(0.0, 3)]


def test_principal_curvatures_descending_and_orthonormal():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(4, 4))
    pc = principal_curvatures(M + M.T)
    assert np.all(np.diff(pc.values) <= 0)
    np.testing.assert_allclose(pc.vectors.T @ pc.vectors, np.eye(4), atol=1e-12)


# -- fits ---------------------------------------------------------------------------------

def test_screen_conformal_fit_exact_multiple():
    B = np.array([[1.0, 2.0], [0.5, -1.0]])
    fit = fit_screen_conformal(B, B)
    assert fit.phi == 1.0 and fit.residual == 0.0 and fit.verdict == "conformal"


def test_screen_conformal_fit_degenerate():
    fit = fit_screen_conformal(np.zeros((2, 2)), np.eye(2))
    assert fit.verdict == "degenerate fit" and math.isnan(fit.phi)


def test_screen_conformal_fit_rejects_non_multiple():
    fit = fit_screen_conformal(np.diag([1.0, 1.0]), np.diag([1.0, -1.0]))
    assert fit.verdict == "not conformal"


def test_screen_conformal_fit_inconclusive_band():
    fit = fit_screen_conformal(np.diag([1.0, 1.0]), np.diag([1.0, 1.0 + 1e-4]))
    assert fit.verdict == "inconclusive"


def test_coscreen_fit_examples():
    g = np.eye(3)
    fit = fit_coscreen_conformal(-2.0 * g, g)
    assert fit.sigma == pytest.approx(2.0) and fit.residual < 1e-15 and fit.verdict == "conformal" and not fit.killing
    fit = fit_coscreen_conformal(np.zeros((3, 3)), g)
    assert fit.killing and fit.sigma == 0.0
    fit = fit_coscreen_conformal(-g, g, eta=np.array([1.0, 0, 0]), rho=np.array([-1.0, 0, 0]))
    assert fit.closed_conformal and fit.closed_residual < 1e-15
    assert fit_coscreen_conformal(np.diag([1.0, 0.0, 0.0]), g).verdict == "not conformal"


def test_umbilicity_examples():
    g = np.diag([0.0, 1.0, 1.0])
    um = umbilicity(3.0 * g, np.zeros((3, 3)), g)
    assert um.H1 == pytest.approx(3.0) and um.B_umbilical and um.D_umbilical and um.totally_umbilical
    assert not um.totally_geodesic
    um = umbilicity(np.zeros((3, 3)), np.zeros((3, 3)), g)
    assert um.totally_geodesic


# -- the two-eigenvalue theorem ----------------------------------------------------------

def _check(classes, **kw):
    args = dict(constancy_residual=0.0, screen_homothetic=True, coscreen_conformal=True)
    args.update(kw)
    return two_eigenvalue_check(classes, **args)


def test_two_eigenvalue_synthetic_violation():
    te = _check([(2.0, 1), (1.0, 2)])
    assert te.applicable and te.holds is False
    assert te.verdict == "violated: both principal curvatures nonzero"
    assert te.min_abs_lambda == 1.0


def test_two_eigenvalue_synthetic_holds():
    te = _check([(0.0, 1), (-0.5, 2)])
    assert te.holds and te.r == 2


@pytest.mark.parametrize("kw, fragment", [
    (dict(screen_homothetic=False), "not screen homothetic"),
    (dict(coscreen_conformal=False), "co-screen not conformal"),
    (dict(constancy_residual=1.0), "not constant"),
    (dict(k=1.0), "k > 0"),
])
def test_two_eigenvalue_hypotheses(kw, fragment):
    te = _check([(2.0, 1), (1.0, 1)], **kw)
    assert not te.applicable and fragment in te.verdict


def test_two_eigenvalue_needs_exactly_two_classes():
    te = _check([(2.0, 1), (1.0, 1), (0.0, 1)])
    assert te.verdict == "not applicable: 3 distinct screen principal curvatures"


def test_two_eigenvalue_negative_k_is_allowed():
    assert _check([(0.0, 1), (-1.0, 1)], k=-1.0).holds


# -- classification of the fixtures --------------------------------------------------------

@pytest.fixture(scope="module")
def reports():
    return {name: _report(name, 4) for name in fixtures.list_fixtures()}


def test_example1_flags(reports):
    r = reports["example1"]
    f = r.flags
    assert f["irrotational"].value and f["screen_conformal"].value and f["screen_homothetic"].value
    assert r.phi == pytest.approx(0.5, abs=1e-8)
    assert f["coscreen_conformal"].value is False
    assert r.two_eigenvalue.verdict == "not applicable: co-screen not conformal"
    assert two_eigenvalue_verdict(r).verdict == r.two_eigenvalue.verdict


def test_example2_flags(reports):
    r = reports["example2"]
    assert r.flags["coscreen_killing"].value and r.sigma == pytest.approx(0.0, abs=1e-8)
    assert r.flags["screen_homothetic"].value
    assert r.two_eigenvalue.holds and r.two_eigenvalue.r == 1
    assert r.branch == "lightlike triple product"


def test_example3_flags(reports):
    r = reports["example3"]
    assert r.flags["screen_homothetic"].value is False
    assert r.flags["coscreen_conformal"].value is False
    assert r.two_eigenvalue.verdict == "not applicable: not screen homothetic"
    assert r.flags["screen_conformal"].witness is not None


def test_plane_and_cone_flags(reports):
    assert reports["plane"].flags["totally_geodesic"].value
    assert reports["plane"].branch == "totally geodesic"
    assert reports["null_cone"].flags["totally_umbilical"].value
    cp = reports["cone_product"]
    assert cp.triple_product["detected"] and cp.triple_product["r"] == 2
    assert cp.triple_product["leaf_curvature_residual"] < 1e-4


def test_eigenvalues_constant_along_screen(reports):
    for name in ("example1", "example2", "example3", "cone_product"):
        assert reports[name].principal["constancy_residual"] < TOL_CONSTANT, name
    assert reports["example3"].principal["multiplicities"] == [1, 2]


def test_report_residuals_pass_on_fixtures(reports):
    for name, r in reports.items():
        failed = {k: v.value for k, v in r.residuals.items() if not v.passed}
        assert not failed, (name, failed)


def test_report_to_dict_is_plain(reports):
    import json
    d = reports["example1"].to_dict()
    assert json.loads(json.dumps(d))["phi"] == pytest.approx(0.5, abs=1e-8)
    assert d["flags"]["irrotational"]["value"] is True


def _check_implications(r):
    f = r.flags
    if f["totally_geodesic"].value:
        assert f["totally_umbilical"].value
    if f["totally_umbilical"].value:
        assert f["B_umbilical"].value and f["D_umbilical"].value
    if f["screen_homothetic"].value:
        assert f["screen_conformal"].value
    if f["coscreen_killing"].value:
        assert f["coscreen_conformal"].value
    if f["coscreen_closed_conformal"].value:
        assert f["coscreen_conformal"].value
    if f["triple_product"].value:
        assert r.two_eigenvalue.holds


def test_flag_implications_on_fixtures(reports):
    for r in reports.values():
        _check_implications(r)


def test_flag_implications_on_random_specs():
    rng = np.random.default_rng(77)
    for n in range(200):
        spec = fixtures.random_spec(rng)
        r = classify(spec, fixtures.sample_points(spec, 1, seed=n))
        _check_implications(r)
        assert r.flags["half_lightlike"].value


def test_classify_rejects_curved_ambient():
    import dataclasses
    spec = dataclasses.replace(fixtures.get("plane").spec, k=1.0)
    with pytest.raises(ValueError, match="k = 0"):
        classify(spec, [[0.1, 0.1]])


def test_errors_carry_the_point():
    fx = fixtures.get("example1")
    with pytest.raises(Exception) as ei:
        classify(fx.spec, [[1.0, 1.0, 0.0]])
    assert "[1.0, 1.0, 0.0]" in str(ei.value)


# -- gauge robustness --------------------------------------------------------------------

@pytest.mark.parametrize("alpha", ["2", "x1"])
def test_flags_survive_rescaling_the_radical(alpha):
    fx = fixtures.get("example1")
    pts = fx.point_array[:4]
    base = classify(fx.spec, pts)
    star = classify(fx.spec.rescaled(alpha), pts)
    for key in ("irrotational", "screen_conformal", "coscreen_conformal", "B_umbilical", "D_umbilical",
                "totally_geodesic"):
        assert star.flags[key].value == base.flags[key].value, key
    for u, a, b in zip(pts, base.per_point, star.per_point):
        scale = 2.0 if alpha == "2" else u[0]
        np.testing.assert_allclose(b["lambdas"], scale * np.array(a["lambdas"]), atol=1e-9)
    if alpha == "2":
        # constant rescaling keeps homothety; the factor changes as phi / alpha^2
        assert star.flags["screen_homothetic"].value
        assert star.phi == pytest.approx(0.125, abs=1e-8)
        assert star.two_eigenvalue.verdict == base.two_eigenvalue.verdict
