import dataclasses
import math

import numpy as np
import pytest

from halflight import expr as E
from halflight import fixtures
from halflight.framing import (
    ChartDomainError,
    ImmersionSpec,
    NotHalfLightlike,
    OverrideError,
    SingularImmersion,
    build_frame,
    frame_field_derivatives,
    frame_invariants,
    immersion_jet,
    null_transversal,
)
from halflight.gauss_weingarten import gauge_rescale
from halflight.semi_euclidean import inner

S3 = math.sqrt(3.0)
U1 = np.array([2.0, 1.0, 1.0])


@pytest.fixture(scope="module")
def ex1():
    return fixtures.get("example1").spec


def _strip(spec):
    return dataclasses.replace(spec, radical_expr=None, screen_exprs=None, coscreen_expr=None)


def test_immersion_jet_example1_values(ex1):
    fj = immersion_jet(ex1, U1)
    np.testing.assert_allclose(fj.v, [2, 1, 1, S3, math.sqrt(2)], atol=1e-15)


def test_constant_component_has_zero_derivatives():
    spec = ImmersionSpec.from_strings(["v1", "v1", "v2", "1"], [(-1, 1), (-1, 1)])
    fj = immersion_jet(spec, [0.2, 0.3])
    assert fj.v[3] == 1.0
    assert not np.any(fj.d1[:, 3]) and not np.any(fj.d2[:, :, 3]) and not np.any(fj.d3[..., 3])


def test_example1_boundary_point_is_a_domain_error(ex1):
    with pytest.raises(E.ExprDomainError):
        immersion_jet(ex1, [1.0, 1.0, 0.0])
    with pytest.raises(ChartDomainError):
        build_frame(ex1, [1.0, 1.0, 0.0], check_domain=False)
    with pytest.raises(ChartDomainError):
        build_frame(ex1, [1.0, 1.0, 0.0])


def test_example1_frame_values(ex1):
    fp = build_frame(ex1, U1)
    np.testing.assert_allclose(fp.xi, [1, 0.5, 0, S3 / 2, 0], atol=1e-14)
    np.testing.assert_allclose(fp.N, [-0.5, 0.25, 0, S3 / 4, 0], atol=1e-14)
    assert inner(fp.xi, fp.N, ex1.ambient) == pytest.approx(1.0, abs=1e-14)


def test_default_frame_for_example1_has_the_same_radical_direction(ex1):
    fp = build_frame(_strip(ex1), U1)
    np.testing.assert_allclose(fp.xi / fp.xi[0], [1, 0.5, 0, S3 / 2, 0], atol=1e-13)
    assert max(frame_invariants(fp).values()) < 1e-12


def test_example3_default_radical_is_proportional_to_V1():
    spec = _strip(fixtures.get("example3").spec)
    u = np.array([2.0, 1.0, 0.3, 0.7])
    fp = build_frame(spec, u)
    assert np.linalg.matrix_rank(fp.G, tol=1e-9) == spec.m - 1
    x = fp.f
    V1 = np.array([1.0, 0.0, x[2] / x[0], x[3] / x[0], x[4] / x[0], x[5] / x[0]])
    np.testing.assert_allclose(fp.xi / fp.xi[0], V1, atol=1e-12)


def test_riemannian_immersion_is_rejected():
    spec = ImmersionSpec.from_strings(["0", "v1", "v2", "v1*v2"], [(-1, 1), (-1, 1)])
    with pytest.raises(NotHalfLightlike):
        build_frame(spec, [0.1, 0.2])


def test_coisotropic_immersion_is_rejected():
    # totally null 2-plane in a neutral-signature R^4: radical rank 2
    spec = ImmersionSpec.from_strings(["v1", "v2", "v1", "v2"], [(-1, 1), (-1, 1)], signature=(-1, -1, 1, 1))
    with pytest.raises(NotHalfLightlike) as ei:
        build_frame(spec, [0.1, 0.2])
    assert "rank" in str(ei.value)


def test_singular_immersion_is_rejected():
    spec = ImmersionSpec.from_strings(["v1", "v1", "v1", "0"], [(-1, 1), (-1, 1)])
    with pytest.raises(SingularImmersion):
        build_frame(spec, [0.1, 0.2])


@pytest.mark.parametrize("field, value, message", [
    ("radical", ["1", "0", "0", "0", "0"], "not null"),
    ("radical", ["1", "0", "1", "0", "0"], "not tangent"),
    ("coscreen", ["0", "0", "1", "0", "0"], "not normal"),
    ("coscreen", ["0", "0", "-2*x3/sqrt(1 + 2*x3^2)", "0", "2*x5/sqrt(1 + 2*x3^2)"], "not unit"),
])
def test_override_validation_names_the_violated_condition(ex1, field, value, message):
    cfg = ex1.to_config()
    cfg[field] = value
    spec = ImmersionSpec.from_config(cfg)
    with pytest.raises(OverrideError) as ei:
        build_frame(spec, U1)
    assert message in str(ei.value)


def test_screen_override_must_be_orthogonal_to_radical(ex1):
    cfg = ex1.to_config()
    cfg["screen"][0] = ["0", "1", "0", "0", "0"]
    with pytest.raises(OverrideError) as ei:
        build_frame(ImmersionSpec.from_config(cfg), U1)
    assert "W1" in str(ei.value)


def test_spec_validation():
    with pytest.raises(ValueError):
        ImmersionSpec.from_strings(["v1", "v2", "0"], [(-1, 1), (-1, 1)])  # wrong codimension
    with pytest.raises(ValueError):
        ImmersionSpec.from_strings(["v1", "v1", "v2", "0"], [(1, -1), (-1, 1)])
    with pytest.raises(E.UnboundVariableError):
        ImmersionSpec.from_strings(["v1", "v1", "v3", "0"], [(-1, 1), (-1, 1)])


def test_config_round_trip(ex1):
    again = ImmersionSpec.from_config(ex1.to_config())
    assert again == ex1


# -- frame derivatives -------------------------------------------------------------------

def test_example1_dxi_dv2(ex1):
    d = frame_field_derivatives(ex1, U1)
    np.testing.assert_allclose(d["dxi"][1], [0, 0.5, 0, -1 / (2 * S3), 0], atol=1e-9)


def test_plane_frame_is_constant():
    fx = fixtures.get("plane")
    d = frame_field_derivatives(fx.spec, fx.point_array[0])
    for key in ("dxi", "dW", "dL", "dN"):
        assert np.max(np.abs(d[key])) < 1e-10


def test_example2_coscreen_is_parallel():
    fx = fixtures.get("example2")
    for u in fx.point_array[:3]:
        d = frame_field_derivatives(fx.spec, u)
        assert np.max(np.abs(d["dL"])) < 1e-10


# -- invariants on fixtures and random specs --------------------------------------------

@pytest.mark.parametrize("name", fixtures.list_fixtures())
def test_fixture_frames_satisfy_all_invariants(name):
    fx = fixtures.get(name)
    fp = build_frame(fx.spec, fx.point_array)
    worst = frame_invariants(fp)
    assert len(worst) == 11
    assert max(worst.values()) < 1e-10, worst


def test_random_specs_satisfy_all_invariants():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        spec = fixtures.random_spec(rng)
        u = fixtures.sample_points(spec, 1, seed=int(rng.integers(1 << 30)))[0]
        worst = max(worst, max(frame_invariants(build_frame(spec, u)).values()))
    assert worst < 1e-10


def test_null_transversal_is_independent_of_auxiliary_vector():
    rng = np.random.default_rng(5)
    for name in ("example1", "example2", "example3", "ruled"):
        fx = fixtures.get(name)
        for u in fx.point_array[:3]:
            fp = build_frame(fx.spec, u)
            for _ in range(5):
                a, b = rng.uniform(0.2, 3.0) * rng.choice([-1, 1]), rng.normal()
                V = a * fp.N + b * fp.xi  # any vector of (S ⊕ L)^⊥ with g(V, xi) != 0
                N2 = null_transversal(fp.xi, V, fx.spec.ambient)
                assert np.max(np.abs(N2 - fp.N)) < 1e-10


@pytest.mark.parametrize("alpha", ["2", "x1"])
def test_gauge_covariance_of_N(ex1, alpha):
    for u in fixtures.get("example1").point_array[:3]:
        rep = gauge_rescale(ex1, alpha, u)
        assert rep.N_scale_residual < 1e-10
