"""Registry of reference immersions with provenance-tagged expectations.

Provenance tags: ``PAPER`` (printed in the source example), ``TRIVIAL``
(follows by inspection) and ``DERIVED`` (computed independently, e.g. by
hand or a different route).  Expectations marked ``discrepancy`` record a
printed value that the computation does not reproduce; they are reported
but do not count as violations (see :func:`verify_fixture`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from . import expr as E
from .classify import classify
from .framing import ImmersionSpec, build_frame
from .gauss_weingarten import induced_objects

__all__ = [
    "Expectation",
    "Fixture",
    "UnknownFixtureError",
    "get",
    "list_fixtures",
    "sample_points",
    "random_spec",
    "verify_fixture",
    "ExpectationResult",
]

PROVENANCE = ("PAPER", "TRIVIAL", "DERIVED")


class UnknownFixtureError(KeyError):
    """No fixture of that name is registered."""


@dataclass(frozen=True)
class Expectation:
    """One checkable statement about a fixture.

    ``kind`` selects the check:

    * ``flag``: report flag ``key`` has value ``value``;
    * ``scalar``: report field ``key`` (``phi``/``sigma``) equals ``value`` within ``tol``;
    * ``zero``: induced object ``key`` has max-abs below ``tol`` at every point;
    * ``eigenvalues``: screen principal curvatures equal ``value`` — a tuple of
      ``(expression, multiplicity)`` in descending order — within relative ``tol``;
    * ``operator_eigenvalues``: as above for the screen block of operator ``key``;
    * ``text``: report field ``key`` (``branch``/``two_eigenvalue``) equals ``value``;
    * ``form_entry``: ``key`` is ``"D:a,b"`` (screen indices); value is an
      expression, checked at ``points`` within relative ``tol``.
    """

    kind: str
    key: str
    value: object
    provenance: str
    tol: float = 1e-6
    note: str = ""
    points: Optional[tuple] = None
    discrepancy: bool = False

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str
    spec: ImmersionSpec
    points: tuple
    expectations: tuple
    provenance: str
    notes: tuple = ()

    @property
    def point_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)


def sample_points(spec: ImmersionSpec, n: int = 8, seed: int = 0, margin: float = 0.05) -> np.ndarray:
    """``n`` scrambled-Halton points inside the domain box, ``margin`` of each width away from its walls."""
    lo = np.array([d[0] for d in spec.domain])
    hi = np.array([d[1] for d in spec.domain])
    pad = margin * (hi - lo)
    h = qmc.Halton(d=spec.m, scramble=True, seed=seed)
    return qmc.scale(h.random(n), lo + pad, hi - pad)


def _points(spec, n=8, seed=0):
    return tuple(tuple(float(x) for x in p) for p in sample_points(spec, n, seed))


# -- the registry -------------------------------------------------------------------

def _example1_spec(name="example1", twisted=False):
    r = "sqrt(1 + 2*x3^2)"
    screen2 = ["0", "x4/x1", "0", "-x2/x1", "0"]
    if twisted:
        # add v3 * xi to the first screen vector: same immersion, different screen
        screen2 = ["v3", "x4/x1 + v3*x2/x1", "0", "-x2/x1 + v3*x4/x1", "0"]
    return ImmersionSpec.from_strings(
        ["v1", "v2", "v3", "sqrt(v1^2 - v2^2)", "sqrt(1 + v3^2)"],
        [(1.5, 3.0), (0.2, 1.2), (-1.5, 1.5)],
        radical=["1", "x2/x1", "0", "x4/x1", "0"],
        screen=[screen2, ["0", "0", f"x5/{r}", "0", f"x3/{r}"]],
        coscreen=["0", "0", f"-x3/{r}", "0", f"x5/{r}"],
        name=name,
    )


def _example1():
    spec = _example1_spec()
    X = [
        Expectation("zero", "tau", None, "PAPER", 1e-7, "tau = 0"),
        Expectation("zero", "rho", None, "PAPER", 1e-7, "rho = 0"),
        Expectation("zero", "phi_form", None, "PAPER", 1e-7, "irrotational: phi = 0"),
        Expectation("eigenvalues", "Astar", (("0", 1), ("-1/x1", 1)), "PAPER", 1e-6,
                    "screen principal curvatures 0 and -1/x1"),
        Expectation("operator_eigenvalues", "AN", (("0", 1), ("-1/(2*x1)", 1)), "PAPER", 1e-6,
                    "A_N V2 = -(1/(2 x1)) V2, A_N V3 = 0"),
        Expectation("scalar", "phi", 0.5, "PAPER", 1e-6, "conformal factor 1/2"),
        Expectation("flag", "irrotational", True, "PAPER"),
        Expectation("flag", "screen_homothetic", True, "PAPER"),
        Expectation("flag", "coscreen_conformal", False, "DERIVED", note="D(V3,V3) != 0 while D(V2,V2) = 0"),
        Expectation("text", "two_eigenvalue", "not applicable: co-screen not conformal", "DERIVED"),
    ]
    notes = (
        "printed co-screen vector is not normal to M; the fixture uses the normal unit "
        "field (-x3 d3 + x5 d5)/sqrt(1 + 2 x3^2)",
        "the printed tangent field V1 = (x4 d1 + x1 d4)/x2 is documentation only; it is not part of the screen",
    )
    return Fixture("example1", "three-dimensional half-lightlike submanifold of R^5_1 (v1 > v2 > 0)",
                   spec, _points(spec), tuple(X), "PAPER", notes)


def _example2():
    s2 = "sqrt(2)"
    spec = ImmersionSpec.from_strings(
        ["v1", "v2", "v3", "v4", "v3", "sqrt(v1^2 - v2^2)"],
        [(1.5, 3.0), (0.2, 1.2), (-1.0, 1.0), (-1.0, 1.0)],
        radical=["1", "x2/x1", "0", "0", "0", "x6/x1"],
        screen=[["0", "x6/x1", "0", "0", "0", "-x2/x1"],
                ["0", "0", f"1/{s2}", "0", f"1/{s2}", "0"],
                ["0", "0", "0", "1", "0", "0"]],
        coscreen=["0", "0", f"1/{s2}", "0", f"-1/{s2}", "0"],
        name="example2",
    )
    X = [
        Expectation("zero", "AL", None, "PAPER", 1e-8, "A_L = 0 on TM"),
        Expectation("zero", "D", None, "PAPER", 1e-8, "D = 0"),
        Expectation("zero", "tau", None, "PAPER", 1e-7, "tau = 0"),
        Expectation("zero", "rho", None, "PAPER", 1e-7, "rho = 0"),
        Expectation("eigenvalues", "Astar", (("0", 2), ("-1/x1", 1)), "PAPER", 1e-6,
                    "screen principal curvatures -1/x1 and 0"),
        Expectation("operator_eigenvalues", "AN", (("0", 2), ("-1/(2*x1)", 1)), "PAPER", 1e-6,
                    "A_N V1 = -(1/(2 x1)) V1"),
        Expectation("scalar", "phi", 0.5, "PAPER", 1e-6, "conformal factor 1/2"),
        Expectation("flag", "irrotational", True, "PAPER"),
        Expectation("flag", "screen_homothetic", True, "PAPER"),
        Expectation("flag", "coscreen_killing", True, "PAPER", note="Killing distribution"),
        Expectation("flag", "triple_product", True, "DERIVED",
                    note="all hypotheses of the two-eigenvalue theorem hold"),
    ]
    return Fixture("example2", "graph x3 = x5, x6 = sqrt(x1^2 - x2^2) in R^6_1 as a 4-chart",
                   spec, _points(spec), tuple(X), "PAPER")


def _example3():
    s = "v1/sqrt(2)"
    spec = ImmersionSpec.from_strings(
        ["v1", "v2", f"{s}*sin(v3)", f"{s}*cos(v3)", f"{s}*sin(v4)", f"{s}*cos(v4)"],
        [(1.0, 3.0), (-2.0, 2.0), (-1.2, 1.2), (-1.2, 1.2)],
        radical=["1", "0", "x3/x1", "x4/x1", "x5/x1", "x6/x1"],
        screen=[["0", "1", "0", "0", "0", "0"],
                ["0", "0", "sqrt(2)*x4/x1", "-sqrt(2)*x3/x1", "0", "0"],
                ["0", "0", "0", "0", "sqrt(2)*x6/x1", "-sqrt(2)*x5/x1"]],
        coscreen=["1", "0", "2*x3/x1", "2*x4/x1", "0", "0"],
        name="example3",
    )
    v3_zero = ((2.0, 1.0, 0.0, 0.0), (1.5, -0.5, 0.0, 0.7), (2.5, 0.3, 0.0, -0.4))
    X = [
        Expectation("zero", "tau", None, "PAPER", 1e-7, "tau = 0"),
        Expectation("zero", "rho", None, "PAPER", 1e-7, "rho = 0"),
        Expectation("eigenvalues", "Astar", (("0", 1), ("-1/x1", 2)), "PAPER", 1e-6,
                    "screen principal curvatures -1/x1 (V3, V4) and 0"),
        Expectation("operator_eigenvalues", "AN", (("1/x1", 1), ("0", 1), ("-1/x1", 1)), "PAPER", 1e-6,
                    "A_N V3 = V3/x1, A_N V4 = -V4/x1"),
        Expectation("flag", "irrotational", True, "PAPER"),
        Expectation("flag", "screen_conformal", False, "PAPER", note="not screen homothetic"),
        Expectation("flag", "screen_homothetic", False, "PAPER"),
        Expectation("flag", "coscreen_conformal", False, "PAPER", note="co-screen not conformal"),
        Expectation("text", "two_eigenvalue", "not applicable: not screen homothetic", "PAPER"),
        Expectation("form_entry", "D:1,1", "-sqrt(2)/(x1*x4)", "PAPER", 1e-6,
                    "printed D(V3,V3); the unit co-screen gives -2/x1", v3_zero, discrepancy=True),
        Expectation("form_entry", "D:1,1", "-2/x1", "DERIVED", 1e-6,
                    "D(V3,V3) for the unit co-screen (x1 d1 + 2 x3 d3 + 2 x4 d4)/x1", v3_zero),
    ]
    notes = ("printed co-screen H1 has length x1/(2 x4); the fixture uses the unit field H1 * 2 x4/x1",)
    return Fixture("example3", "v1-scaled product of two circles in R^6_1",
                   spec, _points(spec), tuple(X), "PAPER", notes)


def _plane():
    spec = ImmersionSpec.from_strings(["v1", "v1", "v2", "0"], [(-1.0, 1.0), (-1.0, 1.0)], name="plane")
    X = [
        Expectation("flag", "totally_geodesic", True, "TRIVIAL"),
        Expectation("zero", "Gamma", None, "TRIVIAL", 1e-10),
        Expectation("zero", "B", None, "TRIVIAL", 1e-10),
        Expectation("text", "branch", "totally geodesic", "TRIVIAL"),
    ]
    return Fixture("plane", "null plane t = x1 in R^4_1 (flat, totally geodesic)",
                   spec, _points(spec), tuple(X), "TRIVIAL")


def _null_cone():
    spec = ImmersionSpec.from_strings(
        ["sqrt(v1^2 + v2^2 + v3^2)", "v1", "v2", "v3", "0"],
        [(1.0, 2.0), (-0.5, 0.5), (-0.5, 0.5)], name="null_cone")
    X = [
        Expectation("flag", "B_umbilical", True, "DERIVED"),
        Expectation("flag", "totally_umbilical", True, "DERIVED"),
        Expectation("zero", "D", None, "TRIVIAL", 1e-8),
        Expectation("text", "branch", "totally umbilical", "DERIVED"),
    ]
    return Fixture("null_cone", "slice of the light cone of R^4_1 times a point of R (totally umbilical)",
                   spec, _points(spec), tuple(X), "DERIVED")


def _cone_product():
    spec = ImmersionSpec.from_strings(
        ["v1", "v2", "v3", "sqrt(v1^2 - v2^2 - v3^2)", "v4", "0"],
        [(2.0, 3.0), (-0.5, 0.5), (-0.5, 0.5), (-1.0, 1.0)], name="cone_product")
    X = [
        Expectation("eigenvalues", "Astar", (("0", 1), ("-1/x1", 2)), "DERIVED", 1e-6),
        Expectation("scalar", "phi", 0.5, "DERIVED", 1e-6),
        Expectation("flag", "coscreen_killing", True, "TRIVIAL", note="L = d6 is constant"),
        Expectation("flag", "triple_product", True, "DERIVED"),
        Expectation("text", "branch", "lightlike triple product", "DERIVED"),
    ]
    return Fixture("cone_product", "light cone of R^4_1 times a line: screen homothetic with a two-dimensional leaf",
                   spec, _points(spec), tuple(X), "DERIVED")


def _ruled():
    a = "(v1 + 0.3*v1^2 + 0.2*v2)"
    spec = ImmersionSpec.from_strings(
        ["v3", "v1", f"v3*cos{a}", f"v3*sin{a}", "v2 + 0.1*v1*v2"],
        [(-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5)], name="ruled")
    X = [Expectation("flag", "half_lightlike", True, "TRIVIAL", note="ruled by null lines")]
    return Fixture("ruled", "null-ruled submanifold of R^5_1 with non-vanishing phi, rho and A_L",
                   spec, _points(spec), tuple(X), "DERIVED")


def _example1_twisted():
    spec = _example1_spec("example1_twisted", twisted=True)
    X = [
        Expectation("flag", "screen_conformal", False, "DERIVED",
                    note="C depends on the screen; the twisted screen breaks conformality"),
        Expectation("flag", "irrotational", True, "DERIVED"),
    ]
    return Fixture("example1_twisted", "Example-1 immersion with screen V2 + v3 xi (d tau != 0)",
                   spec, _points(spec), tuple(X), "DERIVED")


_BUILDERS = {
    "plane": _plane,
    "null_cone": _null_cone,
    "cone_product": _cone_product,
    "example1": _example1,
    "example2": _example2,
    "example3": _example3,
    "ruled": _ruled,
    "example1_twisted": _example1_twisted,
}
_CACHE: dict = {}


def list_fixtures() -> list:
    return list(_BUILDERS)


def get(name: str) -> Fixture:
    if name not in _BUILDERS:
        raise UnknownFixtureError(f"unknown fixture {name!r}; available: {', '.join(_BUILDERS)}")
    if name not in _CACHE:
        _CACHE[name] = _BUILDERS[name]()
    return _CACHE[name]


# -- random specs -------------------------------------------------------------------

def _lit(x: float) -> str:
    return repr(float(x)) if x >= 0 else f"({float(x)!r})"


def random_spec(rng: np.random.Generator, m: Optional[int] = None) -> ImmersionSpec:
    """A random half-lightlike immersion in ``R^{m+2}_1``.

    Built as ``(R, R σ(w), z(w))`` with ``σ`` a randomly reparametrized
    unit sphere (spherical angles), ``R = s·exp(a(w)) + b(w)`` and ``z``
    random, then moved by a random boost and a random plane rotation.  The
    induced metric ``R² dσ² + dz²`` is degenerate exactly along ``∂_s``.
    """
    m = int(rng.integers(2, 5)) if m is None else m
    k = m - 1  # screen coordinates w = (v1..vk), s = v_m

    def quad(c0, lin=0.3, sq=0.15):
        terms = [_lit(c0)]
        for i in range(1, k + 1):
            terms.append(f"{_lit(rng.normal(0, lin))}*v{i}")
            terms.append(f"{_lit(rng.normal(0, sq))}*v{i}^2")
        return "(" + " + ".join(terms) + ")"

    theta = [f"({_lit(rng.uniform(0.9, 2.2))} + v{i + 1} + {quad(0.0, 0.1, 0.1)})" for i in range(k)]
    sigma = []
    for j in range(m):
        factors = [f"sin{theta[i]}" for i in range(min(j, k))]
        if j < k:
            factors.append(f"cos{theta[j]}")
        sigma.append("*".join(factors))
    R = f"(v{m}*exp(0.3*sin{quad(0.0)}) + 0.1*{quad(0.0)})"
    comps = [R] + [f"{R}*{sg}" for sg in sigma] + [quad(rng.normal())]
    # boost in the (x0, x1) plane, then a rotation of two random spatial axes
    beta = rng.normal(0, 0.5)
    Lam = np.eye(m + 2)
    Lam[0, 0] = Lam[1, 1] = math.cosh(beta)
    Lam[0, 1] = Lam[1, 0] = math.sinh(beta)
    i, j = rng.choice(np.arange(1, m + 2), size=2, replace=False)
    ang = rng.uniform(0, 2 * math.pi)
    Rot = np.eye(m + 2)
    Rot[i, i] = Rot[j, j] = math.cos(ang)
    Rot[i, j], Rot[j, i] = -math.sin(ang), math.sin(ang)
    Lam = Rot @ Lam
    mixed = []
    for r in range(m + 2):
        terms = [f"{_lit(Lam[r, c])}*{comps[c]}" for c in range(m + 2) if abs(Lam[r, c]) > 1e-14]
        mixed.append(" + ".join(terms))
    domain = [(-0.3, 0.3)] * k + [(1.0, 2.0)]
    return ImmersionSpec.from_strings(mixed, domain, name="random")


# -- expectation checks ----------------------------------------------------------------

@dataclass
class ExpectationResult:
    expectation: Expectation
    passed: bool
    observed: object
    detail: str

    def to_dict(self) -> dict:
        e = self.expectation
        return {"kind": e.kind, "key": e.key, "expected": _jsonable(e.value), "provenance": e.provenance,
                "tolerance": e.tol, "observed": _jsonable(self.observed), "pass": self.passed,
                "discrepancy": e.discrepancy, "detail": self.detail}


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (tuple, list)):
        return [_jsonable(y) for y in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _ambient_values(spec, u):
    return [E.eval_value(c, u) for c in spec.components]


def _expr_at(spec, text, u):
    return E.eval_value(E.parse(text), u, ambient=_ambient_values(spec, u))


def _screen_block_eigs(o, key):
    w, G = o.screen_coeffs, o.G
    A = getattr(o, key)
    block = w @ G @ A @ w.T  # g(A W_b, W_a): operator on the orthonormal screen
    return np.sort(np.linalg.eigvals(block).real)[::-1]


def _check_spectrum(spec, pts, objs, exp: Expectation):
    worst, obs = 0.0, []
    for u, o in zip(pts, objs):
        expected = []
        for text, mult in exp.value:
            expected += [_expr_at(spec, text, u)] * mult
        expected = np.sort(np.array(expected))[::-1]
        got = _screen_block_eigs(o, exp.key)
        obs.append(got.tolist())
        err = np.max(np.abs(got - expected) / np.maximum(1.0, np.abs(expected))) if got.size == expected.size else np.inf
        worst = max(worst, float(err))
    return worst <= exp.tol, obs, f"worst relative error {worst:.3e}"


def verify_fixture(fx: Fixture, route: str = "fd", tol: Optional[float] = None, report=None):
    """Run the pipeline on the fixture and check every expectation.

    Returns ``(report, results, residual_failures)``.  ``tol`` overrides all
    identity-residual tolerances (not the expectation tolerances).
    """
    pts = fx.point_array
    if report is None:
        report = classify(fx.spec, pts, route=route, tol=tol)
    objs = [induced_objects(fx.spec, u, route=route) for u in pts]
    results = []
    for exp in fx.expectations:
        if exp.kind == "flag":
            got = report.flags[exp.key].value
            results.append(ExpectationResult(exp, got == exp.value, got, report.flags[exp.key].verdict))
        elif exp.kind == "scalar":
            got = getattr(report, exp.key)
            ok = got is not None and abs(got - exp.value) <= exp.tol
            results.append(ExpectationResult(exp, ok, got, f"|diff| = {abs(got - exp.value):.3e}" if got is not None else "not fitted"))
        elif exp.kind == "zero":
            if exp.key in ("tau", "rho", "phi_form"):
                vals = [np.max(np.abs(r[exp.key])) for r in report.per_point]
            else:
                vals = [np.max(np.abs(getattr(o, exp.key))) for o in objs]
            worst = float(max(vals))
            results.append(ExpectationResult(exp, worst < exp.tol, worst, f"max |{exp.key}| = {worst:.3e}"))
        elif exp.kind in ("eigenvalues", "operator_eigenvalues"):
            ok, obs, detail = _check_spectrum(fx.spec, pts, objs, exp)
            results.append(ExpectationResult(exp, ok, obs, detail))
        elif exp.kind == "text":
            got = report.branch if exp.key == "branch" else report.two_eigenvalue.verdict
            results.append(ExpectationResult(exp, got == exp.value, got, ""))
        elif exp.kind == "form_entry":
            name, idx = exp.key.split(":")
            a, b = (int(t) for t in idx.split(","))
            worst, obs = 0.0, []
            for u in exp.points:
                o = induced_objects(fx.spec, np.array(u), route=route)
                w = o.screen_coeffs
                got = float(w[a] @ getattr(o, name) @ w[b])
                want = _expr_at(fx.spec, exp.value, u)
                obs.append(got)
                worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
            results.append(ExpectationResult(exp, worst <= exp.tol, obs, f"worst relative error {worst:.3e}"))
        else:
            raise ValueError(f"unknown expectation kind {exp.kind!r}")
    residual_failures = {k: r for k, r in report.residuals.items() if not r.passed}
    return report, results, residual_failures


def check_frames(fx: Fixture):
    """Build the frame at every default point (raises on failure)."""
    return [build_frame(fx.spec, u) for u in fx.point_array]
