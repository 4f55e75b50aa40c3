"""Command-line front end.

Usage examples::

    halflight analyze --fixture example1
    halflight analyze --config my_immersion.json --points 12 --seed 3 --format text
    halflight verify --fixture example2
    halflight fixtures list
    halflight fixtures export example3 -o example3.json

Exit codes: 0 ok, 1 expectation or residual violation (``verify``),
2 input error, 3 geometric degeneracy.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import expr as E
from . import fixtures as FX
from .classify import DERIVATIVE_RELATIONS, classify, eigen_constancy, principal_curvatures
from .curvature import (
    Residual,
    cartan_pipeline,
    identity_residuals,
    induced_curvature,
    prop31_residuals,
)
from .framing import (
    ChartDomainError,
    FrameError,
    GeometricDegeneracy,
    ImmersionSpec,
    build_frame,
    frame_invariants,
)
from .gauss_weingarten import relation_residuals
from .jet import JetDomainError

__all__ = ["main", "build_parser", "run_analysis", "REPORT_SCHEMA", "to_text", "ConfigError"]

SUITES = ("frames", "induced", "curvature", "cartan", "classify")
EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3
CARTAN_TOL = 1e-5
RELATION_TOL = {"algebraic": 1e-10, "one_fd": 1e-8}
CURVATURE_NOTES = [
    "item3_codazzi_D checks (nabla_X D)(Y,Z) - (nabla_Y D)(X,Z) = rho(Y) B(X,Z) - rho(X) B(Y,Z); "
    "the L-component of the ambient Codazzi equation written without the rho factors is not "
    "consistent with this identity and is not evaluated",
    "item10_dtau_term is the size of the 2 dtau(X,Y) xi term of item 10, reported on its own",
]

_RESIDUAL = {
    "type": "object",
    "required": ["value", "tolerance", "pass"],
    "properties": {"value": {"type": "number"}, "tolerance": {"type": "number"}, "pass": {"type": "boolean"}},
    "additionalProperties": False,
}
_RESIDUALS = {"type": "object", "additionalProperties": _RESIDUAL}
_FLAG = {
    "type": "object",
    "required": ["value", "verdict", "worst_residual", "witness"],
    "properties": {
        "value": {"type": ["boolean", "null"]},
        "verdict": {"type": "string"},
        "worst_residual": {"type": ["number", "null"]},
        "witness": {"type": ["array", "null"]},
    },
}
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "halflight analysis report",
    "type": "object",
    "required": ["tool", "spec", "route", "k", "points", "suites", "passed"],
    "properties": {
        "tool": {"const": "halflight"},
        "spec": {"type": "object", "required": ["components", "signature", "domain"]},
        "route": {"enum": ["fd", "jet"]},
        "k": {"type": "number"},
        "points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "suites": {"type": "array", "items": {"enum": list(SUITES)}},
        "passed": {"type": "boolean"},
        "frames": {
            "type": "object",
            "required": ["points", "residuals"],
            "properties": {"residuals": _RESIDUALS},
        },
        "induced": {
            "type": "object",
            "required": ["frame", "points", "residuals"],
            "properties": {"residuals": _RESIDUALS},
        },
        "curvature": {
            "type": "object",
            "required": ["residuals", "item10_dtau_term"],
            "properties": {"residuals": _RESIDUALS, "item10_dtau_term": {"type": "number"}},
        },
        "cartan": {
            "type": "object",
            "required": ["applicable", "points", "residuals"],
            "properties": {"applicable": {"type": "boolean"}, "residuals": _RESIDUALS},
        },
        "classification": {
            "type": "object",
            "required": ["flags", "branch", "phi", "sigma", "residuals", "two_eigenvalue", "triple_product"],
            "properties": {
                "flags": {"type": "object", "additionalProperties": _FLAG},
                "branch": {"type": "string"},
                "phi": {"type": ["number", "null"]},
                "sigma": {"type": ["number", "null"]},
                "residuals": _RESIDUALS,
            },
        },
    },
}


class ConfigError(ValueError):
    """Malformed run configuration."""


# -- configuration -----------------------------------------------------------------

def _env_tol():
    raw = os.environ.get("HALFLIGHT_TOL")
    if raw is None or raw == "":
        return None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"HALFLIGHT_TOL must be a number, got {raw!r}") from None


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def spec_from_config(cfg: dict) -> ImmersionSpec:
    """The immersion part of a config: either the top level or a ``"spec"`` entry."""
    body = cfg.get("spec", cfg)
    for key in ("components", "domain"):
        if key not in body:
            raise ConfigError(f"config is missing {key!r}")
    k = float(body.get("k", 0.0))
    if k != 0.0:
        raise ConfigError(
            f"k = {k} requested: geometric sampling is only defined for the flat ambient (k = 0); "
            "k enters only the arithmetic evaluators curvature.cartan_sum and curvature.theorem41_residual")
    return ImmersionSpec.from_config(body)


def sample(spec: ImmersionSpec, strategy: str, count: int, seed: int) -> np.ndarray:
    """Sample points: ``halton`` (default), ``random`` or ``grid``."""
    if count < 1:
        raise ConfigError("--points must be at least 1")
    if strategy == "halton":
        return FX.sample_points(spec, count, seed)
    lo = np.array([d[0] for d in spec.domain])
    hi = np.array([d[1] for d in spec.domain])
    pad = 0.05 * (hi - lo)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        return rng.uniform(lo + pad, hi - pad, size=(count, spec.m))
    if strategy == "grid":
        n = max(1, math.ceil(count ** (1.0 / spec.m)))
        axes = [np.linspace(a + p, b - p, n) if n > 1 else np.array([(a + b) / 2])
                for a, b, p in zip(lo, hi, pad)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.m)
        return mesh[:count]
    raise ConfigError(f"unknown sampling strategy {strategy!r}")


# -- analysis ------------------------------------------------------------------------

def _res_dict(d: dict, tol_override=None) -> dict:
    out = {}
    for k, r in d.items():
        if tol_override is not None:
            r = Residual(r.value, tol_override, r.tier)
        out[k] = r.to_dict()
    return out


def _worst(dicts):
    out = {}
    for d in dicts:
        for k, r in d.items():
            if k not in out or r.value > out[k].value:
                out[k] = r
    return out


def _frames_suite(spec, P, tol):
    pts, res = [], []
    for u in P:
        fp = build_frame(spec, u)
        pts.append({"u": u.tolist(), "xi": fp.xi.tolist(), "N": fp.N.tolist(), "L": fp.L.tolist(),
                    "W": fp.W.tolist(), "gram": fp.G.tolist()})
        res.append({k: Residual(v, 1e-10, "algebraic") for k, v in frame_invariants(fp).items()})
    return {"points": pts, "residuals": _res_dict(_worst(res), tol)}


def _induced_suite(curvs, tol):
    pts, res = [], []
    for cv in curvs:
        o = cv.obj
        pts.append({
            "u": None,
            "chart": {k: np.asarray(getattr(o, k)).tolist()
                      for k in ("B", "D", "C", "tau", "rho", "phi", "eta", "AN", "AL", "Astar")},
            "xi_frame": {k: np.asarray(v).tolist() for k, v in o.in_frame().items() if k != "frame"},
        })
        r = {}
        for k, v in relation_residuals(o).items():
            tier = "one_fd" if k in DERIVATIVE_RELATIONS else "algebraic"
            r[k] = Residual(v, RELATION_TOL[tier], tier)
        res.append(r)
    return {"frame": "chart and xi,W", "points": pts, "residuals": _res_dict(_worst(res), tol)}


def _curvature_suite(curvs, tol):
    res, dtau = [], 0.0
    for cv in curvs:
        p = prop31_residuals(cv)
        dtau = max(dtau, p.pop("item10_dtau_term"))
        i = identity_residuals(cv)
        i.pop("two_dtau_max")
        res.append({**p, **i})
    return {"residuals": _res_dict(_worst(res), tol), "item10_dtau_term": dtau, "notes": CURVATURE_NOTES}


def _cartan_suite(curvs, phi, tol):
    pts, worst, applicable = [], 0.0, True
    reasons = []
    for cv in curvs:
        o = cv.obj
        pc = principal_curvatures(o.Astar_screen)
        const = eigen_constancy(o, cv.dobj, pc)
        irrot = max(float(np.max(np.abs(o.phi))), float(np.max(np.abs(o.D @ o.xi_coeffs))))
        tau = float(np.max(np.abs(o.tau)))
        if irrot > 1e-7:
            reasons.append("not irrotational")
        if tau > 1e-7:
            reasons.append("tau != 0")
        if const > 1e-5:
            reasons.append("principal curvatures not constant along the screen")
        c = cartan_pipeline(o, phi=phi)
        S = np.abs(c["S"])
        worst = max(worst, float(np.max(S)) if S.size else 0.0)
        pts.append({k: np.asarray(v).tolist() for k, v in c.items()})
    applicable = not reasons
    res = {}
    if applicable:
        res["cartan_sum"] = Residual(worst, CARTAN_TOL, "two_fd")
    return {"applicable": applicable, "reason": sorted(set(reasons)), "max_abs_S": worst,
            "points": pts, "residuals": _res_dict(res, tol)}


def run_analysis(spec: ImmersionSpec, P, suites=SUITES, route: str = "fd", tol=None) -> dict:
    """Full report document for ``spec`` at points ``P``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    suites = [s for s in SUITES if s in suites]
    doc = {"tool": "halflight", "spec": spec.to_config(), "route": route, "k": spec.k,
           "points": P.tolist(), "suites": suites}
    if "frames" in suites:
        doc["frames"] = _frames_suite(spec, P, tol)
    curvs = None
    if {"induced", "curvature", "cartan"} & set(suites):
        curvs = [induced_curvature(spec, u, route=route) for u in P]
    if "induced" in suites:
        doc["induced"] = _induced_suite(curvs, tol)
        for p, u in zip(doc["induced"]["points"], P):
            p["u"] = u.tolist()
    if "curvature" in suites:
        doc["curvature"] = _curvature_suite(curvs, tol)
    rep = None
    if "classify" in suites or "cartan" in suites:
        rep = classify(spec, P, route=route, tol=tol)
    if "cartan" in suites:
        doc["cartan"] = _cartan_suite(curvs, rep.phi, tol)
    if "classify" in suites:
        doc["classification"] = rep.to_dict()
    doc["passed"] = all(
        r["pass"]
        for key in ("frames", "induced", "curvature", "cartan", "classification")
        if key in doc
        for r in doc[key]["residuals"].values()
    )
    return doc


# -- text projection -----------------------------------------------------------------

def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return json.dumps(x)


def to_text(doc, prefix="") -> str:
    """Line-per-leaf projection of a JSON document; numbers printed with ``repr``.

    Residual entries render as ``name  value  tol  PASS|FAIL``.
    """
    lines = []

    def walk(node, path):
        if isinstance(node, dict):
            if set(node) == {"value", "tolerance", "pass"}:
                lines.append(f"{path}: {_fmt(node['value'])} tol {_fmt(node['tolerance'])} "
                             f"{'PASS' if node['pass'] else 'FAIL'}")
                return
            for k, v in node.items():
                walk(v, f"{path}.{k}" if path else str(k))
        elif isinstance(node, list) and any(isinstance(v, (dict, list)) for v in node):
            for i, v in enumerate(node):
                walk(v, f"{path}[{i}]")
        else:
            lines.append(f"{path}: {_fmt(node)}")

    walk(doc, prefix)
    return "\n".join(lines)


# -- commands ------------------------------------------------------------------------

def _tol(args):
    return args.tol if args.tol is not None else _env_tol()


def _suites(name):
    return SUITES if name == "all" else (name,)


def _resolve(args):
    """``(spec, points, fixture or None)`` from ``--config`` / ``--fixture``."""
    if bool(args.config) == bool(args.fixture):
        raise ConfigError("give exactly one of --config or --fixture")
    if args.fixture:
        fx = FX.get(args.fixture)
        if args.points is None and args.seed is None:
            return fx.spec, fx.point_array, fx
        return fx.spec, sample(fx.spec, "halton", args.points or 8, args.seed or 0), fx
    cfg = load_config(args.config)
    spec = spec_from_config(cfg)
    smp = cfg.get("sample", {})
    count = args.points if args.points is not None else int(smp.get("count", 8))
    seed = args.seed if args.seed is not None else int(smp.get("seed", 0))
    return spec, sample(spec, smp.get("strategy", "halton"), count, seed), None


def _emit(doc, fmt, out=None):
    text = json.dumps(doc, indent=2) if fmt == "json" else to_text(doc)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_analyze(args) -> int:
    spec, P, _ = _resolve(args)
    doc = run_analysis(spec, P, _suites(args.suite), route=args.route, tol=_tol(args))
    _emit(doc, args.format, args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    fx = FX.get(args.fixture)
    P = fx.point_array
    if args.points is not None or args.seed is not None:
        P = sample(fx.spec, "halton", args.points or 8, args.seed or 0)
        fx = FX.Fixture(fx.name, fx.description, fx.spec, tuple(map(tuple, P)), fx.expectations,
                        fx.provenance, fx.notes)
    report, results, failures = FX.verify_fixture(fx, route=args.route, tol=_tol(args))
    violations = [r for r in results if not r.passed and not r.expectation.discrepancy]
    doc = {
        "tool": "halflight",
        "fixture": fx.name,
        "route": args.route,
        "expectations": [r.to_dict() for r in results],
        "residual_failures": {k: r.to_dict() for k, r in failures.items()},
        "passed": not violations and not failures,
    }
    if args.format == "json":
        _emit(doc, "json", args.output)
    else:
        lines = [f"fixture {fx.name} ({args.route} route)"]
        for r in results:
            e = r.expectation
            tag = "PASS" if r.passed else ("DISCREPANCY" if e.discrepancy else "FAIL")
            lines.append(f"  {tag:11s} [{e.provenance}] {e.kind} {e.key}: expected {_fmt(FX._jsonable(e.value))}"
                         f" observed {_fmt(FX._jsonable(r.observed))} {r.detail}".rstrip())
        for k, r in failures.items():
            lines.append(f"  FAIL        residual {k}: {r.value!r} > tol {r.tolerance!r}")
        lines.append("PASS" if doc["passed"] else "FAIL")
        text = "\n".join(lines)
        if args.output:
            Path(args.output).write_text(text + "\n", encoding="utf-8")
        else:
            print(text)
    return EXIT_OK if doc["passed"] else EXIT_VIOLATION


def cmd_fixtures(args) -> int:
    if args.action == "list":
        for name in FX.list_fixtures():
            fx = FX.get(name)
            print(f"{name:18s} m={fx.spec.m}  [{fx.provenance}]  {fx.description}")
        return EXIT_OK
    if not args.name:
        raise ConfigError("fixtures export needs a fixture name")
    fx = FX.get(args.name)
    cfg = {"spec": fx.spec.to_config(), "sample": {"strategy": "halton", "count": len(fx.points), "seed": 0},
           "points": [list(p) for p in fx.points], "notes": list(fx.notes)}
    text = json.dumps(cfg, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halflight",
                                 description="Half-lightlike submanifolds of flat semi-Euclidean space.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config with the immersion spec")
        p.add_argument("--fixture", help="name of a built-in fixture")
        p.add_argument("--points", type=int, default=None, help="number of sample points")
        p.add_argument("--seed", type=int, default=None, help="sampling seed")
        p.add_argument("--tol", type=float, default=None,
                       help="override every residual tolerance (also HALFLIGHT_TOL)")
        p.add_argument("--format", choices=("json", "text"), default="json")
        p.add_argument("--route", choices=("fd", "jet"), default="fd",
                       help="finite-difference (default) or jet pipeline")
        p.add_argument("-o", "--output", help="write the report here instead of stdout")

    a = sub.add_parser("analyze", help="full report for an immersion")
    common(a)
    a.add_argument("--suite", choices=SUITES + ("all",), default="all")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="check a fixture against its expectations")
    common(v)
    v.add_argument("--suite", choices=SUITES + ("all",), default="all", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fixtures", help="list or export fixtures")
    f.add_argument("action", choices=("list", "export"))
    f.add_argument("name", nargs="?")
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_fixtures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except E.ExprSyntaxError as exc:
        print(f"error: parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeometricDegeneracy as exc:
        print(f"error: geometric degeneracy: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except FX.UnknownFixtureError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ChartDomainError, FrameError, E.ExprDomainError, E.UnboundVariableError,
            JetDomainError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
