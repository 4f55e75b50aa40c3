"""Conformal fits, screen principal curvatures and classification predicates.

All fits are least squares in the quasi-orthonormal frame ``{ξ, W_a}``.
Fit residuals are relative; a fit is *conformal* below ``TOL_CONFORMAL``,
*not conformal* above ``TOL_NOT_CONFORMAL`` and *inconclusive* in between.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .curvature import (
    Residual,
    TIERS,
    identity_residuals,
    induced_curvature,
    leaf_curvature,
    prop31_residuals,
)
from .framing import ImmersionSpec, build_frame, frame_invariants
from .gauss_weingarten import relation_residuals

__all__ = [
    "TOL_EIG",
    "TOL_CONFORMAL",
    "TOL_NOT_CONFORMAL",
    "PrincipalCurvatures",
    "ConformalFit",
    "CoscreenFit",
    "UmbilicityFit",
    "Flag",
    "TwoEigenvalueVerdict",
    "ClassificationReport",
    "principal_curvatures",
    "fit_screen_conformal",
    "fit_coscreen_conformal",
    "umbilicity",
    "two_eigenvalue_check",
    "two_eigenvalue_verdict",
    "classify",
    "eigen_constancy",
]

TOL_EIG = 1e-6
TOL_CONFORMAL = 1e-6
TOL_NOT_CONFORMAL = 1e-2
TOL_ZERO = 1e-8          # a form is "zero" below this Frobenius norm (relative to g)
TOL_CONSTANT = 1e-5      # eigenvalue constancy along the screen
TOL_FORM = TIERS["one_fd"]  # one-forms and σ against zero

# relations that use one derivative of a frame field
DERIVATIVE_RELATIONS = {
    "A* algebraic=derivative", "L-part of dxi=-phi", "g(A_L X,Y)=D+phi eta",
    "g(A_L X,N)=rho", "N-part of dL=phi", "g(A_N X,PY)=C", "g(A_N X,N)=0",
}


def _fro(x) -> float:
    return float(np.linalg.norm(np.asarray(x, dtype=float)))


def _verdict(residual: float) -> str:
    if residual < TOL_CONFORMAL:
        return "conformal"
    if residual > TOL_NOT_CONFORMAL:
        return "not conformal"
    return "inconclusive"


# -- principal curvatures -----------------------------------------------------

@dataclass
class PrincipalCurvatures:
    values: np.ndarray          # descending
    vectors: np.ndarray         # columns, screen coefficients
    classes: list               # [(value, multiplicity)] in descending order

    @property
    def multiplicities(self) -> tuple:
        return tuple(r for _, r in self.classes)


def _same(a, b, tol=TOL_EIG):
    return abs(a - b) <= tol + tol * max(abs(a), abs(b))


def principal_curvatures(A_star_xi, tol: float = TOL_EIG) -> PrincipalCurvatures:
    """Eigen-decomposition of the symmetric screen block, sorted descending.

    Eigenvalues within ``tol`` absolute plus ``tol`` relative of each other
    form one class; the class value is their mean.
    """
    A = np.asarray(A_star_xi, dtype=float)
    lam, V = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    classes = []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or not _same(lam[i], lam[start], tol):
            classes.append((float(np.mean(lam[start:i])), i - start))
            start = i
    return PrincipalCurvatures(lam, V, classes)


# -- conformal fits ----------------------------------------------------------------

@dataclass
class ConformalFit:
    phi: float
    residual: float
    verdict: str   # conformal | not conformal | inconclusive | degenerate fit


def fit_screen_conformal(B, C) -> ConformalFit:
    """Least-squares ``φ`` with ``C ≈ φ B``; residual relative to ``‖B‖_F``.

    ``B`` and ``C`` are the blocks ``B(X, W_a)`` and ``C(X, W_a)`` (any
    consistent shape).  ``B ≈ 0`` gives the verdict ``"degenerate fit"``.
    """
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    nB = _fro(B)
    if nB < TOL_ZERO:
        return ConformalFit(float("nan"), float("nan"), "degenerate fit")
    phi = float(np.sum(B * C) / nB ** 2)
    res = _fro(C - phi * B) / nB
    return ConformalFit(phi, res, _verdict(res))


@dataclass
class CoscreenFit:
    sigma: float
    residual: float
    verdict: str
    killing: bool
    closed_conformal: bool
    closed_residual: float


def _proportional(F, g):
    """Least-squares ``h`` with ``F ≈ h g`` and the relative residual (0 for ``F ≈ 0``)."""
    F = np.asarray(F, dtype=float)
    g = np.asarray(g, dtype=float)
    ng, nF = _fro(g), _fro(F)
    h = float(np.sum(F * g) / ng ** 2)
    if nF <= TOL_ZERO * max(ng, 1.0):
        return h, nF / max(ng, 1.0)
    return h, _fro(F - h * g) / nF


def fit_coscreen_conformal(D, G, eta=None, rho=None) -> CoscreenFit:
    """Least-squares ``σ`` with ``D ≈ -σ g``.

    Killing iff conformal with ``σ ≈ 0``; closed conformal iff additionally
    ``ρ + σ η ≈ 0`` (needs ``eta`` and ``rho``).
    """
    h, res = _proportional(D, G)
    sigma = -h
    verdict = _verdict(res)
    killing = verdict == "conformal" and abs(sigma) < TOL_FORM
    closed_res = float("nan")
    closed = False
    if eta is not None and rho is not None:
        eta = np.asarray(eta, dtype=float)
        rho = np.asarray(rho, dtype=float)
        closed_res = float(np.max(np.abs(rho + sigma * eta))) / max(1.0, float(np.max(np.abs(rho))))
        closed = verdict == "conformal" and closed_res < TOL_FORM
    return CoscreenFit(sigma, res, verdict, killing, closed, closed_res)


@dataclass
class UmbilicityFit:
    H1: float
    H1_residual: float
    H2: float
    H2_residual: float
    B_umbilical: bool
    D_umbilical: bool
    totally_geodesic: bool
    totally_umbilical: bool


def umbilicity(B, D, G) -> UmbilicityFit:
    """Fits ``B = H₁ g`` and ``D = H₂ g``."""
    H1, r1 = _proportional(B, G)
    H2, r2 = _proportional(D, G)
    bu, du = r1 < TOL_CONFORMAL, r2 < TOL_CONFORMAL
    scale = max(_fro(G), 1.0)
    geo = _fro(B) < TOL_ZERO * scale and _fro(D) < TOL_ZERO * scale
    return UmbilicityFit(H1, r1, H2, r2, bu, du, geo, bu and du)


# -- report types ---------------------------------------------------------------

@dataclass
class Flag:
    """A predicate aggregated over sample points."""

    value: Optional[bool]
    verdict: str
    worst_residual: float = float("nan")
    witness: Optional[list] = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "verdict": self.verdict,
            "worst_residual": _num(self.worst_residual),
            "witness": self.witness,
        }


@dataclass
class TwoEigenvalueVerdict:
    applicable: bool
    verdict: str
    holds: Optional[bool] = None
    min_abs_lambda: Optional[float] = None
    r: Optional[int] = None

    def to_dict(self) -> dict:
        return {"applicable": self.applicable, "verdict": self.verdict, "holds": self.holds,
                "min_abs_lambda": _num(self.min_abs_lambda), "r": self.r}


def _num(x):
    if x is None:
        return None
    x = float(x)
    return None if np.isnan(x) else x


@dataclass
class ClassificationReport:
    name: str
    route: str
    points: np.ndarray
    per_point: list
    principal: dict
    flags: dict
    phi: Optional[float]
    sigma: Optional[float]
    two_eigenvalue: TwoEigenvalueVerdict
    triple_product: dict
    branch: str
    residuals: dict
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "route": self.route,
            "points": np.asarray(self.points).tolist(),
            "per_point": self.per_point,
            "principal_curvatures": self.principal,
            "flags": {k: f.to_dict() for k, f in self.flags.items()},
            "phi": _num(self.phi),
            "sigma": _num(self.sigma),
            "two_eigenvalue": self.two_eigenvalue.to_dict(),
            "triple_product": self.triple_product,
            "branch": self.branch,
            "residuals": {k: r.to_dict() for k, r in self.residuals.items()},
            "notes": list(self.notes),
        }


# -- two-eigenvalue theorem -----------------------------------------------------------

def two_eigenvalue_check(classes, *, constancy_residual: float, screen_homothetic: bool,
                         coscreen_conformal: bool, k: float = 0.0, tol: float = TOL_EIG) -> TwoEigenvalueVerdict:
    """Check "one of the two screen principal curvatures vanishes" under its hypotheses.

    ``classes`` is ``[(λ, multiplicity), ...]`` at a representative point.
    """
    if not screen_homothetic:
        return TwoEigenvalueVerdict(False, "not applicable: not screen homothetic")
    if not coscreen_conformal:
        return TwoEigenvalueVerdict(False, "not applicable: co-screen not conformal")
    if len(classes) != 2:
        return TwoEigenvalueVerdict(False, f"not applicable: {len(classes)} distinct screen principal curvatures")
    if not constancy_residual < TOL_CONSTANT:
        return TwoEigenvalueVerdict(False, "not applicable: principal curvatures not constant along the screen")
    if k > 0:
        return TwoEigenvalueVerdict(False, "not applicable: k > 0")
    lam = [abs(v) for v, _ in classes]
    mn = min(lam)
    holds = mn < tol
    nonzero = classes[int(np.argmax(lam))]
    verdict = "holds: one principal curvature vanishes" if holds else "violated: both principal curvatures nonzero"
    return TwoEigenvalueVerdict(True, verdict, holds, mn, nonzero[1] if holds else None)


def two_eigenvalue_verdict(report: ClassificationReport, k: float = 0.0) -> TwoEigenvalueVerdict:
    """Re-evaluate the two-eigenvalue theorem from a report's flags."""
    f = report.flags
    classes = report.per_point[0]["classes"] if report.per_point else []
    return two_eigenvalue_check(
        [tuple(c) for c in classes],
        constancy_residual=report.principal["constancy_residual"],
        screen_homothetic=bool(f["screen_homothetic"].value),
        coscreen_conformal=bool(f["coscreen_conformal"].value),
        k=k,
    )


# -- per-point analysis ------------------------------------------------------------

def eigen_constancy(o, d, pc: PrincipalCurvatures) -> float:
    """Worst ``|W_a(λ)|`` over classes; ``dλ = tr(S^T dA S)/r`` per class."""
    w, B = o.screen_coeffs, o.B
    dw, dB = d.screen_coeffs, d.B
    dA = (np.einsum("pai,ij,bj->pab", dw, B, w) + np.einsum("ai,pij,bj->pab", w, dB, w)
          + np.einsum("ai,ij,pbj->pab", w, B, dw))
    worst, start = 0.0, 0
    for _, r in pc.classes:
        S = pc.vectors[:, start:start + r]
        start += r
        dlam = np.einsum("ak,pab,bk->p", S, dA, S) / r
        worst = max(worst, float(np.max(np.abs(w @ dlam))))
    return worst


def _analyze_point(spec, u, route, gauge=None):
    curv = induced_curvature(spec, u, route=route, gauge=gauge)
    o = curv.obj
    fr = o.in_frame()
    pc = principal_curvatures(o.Astar_screen)
    sc = fit_screen_conformal(fr["B"][:, 1:], fr["C"])
    cs = fit_coscreen_conformal(fr["D"], fr["g"], fr["eta"], fr["rho"])
    um = umbilicity(fr["B"], fr["D"], fr["g"])
    const = eigen_constancy(o, curv.dobj, pc)
    return curv, pc, sc, cs, um, const


def _flag_from(values, verdicts, residuals, points, good="conformal"):
    res = np.asarray(residuals, dtype=float)
    finite = np.where(np.isnan(res), -np.inf, res)
    i = int(np.argmax(finite))
    witness = np.asarray(points[i]).tolist()
    worst = float(res[i])
    if all(v == good for v in verdicts):
        return Flag(True, good, worst, witness)
    for j, v in enumerate(verdicts):
        if v == "not conformal":
            return Flag(False, v, worst, np.asarray(points[j]).tolist())
    bad = next(j for j, v in enumerate(verdicts) if v != good)
    return Flag(None, verdicts[bad], worst, np.asarray(points[bad]).tolist())


def _bool_flag(ok, residuals, points, true_msg, false_msg):
    res = np.asarray(residuals, dtype=float)
    i = int(np.argmax(res))
    if all(ok):
        return Flag(True, true_msg, float(res[i]), np.asarray(points[i]).tolist())
    j = next(j for j, v in enumerate(ok) if not v)
    return Flag(False, false_msg, float(res[i]), np.asarray(points[j]).tolist())


def _worst_residuals(items, points, tol_override=None):
    out = {}
    for name in items[0]:
        vals = [it[name] for it in items]
        if isinstance(vals[0], Residual):
            worst = max(vals, key=lambda r: r.value)
            tol = worst.tolerance if tol_override is None else tol_override
            out[name] = Residual(worst.value, tol, worst.tier)
    return out


def classify(spec: ImmersionSpec, points, route: str = "jet", tol: Optional[float] = None,
             gauge=None) -> ClassificationReport:
    """Evaluate every predicate and identity at ``points`` and aggregate.

    ``tol`` overrides every residual tolerance (flags keep their own
    thresholds).  Errors from a point are re-raised with the point attached.
    """
    if spec.k != 0:
        raise ValueError("classification samples the flat ambient only (k = 0); "
                         "use cartan_sum / theorem41_residual for k != 0")
    P = np.atleast_2d(np.asarray(points, dtype=float))
    rows, residual_sets = [], []
    curvs, pcs, scs, css, ums, consts, irr = [], [], [], [], [], [], []
    for u in P:
        try:
            fp = build_frame(spec, u, gauge=gauge)
            curv, pc, sc, cs, um, const = _analyze_point(spec, u, route, gauge)
        except Exception as exc:
            exc.args = (f"{exc.args[0] if exc.args else exc} (at point {u.tolist()})",) + exc.args[1:]
            raise
        o = curv.obj
        rs = {}
        for k, v in frame_invariants(fp).items():
            rs["frame: " + k] = Residual(v, TIERS["algebraic"], "algebraic")
        for k, v in relation_residuals(o).items():
            tier = "one_fd" if k in DERIVATIVE_RELATIONS else "algebraic"
            tol_k = 1e-8 if k in DERIVATIVE_RELATIONS else TIERS["algebraic"]
            rs["relation: " + k] = Residual(v, tol_k, tier)
        for k, v in prop31_residuals(curv).items():
            if isinstance(v, Residual):
                rs["prop: " + k] = v
        for k, v in identity_residuals(curv).items():
            if isinstance(v, Residual):
                rs["identity: " + k] = v
        residual_sets.append(rs)
        c = o.xi_coeffs
        irr.append(max(float(np.max(np.abs(o.phi))), float(np.max(np.abs(o.D @ c)))))
        curvs.append(curv); pcs.append(pc); scs.append(sc); css.append(cs); ums.append(um); consts.append(const)
        rows.append({
            "u": u.tolist(),
            "lambdas": pc.values.tolist(),
            "classes": [[v, r] for v, r in pc.classes],
            "phi": _num(sc.phi), "phi_residual": _num(sc.residual), "phi_verdict": sc.verdict,
            "sigma": cs.sigma, "sigma_residual": cs.residual, "sigma_verdict": cs.verdict,
            "H1": um.H1, "H1_residual": um.H1_residual, "H2": um.H2, "H2_residual": um.H2_residual,
            "tau": o.tau.tolist(), "rho": o.rho.tolist(), "phi_form": o.phi.tolist(),
            "eigen_constancy": const,
        })

    flags = {}
    flags["half_lightlike"] = Flag(True, "radical of rank 1 at every point", 0.0, None)
    flags["irrotational"] = _bool_flag([r < TOL_FORM for r in irr], irr, P,
                                       "phi = 0 and D(X, xi) = 0", "phi or D(X, xi) nonzero")
    sc_flag = _flag_from(None, [s.verdict for s in scs], [s.residual for s in scs], P)
    flags["screen_conformal"] = sc_flag
    phis = np.array([s.phi for s in scs])
    phi_mean = float(np.mean(phis)) if sc_flag.value else None
    if sc_flag.value:
        sd = float(np.std(phis))
        homo = abs(phi_mean) > TOL_FORM and sd < 1e-6 * abs(phi_mean)
        flags["screen_homothetic"] = Flag(homo, f"phi = {phi_mean:.12g}, stdev {sd:.3g}" if homo
                                          else f"phi not a nonzero constant (stdev {sd:.3g})", sd, None)
    else:
        flags["screen_homothetic"] = Flag(False, "not screen conformal", sc_flag.worst_residual, sc_flag.witness)
    cs_flag = _flag_from(None, [s.verdict for s in css], [s.residual for s in css], P)
    flags["coscreen_conformal"] = cs_flag
    sig = np.array([s.sigma for s in css])
    sigma_mean = float(np.mean(sig)) if cs_flag.value else None
    sig_abs = np.abs(sig)
    flags["coscreen_killing"] = _bool_flag([s.killing for s in css], sig_abs, P, "D = 0", "D != 0")
    closed_res = [s.closed_residual for s in css]
    flags["coscreen_closed_conformal"] = _bool_flag([s.closed_conformal for s in css], closed_res, P,
                                                    "rho = -sigma eta", "not closed conformal")
    flags["B_umbilical"] = _bool_flag([m.B_umbilical for m in ums], [m.H1_residual for m in ums], P,
                                      "B = H1 g", "B not proportional to g")
    flags["D_umbilical"] = _bool_flag([m.D_umbilical for m in ums], [m.H2_residual for m in ums], P,
                                      "D = H2 g", "D not proportional to g")
    geo_res = [max(abs(m.H1), abs(m.H2)) for m in ums]
    flags["totally_geodesic"] = _bool_flag([m.totally_geodesic for m in ums], geo_res, P,
                                           "B = D = 0", "B or D nonzero")
    flags["totally_umbilical"] = _bool_flag([m.totally_umbilical for m in ums],
                                            [max(m.H1_residual, m.H2_residual) for m in ums], P,
                                            "B and D umbilical", "not totally umbilical")

    mults = {pc.multiplicities for pc in pcs}
    notes = []
    consistent = len(mults) == 1
    if not consistent:
        notes.append("eigenvalue multiplicities differ between sample points")
    principal = {
        "multiplicities": list(pcs[0].multiplicities),
        "consistent": consistent,
        "constancy_residual": float(max(consts)),
    }

    te = two_eigenvalue_check(pcs[0].classes if consistent else [],
                              constancy_residual=principal["constancy_residual"],
                              screen_homothetic=bool(flags["screen_homothetic"].value),
                              coscreen_conformal=bool(cs_flag.value))
    if te.applicable and not consistent:
        te = TwoEigenvalueVerdict(False, "not applicable: eigenvalue classes differ between points")
    triple = {"detected": False}
    if te.applicable and te.holds:
        triple = _triple_product(curvs, pcs, phi_mean)
    flags["triple_product"] = Flag(triple["detected"], te.verdict,
                                   triple.get("leaf_curvature_residual", float("nan")), None)

    if flags["totally_geodesic"].value:
        branch = "totally geodesic"
    elif flags["totally_umbilical"].value:
        branch = "totally umbilical"
    elif triple["detected"]:
        branch = "lightlike triple product"
    else:
        branch = "none: " + te.verdict.replace("not applicable: ", "")

    return ClassificationReport(
        name=spec.name, route=route, points=P, per_point=rows, principal=principal, flags=flags,
        phi=phi_mean, sigma=sigma_mean, two_eigenvalue=te, triple_product=triple, branch=branch,
        residuals=_worst_residuals(residual_sets, P, tol), notes=notes,
    )


def _triple_product(curvs, pcs, phi):
    """Leaf data of ``C × M_λ × M_0``: predicted ``2φλ²`` against ``R*`` on ``T_λ``."""
    lams, pred, meas = [], [], []
    worst = 0.0
    r = None
    for curv, pc in zip(curvs, pcs):
        i = int(np.argmax([abs(v) for v, _ in pc.classes]))
        lam, r = pc.classes[i]
        start = sum(m for _, m in pc.classes[:i])
        p = 2.0 * phi * lam ** 2
        lams.append(lam)
        pred.append(p)
        if r >= 2:
            S = pc.vectors[:, start:start + r]
            k = leaf_curvature(curv, S[:, 0], S[:, 1])
            meas.append(k)
            worst = max(worst, abs(k - p) / max(1.0, abs(p)))
    out = {"detected": True, "lambda": lams, "r": r, "leaf_curvature": pred}
    if meas:
        out["leaf_curvature_measured"] = meas
        out["leaf_curvature_residual"] = worst
    return out
