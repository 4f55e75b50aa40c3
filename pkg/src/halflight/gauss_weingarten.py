"""Induced objects of the Gauss–Weingarten formulas.

Given a frame ``(ξ, W, L, N)`` and its chart derivatives, every induced
quantity is read off by inner products or by decomposing an ambient vector
in the basis ``[T_1..T_m, N, L]``:

    ∂_i T_j = Γ^k_ij T_k + B_ij N + D_ij L
    ∂_i N   = -A_N T_i + τ_i N + ρ_i L
    ∂_i L   = -A_L T_i + φ_i N
    ∂_i ξ   = -A*_ξ T_i - τ_i ξ - φ_i L

Everything is expressed in the chart basis ``T_i`` unless stated otherwise:
bilinear forms as ``(m, m)`` arrays, 1-forms as length-``m`` arrays, and
operators as matrices whose column ``i`` holds the chart components of the
image of ``T_i``.  :meth:`InducedObjects.in_frame` converts to the
quasi-orthonormal frame ``{ξ, W_a}``.

Two derivative routes are available.  ``"fd"`` differentiates frames built
at stencil points (Richardson-extrapolated central differences);
``"jet"`` propagates jets through the construction and is exact up to
rounding.  They serve as oracles for each other.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import expr as E
from . import jet as J
from .framing import (
    ChartDomainError,
    FrameGauge,
    ImmersionSpec,
    build_frame,
    default_step,
    frame_field_derivatives,
    frame_jets,
    richardson_derivative,
    stencil_points,
)
from .semi_euclidean import inner

__all__ = [
    "InducedObjects",
    "induced_objects",
    "induced_derivatives",
    "second_forms",
    "transversal_forms",
    "coscreen_forms",
    "screen_shape",
    "screen_second_form",
    "relation_residuals",
    "gauge_rescale",
    "GaugeReport",
    "outer_step",
]


@dataclass
class InducedObjects:
    """Induced geometry at a point, chart frame.

    ``AN``, ``AL``, ``Astar`` are operator matrices (column ``i`` = image of
    ``T_i``); ``Astar_deriv`` is ``A*_ξ`` recomputed from ``∂ξ`` for
    cross-validation.  ``C`` is indexed (chart, screen); ``omega[i, a, b]``
    is ``ḡ(∂_i W_a, W_b)``, the screen connection form.  ``Gamma[i, j, k]``
    is ``Γ^k_ij``.  ``xi_coeffs`` / ``screen_coeffs`` express ``ξ`` and
    ``W_a`` in the chart basis.  ``gauss_residual`` measures
    ``|∂_i T_j - Γ^k_ij T_k - B_ij N - D_ij L|``.
    """

    B: np.ndarray
    D: np.ndarray
    C: np.ndarray
    tau: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    eta: np.ndarray
    AN: np.ndarray
    AL: np.ndarray
    Astar: np.ndarray
    Astar_deriv: np.ndarray
    Gamma: np.ndarray
    omega: np.ndarray
    G: np.ndarray
    xi_coeffs: np.ndarray
    screen_coeffs: np.ndarray
    N_coeff_dL: np.ndarray
    L_coeff_dxi: np.ndarray
    gauss_residual: np.ndarray

    @property
    def m(self) -> int:
        return self.B.shape[-1]

    @property
    def Astar_screen(self):
        """Screen block ``B(W_a, W_b)`` of ``A*_ξ`` (orthonormal screen)."""
        w = self.screen_coeffs
        return np.einsum("...ai,...ij,...bj->...ab", w, self.B, w)

    def frame_matrix(self):
        """Rows: chart coefficients of ``ξ, W_1, .., W_{m-1}``."""
        return np.concatenate([self.xi_coeffs[..., None, :], self.screen_coeffs], axis=-2)

    def in_frame(self) -> dict:
        """All objects in the quasi-orthonormal frame ``{ξ, W_a}``.

        Forms: ``Q F Q^T``; 1-forms: ``Q f``; operators: ``Q^{-T} A Q^T``.
        """
        Q = self.frame_matrix()
        Qi = np.linalg.inv(Q)
        form = lambda X: Q @ X @ np.swapaxes(Q, -1, -2)
        one = lambda x: np.einsum("...ai,...i->...a", Q, x)
        op = lambda A: np.swapaxes(Qi, -1, -2) @ A @ np.swapaxes(Q, -1, -2)
        return {
            "frame": "xi,W",
            "B": form(self.B),
            "D": form(self.D),
            "g": form(self.G),
            "C": np.einsum("...ai,...ib->...ab", Q, self.C),
            "tau": one(self.tau),
            "rho": one(self.rho),
            "phi": one(self.phi),
            "eta": one(self.eta),
            "AN": op(self.AN),
            "AL": op(self.AL),
            "Astar": op(self.Astar),
        }

    def map(self, fn) -> "InducedObjects":
        return InducedObjects(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})


# -- generic computation ----------------------------------------------------------

def _ip(x, y, sp):
    return inner(x, y, sp)


def _compute(T, F2, xi, W, L, N, dxi, dW, dL, dN, sp):
    """Core formulas; every argument may be an array or a jet."""
    m = T.shape[-2]
    ex = J.expand_dims
    F = J.stack([T[..., i, :] for i in range(m)] + [N, L], axis=-2)
    Finv = J.inv(F)

    B = _ip(F2, ex(ex(xi, -2), -2), sp)
    D = _ip(F2, ex(ex(L, -2), -2), sp)
    F2c = J.matmul(F2, ex(Finv, -3))
    Gamma = F2c[..., :m]
    recon = J.matmul(F2c, ex(F, -3)) - F2
    eta = _ip(T, ex(N, -2), sp)
    G = J.matmul(T * sp.eps, T.swapaxes(-1, -2))

    tau = _ip(dN, ex(xi, -2), sp)
    rho = _ip(dN, ex(L, -2), sp)
    phi = _ip(dL, ex(xi, -2), sp)
    cN = J.matmul(dN, Finv)
    AN = -(cN[..., :m].swapaxes(-1, -2))
    cL = J.matmul(dL, Finv)
    AL = -(cL[..., :m].swapaxes(-1, -2))

    C = _ip(dW, ex(ex(N, -2), -2), sp)
    omega = _ip(ex(dW, -2), ex(ex(W, -3), -4), sp)

    coeffs = J.matmul(J.stack([xi] + [W[..., a, :] for a in range(m - 1)], axis=-2), Finv)[..., :m]
    c = coeffs[..., 0, :]
    w = coeffs[..., 1:, :]
    Astar = J.matmul(J.matmul(w.swapaxes(-1, -2), w), B)
    cX = J.matmul(dxi, Finv)
    Astar_deriv = -(cX[..., :m].swapaxes(-1, -2)) - ex(c, -1) * ex(tau, -2)

    return dict(
        B=B, D=D, C=C, tau=tau, rho=rho, phi=phi, eta=eta, AN=AN, AL=AL,
        Astar=Astar, Astar_deriv=Astar_deriv, Gamma=Gamma, omega=omega, G=G,
        xi_coeffs=c, screen_coeffs=w, N_coeff_dL=cL[..., m], L_coeff_dxi=cX[..., m + 1],
        gauss_residual=recon,
    )


def _finish(d, as_value=True):
    vals = {k: (J.value(v) if as_value else v) for k, v in d.items()}
    if as_value:
        vals["gauss_residual"] = np.max(np.abs(vals["gauss_residual"]), axis=-1)
    return InducedObjects(**vals)


def outer_step(u) -> np.ndarray:
    """Step for differentiating FD-derived objects once more: ``1e-3 (1 + |u_i|)``."""
    return 1e-3 * (1.0 + np.abs(np.asarray(u, dtype=float)))


def _induced_fd(spec, U, gauge, h=None, richardson=True):
    U = np.asarray(U, dtype=float)
    if h is None:
        h = default_step(U)
    fp = build_frame(spec, U, gauge=gauge)
    der = frame_field_derivatives(spec, U, h=h, richardson=richardson, gauge=fp.gauge)
    fj = fp.f_jet
    F2 = np.moveaxis(fj.d2, (0, 1), (-3, -2))
    d = _compute(fp.T, F2, fp.xi, fp.W, fp.L, fp.N, der["dxi"], der["dW"], der["dL"], der["dN"], spec.ambient)
    return _finish(d), fp.gauge


def _induced_jet(spec, U, gauge):
    fj, T, xi, W, L, N, gauge = frame_jets(spec, U, order=2, gauge=gauge)
    m = spec.m
    part = lambda X: J.stack([X.partial(i) for i in range(m)], axis=-2)
    dW = J.stack([W.partial(i) for i in range(m)], axis=-3)
    F2 = J.stack([J.stack([fj.partial(i).partial(j) for j in range(m)], axis=-2) for i in range(m)], axis=-3)
    t1 = lambda X: X.truncate(1)
    d = _compute(t1(T), F2, t1(xi), t1(W), t1(L), t1(N), part(xi), dW, part(L), part(N), spec.ambient)
    return d, gauge


def induced_objects(spec: ImmersionSpec, u, route: str = "fd", h=None,
                    gauge: Optional[FrameGauge] = None, richardson: bool = True) -> InducedObjects:
    """All induced objects at a single chart point ``u``."""
    u = np.asarray(u, dtype=float)
    if route == "fd":
        return _induced_fd(spec, u, gauge, h, richardson)[0]
    if route == "jet":
        d, _ = _induced_jet(spec, u, gauge)
        return _finish(d)
    raise ValueError(f"unknown derivative route {route!r}")


def induced_derivatives(spec: ImmersionSpec, u, route: str = "fd", H=None,
                        gauge: Optional[FrameGauge] = None, richardson: bool = True):
    """Induced objects at ``u`` and their first chart derivatives.

    Returns ``(obj, dobj)`` where every field of ``dobj`` has an extra
    leading axis ``i`` holding ``∂_i`` of the field.  The FD route builds
    the objects on an outer stencil of step ``H`` (default
    :func:`outer_step`), each with its own inner stencil.
    """
    u = np.asarray(u, dtype=float)
    if route == "jet":
        d, _ = _induced_jet(spec, u, gauge)
        obj = _finish(d)
        dd = {k: (v.d1 if v.order >= 1 else np.zeros((spec.m,) + v.shape)) for k, v in d.items()}
        dd["gauss_residual"] = np.zeros((spec.m,) + obj.gauss_residual.shape)
        return obj, InducedObjects(**dd)
    if route != "fd":
        raise ValueError(f"unknown derivative route {route!r}")
    obj, gauge = _induced_fd(spec, u, gauge, richardson=richardson)
    if H is None:
        H = outer_step(u)
    pts = stencil_points(u, H)
    if not np.all(spec.contains(pts)):
        raise ChartDomainError("outer finite-difference stencil leaves the chart domain")
    st, _ = _induced_fd(spec, pts, gauge, richardson=richardson)
    dobj = st.map(lambda a: richardson_derivative(a, H, richardson))
    return obj, dobj


# -- operation-level views ------------------------------------------------------------

def second_forms(obj: InducedObjects):
    """``(B, D)`` in the chart frame."""
    return obj.B, obj.D


def transversal_forms(obj: InducedObjects):
    """``(τ, ρ, A_N)`` in the chart frame."""
    return obj.tau, obj.rho, obj.AN


def coscreen_forms(obj: InducedObjects):
    """``(φ, A_L)`` in the chart frame."""
    return obj.phi, obj.AL


def screen_shape(obj: InducedObjects):
    """Screen block of ``A*_ξ`` plus the algebraic-vs-derivative discrepancy."""
    scale = max(1.0, float(np.max(np.abs(obj.Astar))))
    cross = float(np.max(np.abs(obj.Astar - obj.Astar_deriv))) / scale
    return obj.Astar_screen, cross


def screen_second_form(obj: InducedObjects):
    """``C(T_i, W_a)``, indexed (chart, screen)."""
    return obj.C


def relation_residuals(obj: InducedObjects) -> dict:
    """Algebraic and one-derivative relations between the induced objects.

    Keys name the relation; values are worst absolute residuals.
    """
    G, eta, c, w = obj.G, obj.eta, obj.xi_coeffs, obj.screen_coeffs
    mx = lambda x: float(np.max(np.abs(x))) if np.size(x) else 0.0
    res = {}
    res["B symmetric"] = mx(obj.B - obj.B.T)
    res["D symmetric"] = mx(obj.D - obj.D.T)
    res["B(X,xi)=0"] = mx(obj.B @ c)
    res["D(X,xi)=-phi"] = mx(obj.D @ c + obj.phi)
    res["gauss decomposition"] = mx(obj.gauss_residual)
    res["g(A*X,Y)=B"] = mx(obj.Astar.T @ G - obj.B)
    res["g(A*X,N)=0"] = mx(obj.Astar.T @ eta)
    res["A* xi=0"] = mx(obj.Astar @ c)
    res["A* screen symmetric"] = mx(obj.Astar_screen - obj.Astar_screen.T)
    res["A* algebraic=derivative"] = mx(obj.Astar - obj.Astar_deriv)
    res["L-part of dxi=-phi"] = mx(obj.L_coeff_dxi + obj.phi)
    res["g(A_L X,Y)=D+phi eta"] = mx(obj.AL.T @ G - obj.D - np.outer(obj.phi, eta))
    res["g(A_L X,N)=rho"] = mx(obj.AL.T @ eta - obj.rho)
    res["N-part of dL=phi"] = mx(obj.N_coeff_dL - obj.phi)
    # C(X, PY) with PY the screen part of T_j: g(T_j, W_a) W_a
    gTW = G @ w.T
    res["g(A_N X,PY)=C"] = mx(obj.AN.T @ G - obj.C @ gTW.T)
    res["g(A_N X,N)=0"] = mx(obj.AN.T @ eta)
    return res


# -- gauge law ------------------------------------------------------------------

@dataclass
class GaugeReport:
    alpha: np.ndarray
    dlog_alpha: np.ndarray
    B: np.ndarray
    B_star: np.ndarray
    tau: np.ndarray
    tau_star: np.ndarray
    B_rel_residual: float
    tau_residual: float
    N_scale_residual: float


def gauge_rescale(spec: ImmersionSpec, alpha, u, route: str = "fd") -> GaugeReport:
    """Compare the objects for ``ξ`` and ``ξ* = α ξ`` at ``u``.

    Checks ``B* = α B`` (relative) and ``τ - τ* = d log α`` (absolute),
    and that the transversal rescales as ``N* = N / α``.
    """
    u = np.asarray(u, dtype=float)
    a_expr = E.parse(alpha) if isinstance(alpha, str) else alpha
    star = spec.rescaled(a_expr)
    fj = J.stack([E.eval_jet(e, u, 1) for e in spec.components], axis=-1)
    amb = [fj[..., a] for a in range(fj.shape[-1])]
    aj = E.eval_jet(a_expr, u, 1, ambient=amb)
    if np.any(aj.v == 0):
        raise ValueError("gauge factor vanishes at the sample point")
    o = induced_objects(spec, u, route)
    s = induced_objects(star, u, route)
    fp, fs = build_frame(spec, u), build_frame(star, u)
    dlog = aj.d1 / aj.v
    scale = max(float(np.max(np.abs(aj.v * o.B))), 1e-300)
    return GaugeReport(
        alpha=aj.v,
        dlog_alpha=dlog,
        B=o.B,
        B_star=s.B,
        tau=o.tau,
        tau_star=s.tau,
        B_rel_residual=float(np.max(np.abs(s.B - aj.v * o.B))) / scale if np.any(o.B) else float(np.max(np.abs(s.B))),
        tau_residual=float(np.max(np.abs(o.tau - s.tau - dlog))),
        N_scale_residual=float(np.max(np.abs(fs.N - fp.N / aj.v))),
    )
