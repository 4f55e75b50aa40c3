"""Induced curvature and residuals of the structure equations (flat ambient).

Conventions: ``R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z`` and, in the
chart basis, ``R(T_i,T_j)T_k = Rm[i,j,k,l] T_l``.  ``two_dtau[i,j]`` is
``2dτ(T_i,T_j) = ∂_iτ_j - ∂_jτ_i``.  Residuals are reported as
``max|lhs - rhs| / max(1, max|terms|)`` together with the tolerance tier
that applies to how many finite-difference derivatives enter the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .framing import FrameGauge, ImmersionSpec
from .gauss_weingarten import InducedObjects, induced_derivatives

__all__ = [
    "TIERS",
    "Residual",
    "ConnectionData",
    "CurvatureData",
    "connection",
    "induced_curvature",
    "ricci",
    "prop31_residuals",
    "identity_residuals",
    "cartan_sum",
    "cartan_sum_conformal",
    "cartan_pipeline",
    "theorem41_residual",
    "theorem41_from_objects",
    "leaf_curvature",
    "lemma31_iii_residual",
    "lemma32_2_residual",
    "eigen_projector",
    "screen_eigenframe",
]

TIERS = {"algebraic": 1e-10, "one_fd": 1e-7, "two_fd": 1e-5}


@dataclass
class Residual:
    """One identity check: scaled residual and the tolerance it must meet."""

    value: float
    tolerance: float
    tier: str

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)

    def to_dict(self) -> dict:
        return {"value": float(self.value), "tolerance": float(self.tolerance), "pass": self.passed}


def _res(diff, *terms, tier="two_fd", tol=None):
    scale = 1.0
    for t in terms:
        t = np.asarray(t)
        if t.size:
            scale = max(scale, float(np.max(np.abs(t))))
    val = float(np.max(np.abs(diff))) / scale if np.size(diff) else 0.0
    return Residual(val, TIERS[tier] if tol is None else tol, tier)


# -- connection and curvature ------------------------------------------------------

@dataclass
class ConnectionData:
    Gamma: np.ndarray
    omega: np.ndarray
    B: np.ndarray
    D: np.ndarray
    reconstruction_residual: float


def connection(obj: InducedObjects) -> ConnectionData:
    """Christoffel symbols ``Γ^k_ij`` of the induced connection and the screen form."""
    return ConnectionData(obj.Gamma, obj.omega, obj.B, obj.D, float(np.max(obj.gauss_residual)))


@dataclass
class CurvatureData:
    """Curvature at a point together with the objects it was built from."""

    Rm: np.ndarray
    Rstar: np.ndarray
    Ric: np.ndarray
    two_dtau: np.ndarray
    two_drho: np.ndarray
    two_dphi: np.ndarray
    obj: InducedObjects
    dobj: InducedObjects
    route: str


def _antisym_d(d1):
    """``∂_i a_j - ∂_j a_i`` from ``d1[i, j] = ∂_i a_j``."""
    return d1 - d1.T


def induced_curvature(spec: ImmersionSpec, u, route: str = "fd", H=None, richardson: bool = True,
                      gauge: Optional[FrameGauge] = None) -> CurvatureData:
    """Curvature of ``∇`` and of the screen connection ``∇*`` at ``u``."""
    if spec.k != 0:
        raise ValueError("geometric sampling requires a flat ambient (k = 0)")
    obj, d = induced_derivatives(spec, u, route=route, H=H, richardson=richardson, gauge=gauge)
    G, dG = obj.Gamma, d.Gamma  # dG[p, i, j, k] = ∂_p Γ^k_ij
    Rm = (dG - np.swapaxes(dG, 0, 1)
          + np.einsum("isl,jks->ijkl", G, G) - np.einsum("jsl,iks->ijkl", G, G))
    om, dom = obj.omega, d.omega  # dom[p, i, a, b] = ∂_p omega[i, a, b]
    Rstar = (dom - np.swapaxes(dom, 0, 1)
             + np.einsum("jab,ibc->ijac", om, om) - np.einsum("iab,jbc->ijac", om, om))
    Ric = np.einsum("pijp->ij", Rm)
    return CurvatureData(Rm, Rstar, Ric, _antisym_d(d.tau), _antisym_d(d.rho), _antisym_d(d.phi),
                         obj, d, route)


def ricci(curv: CurvatureData):
    """``(Ric, antisymmetry residual)``; the residual is ``Ric - Ric^T - 2dτ``."""
    Ric = curv.Ric
    return Ric, _res(Ric - Ric.T - curv.two_dtau, Ric, curv.two_dtau)


def _ricci_quasi_orthonormal(curv):
    o = curv.obj
    c, w, Gm, eta = o.xi_coeffs, o.screen_coeffs, o.G, o.eta
    # Σ_a g(R(W_a,X)Y, W_a) + ḡ(R(ξ,X)Y, N)
    RW = np.einsum("ap,pijl->aijl", w, curv.Rm)
    screen = np.einsum("aijl,lk,ak->ij", RW, Gm, w)
    rad = np.einsum("p,pijl,l->ij", c, curv.Rm, eta)
    return screen + rad


def _ricci_closed_form(o: InducedObjects):
    return (o.B * np.trace(o.AN) + o.D * np.trace(o.AL) - o.AN.T @ o.B
            - o.AL.T @ o.G @ o.AL + np.outer(o.rho, o.phi))


# -- covariant derivatives --------------------------------------------------------

def _nabla_form(dF, F, Gam):
    """``(∇_p F)_ij = ∂_p F_ij - Γ^s_pi F_sj - Γ^s_pj F_is``."""
    return dF - np.einsum("pis,sj->pij", Gam, F) - np.einsum("pjs,is->pij", Gam, F)


def _nabla_op(dA, A, Gam):
    """``(∇_p A)[l, j] = ∂_p A[l, j] + Γ^l_ps A[s, j] - A[l, s] Γ^s_pj``."""
    return dA + np.einsum("psl,sj->plj", Gam, A) - np.einsum("ls,pjs->plj", A, Gam)


def _alt(x):
    return x - x.T


# -- structure identities ----------------------------------------------------------

def prop31_residuals(curv: CurvatureData) -> dict:
    """The ten structure identities of a half-lightlike submanifold of flat space.

    Returns ``{name: Residual}``; ``item10_dtau_term`` is the size of the
    ``2dτ ξ`` contribution in item 10, reported on its own.
    """
    o, d = curv.obj, curv.dobj
    Gam = o.Gamma
    B, D, AN, AL, As = o.B, o.D, o.AN, o.AL, o.Astar
    tau, rho, phi, c = o.tau, o.rho, o.phi, o.xi_coeffs
    dt, dr, df = curv.two_dtau, curv.two_drho, curv.two_dphi
    outer = np.outer
    out = {}

    rhs1 = (np.einsum("jk,li->ijkl", B, AN) - np.einsum("ik,lj->ijkl", B, AN)
            + np.einsum("jk,li->ijkl", D, AL) - np.einsum("ik,lj->ijkl", D, AL))
    out["item1_gauss"] = _res(curv.Rm - rhs1, curv.Rm, rhs1, tier="one_fd")

    nB = _nabla_form(d.B, B, Gam)
    rhs2 = (np.einsum("ik,j->ijk", B, tau) - np.einsum("jk,i->ijk", B, tau)
            + np.einsum("ik,j->ijk", D, phi) - np.einsum("jk,i->ijk", D, phi))
    lhs2 = nB - np.swapaxes(nB, 0, 1)
    out["item2_codazzi_B"] = _res(lhs2 - rhs2, lhs2, rhs2, tier="two_fd")

    nD = _nabla_form(d.D, D, Gam)
    rhs3 = np.einsum("ik,j->ijk", B, rho) - np.einsum("jk,i->ijk", B, rho)
    lhs3 = nD - np.swapaxes(nD, 0, 1)
    out["item3_codazzi_D"] = _res(lhs3 - rhs3, lhs3, rhs3, tier="two_fd")

    lhs4 = _alt(B @ AN)
    rhs4 = outer(phi, rho) - outer(rho, phi) + dt
    out["item4_B_AN"] = _res(lhs4 - rhs4, lhs4, rhs4, tier="two_fd")

    nAN = _nabla_op(d.AN, AN, Gam)
    lhs5 = nAN - np.transpose(nAN, (2, 1, 0))  # [i,l,j] - [j,l,i]
    rhs5 = (np.einsum("i,lj->ilj", tau, AN) - np.einsum("j,li->ilj", tau, AN)
            + np.einsum("i,lj->ilj", rho, AL) - np.einsum("j,li->ilj", rho, AL))
    out["item5_codazzi_AN"] = _res(lhs5 - rhs5, lhs5, rhs5, tier="two_fd")

    lhs6 = _alt(D @ AN)
    rhs6 = outer(rho, tau) - outer(tau, rho) + dr
    out["item6_D_AN"] = _res(lhs6 - rhs6, lhs6, rhs6, tier="two_fd")

    nAL = _nabla_op(d.AL, AL, Gam)
    lhs7 = nAL - np.transpose(nAL, (2, 1, 0))
    rhs7 = np.einsum("i,lj->ilj", phi, AN) - np.einsum("j,li->ilj", phi, AN)
    out["item7_codazzi_AL"] = _res(lhs7 - rhs7, lhs7, rhs7, tier="two_fd")

    lhs8 = _alt(B @ AL)
    rhs8 = outer(tau, phi) - outer(phi, tau) + df
    out["item8_B_AL"] = _res(lhs8 - rhs8, lhs8, rhs8, tier="two_fd")

    lhs9 = _alt(D @ AL)
    rhs9 = outer(rho, phi) - outer(phi, rho)
    out["item9_D_AL"] = _res(lhs9 - rhs9, lhs9, rhs9, tier="one_fd")

    nAs = _nabla_op(d.Astar, As, Gam)
    lhs10 = nAs - np.transpose(nAs, (2, 1, 0))
    dtau_term = np.einsum("ij,l->ilj", dt, c)
    rhs10 = (-np.einsum("i,lj->ilj", phi, AL) + np.einsum("j,li->ilj", phi, AL)
             + np.einsum("j,li->ilj", tau, As) - np.einsum("i,lj->ilj", tau, As) - dtau_term)
    out["item10_codazzi_Astar"] = _res(lhs10 - rhs10, lhs10, rhs10, tier="two_fd")
    out["item10_dtau_term"] = float(np.max(np.abs(dtau_term)))
    return out


def identity_residuals(curv: CurvatureData) -> dict:
    """Non-metricity, screen compatibility, Ricci relations and related checks."""
    o, d = curv.obj, curv.dobj
    Gam, G, B, eta = o.Gamma, o.G, o.B, o.eta
    out = {}
    nG = _nabla_form(d.G, G, Gam)
    rhs = np.einsum("ij,k->ijk", B, eta) + np.einsum("ik,j->ijk", B, eta)
    out["non_metricity"] = _res(nG - rhs, nG, rhs, tier="one_fd")
    om = o.omega
    out["screen_metric"] = _res(om + np.swapaxes(om, 1, 2), om, tier="one_fd")
    Ric, r34 = ricci(curv)
    out["ricci_antisymmetry_dtau"] = r34
    qo = _ricci_quasi_orthonormal(curv)
    out["ricci_quasi_orthonormal"] = _res(Ric - qo, Ric, qo, tier="one_fd")
    cf = _ricci_closed_form(o)
    out["ricci_closed_form"] = _res(Ric - cf, Ric, cf, tier="one_fd")
    # ξ-component of R(X,Y)ξ
    c, w = o.xi_coeffs, o.screen_coeffs
    lhs = np.einsum("k,ijkl,l->ij", c, curv.Rm, eta)
    gAsW = np.einsum("ki,kl,al->ia", o.Astar, G, w)  # g(A* T_i, W_a)
    CA = o.C @ gAsW.T  # CA[j, i] = C(T_j, A* T_i)
    rhs = CA.T - CA - curv.two_dtau
    out["radical_curvature_xi_part"] = _res(lhs - rhs, lhs, rhs, tier="two_fd")
    # flat ambient: R(X,Y)ξ = φ(X) A_L Y - φ(Y) A_L X
    Rxi = np.einsum("k,ijkl->ijl", c, curv.Rm)
    rhs = np.einsum("i,lj->ijl", o.phi, o.AL) - np.einsum("j,li->ijl", o.phi, o.AL)
    out["radical_curvature"] = _res(Rxi - rhs, Rxi, rhs, tier="two_fd")
    # screen part of R(X,Y)PZ against the screen curvature
    RW = np.einsum("ap,ijpl,lk,bk->ijab", w, curv.Rm, G, w)
    gAW = np.einsum("ki,kl,bl->ib", o.Astar, G, w)  # g(A* T_i, W_b)
    rhs = curv.Rstar + np.einsum("ia,jb->ijab", o.C, gAW) - np.einsum("ja,ib->ijab", o.C, gAW)
    out["screen_gauss"] = _res(RW - rhs, RW, rhs, tier="two_fd")
    out["two_dtau_max"] = float(np.max(np.abs(curv.two_dtau)))
    return out


# -- Cartan sums -----------------------------------------------------------------------

def _distinct(a, b, tol):
    return abs(a - b) > tol * (1.0 + max(abs(a), abs(b)))


def cartan_sum(lambdas, C_diag, AL, k: float = 0.0, tol: float = 1e-6) -> np.ndarray:
    """``S_i = Σ_{λ_j≠λ_i} [k + λ_j C_ii + λ_i C_jj + AL_jj AL_ii - AL_ij²] / (λ_i - λ_j)``.

    ``AL`` is the screen block ``g(A_L E_i, E_j)`` in the eigenframe.  Pure
    arithmetic; any ``k`` is accepted and empty sums are zero.
    """
    lam = np.asarray(lambdas, dtype=float)
    Cd = np.asarray(C_diag, dtype=float)
    AL = np.asarray(AL, dtype=float)
    n = lam.size
    S = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if not _distinct(lam[i], lam[j], tol):
                continue
            num = k + lam[j] * Cd[i] + lam[i] * Cd[j] + AL[j, j] * AL[i, i] - AL[i, j] ** 2
            S[i] += num / (lam[i] - lam[j])
    return S


def cartan_sum_conformal(lambdas, phi: float, AL=None, k: float = 0.0, sigma=None,
                         tol: float = 1e-6) -> np.ndarray:
    """Screen-conformal form: numerator ``k + 2φλ_iλ_j + AL_jj AL_ii - AL_ij²``.

    With a conformal co-screen (``A_L = -σ`` on the screen) pass ``sigma``
    instead of ``AL``; the last two terms become ``σ²``.
    """
    lam = np.asarray(lambdas, dtype=float)
    n = lam.size
    if sigma is not None:
        AL = -float(sigma) * np.eye(n)
    AL = np.zeros((n, n)) if AL is None else np.asarray(AL, dtype=float)
    S = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if not _distinct(lam[i], lam[j], tol):
                continue
            num = k + 2.0 * phi * lam[i] * lam[j] + AL[j, j] * AL[i, i] - AL[i, j] ** 2
            S[i] += num / (lam[i] - lam[j])
    return S


def screen_eigenframe(o: InducedObjects):
    """Eigenvalues (descending) and screen-coefficient eigenvectors of ``A*_ξ``."""
    lam, S = np.linalg.eigh(o.Astar_screen)
    order = np.argsort(lam)[::-1]
    return lam[order], S[:, order]


def cartan_pipeline(o: InducedObjects, k: float = 0.0, phi: Optional[float] = None,
                    tol: float = 1e-6) -> dict:
    """Evaluate both Cartan sums from the induced objects at one point."""
    lam, S = screen_eigenframe(o)
    w, G = o.screen_coeffs, o.G
    Cs = w @ o.C  # C(W_a, W_b)
    ALs = w @ o.AL.T @ G @ w.T  # g(A_L W_a, W_b)
    E_C = S.T @ Cs @ S
    E_AL = S.T @ ALs @ S
    out = {"lambdas": lam, "S": cartan_sum(lam, np.diag(E_C), E_AL, k, tol)}
    if phi is not None:
        out["S_conformal"] = cartan_sum_conformal(lam, phi, E_AL, k, tol=tol)
    return out


def theorem41_residual(phi: float, tau_xi: float, B_screen, g_screen, sigma: float, k: float = 0.0) -> float:
    """Frobenius norm of ``2φ τ(ξ) B + (k + σ²) g`` on the screen block."""
    B_screen = np.asarray(B_screen, dtype=float)
    g_screen = np.asarray(g_screen, dtype=float)
    return float(np.linalg.norm(2.0 * phi * tau_xi * B_screen + (k + sigma ** 2) * g_screen))


def theorem41_from_objects(o: InducedObjects, phi: float, sigma: float, k: float = 0.0) -> float:
    w = o.screen_coeffs
    return theorem41_residual(phi, float(o.tau @ o.xi_coeffs), w @ o.B @ w.T, w @ o.G @ w.T, sigma, k)


# -- leaf curvature and the lemmas ---------------------------------------------------

def leaf_curvature(curv: CurvatureData, si, sj) -> float:
    """``g(R*(E_i,E_j)E_j, E_i)`` for screen vectors given by screen coefficients."""
    w = curv.obj.screen_coeffs
    si, sj = np.asarray(si, dtype=float), np.asarray(sj, dtype=float)
    ei, ej = si @ w, sj @ w
    return float(np.einsum("p,q,pqab,a,b->", ei, ej, curv.Rstar, sj, si))


def _screen_projector(o):
    w = o.screen_coeffs
    return w.T @ w @ o.G


def eigen_projector(o: InducedObjects, d: InducedObjects, lam: float, mu: float):
    """Chart projector onto the ``λ``-eigenspace of ``A*_ξ`` (two classes ``λ, μ``)
    and its chart derivatives.

    ``P_λ = (A* - μ P_S)/(λ - μ)`` where ``P_S`` projects onto the screen.
    """
    w, dw, G, dG = o.screen_coeffs, d.screen_coeffs, o.G, d.G
    PS = w.T @ w @ G
    dPS = (np.swapaxes(dw, 1, 2) @ w @ G + w.T @ dw @ G + w.T @ w @ dG)
    As, dAs = o.Astar, d.Astar
    P = (As - mu * PS) / (lam - mu)
    r_l = max(int(round(np.trace(P))), 1)
    Q = PS - P
    r_m = max(int(round(np.trace(Q))), 1)
    dlam = np.einsum("ab,pba->p", P, dAs) / r_l
    dmu = np.einsum("ab,pba->p", Q, dAs) / r_m
    dP = ((dAs - mu * dPS - dmu[:, None, None] * PS) / (lam - mu)
          - (As - mu * PS)[None] * ((dlam - dmu) / (lam - mu) ** 2)[:, None, None])
    return P, dP


def lemma31_iii_residual(curv: CurvatureData) -> float:
    """Worst asymmetry of ``g((∇_X A*)Y, Z)`` on the screen, over chart ``X``."""
    o, d = curv.obj, curv.dobj
    nA = _nabla_op(d.Astar, o.Astar, o.Gamma)
    w, G = o.screen_coeffs, o.G
    S = np.einsum("ai,pki,kl,bl->pab", w, nA, G, w)
    return float(np.max(np.abs(S - np.swapaxes(S, 1, 2))))


def lemma32_2_residual(curv: CurvatureData, lam: float, mu: float, rng=None, trials: int = 4) -> float:
    """``max |g(∇_X Y, Z)|`` for ``X, Z ∈ T_λ``, ``Y ∈ T_μ`` built as projector fields."""
    o, d = curv.obj, curv.dobj
    rng = np.random.default_rng(0) if rng is None else rng
    Pl, _ = eigen_projector(o, d, lam, mu)
    Pm, dPm = eigen_projector(o, d, mu, lam)
    m = o.m
    worst = 0.0
    for _ in range(trials):
        X = Pl @ rng.standard_normal(m)
        Z = Pl @ rng.standard_normal(m)
        Y0 = rng.standard_normal(m)
        Y = Pm @ Y0
        # ∇_p Y = ∂_p(P_μ) Y0 + Γ^k_ps Y^s
        nY = dPm @ Y0 + np.einsum("psk,s->pk", o.Gamma, Y)
        val = np.einsum("p,pk,kl,l->", X, nY, o.G, Z)
        scale = max(1.0, np.linalg.norm(X) * np.linalg.norm(Y0) * np.linalg.norm(Z))
        worst = max(worst, abs(val) / scale)
    return worst
