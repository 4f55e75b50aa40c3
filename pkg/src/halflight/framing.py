"""Half-lightlike frame construction.

At each chart point ``u`` of an immersion ``f : U ⊂ R^m -> R^{m+2}_q`` we build

* the tangent basis ``T_i = ∂f/∂v_i``,
* the radical field ``ξ`` spanning ``TM ∩ TM^⊥``,
* an orthonormal (Riemannian) screen ``W_1 .. W_{m-1}``,
* the unit spacelike co-screen field ``L`` (normal, not radical),
* the null transversal ``N`` with ``ḡ(ξ, N) = 1`` orthogonal to screen and ``L``.

The construction is written once and runs on plain arrays or on jets, so
the frame and all its chart derivatives (up to order 2) can be obtained
exactly.  Linear-algebra choices that are only defined up to a discrete
gauge (which coefficient to pin, which tangent vector to drop) are fixed
at a reference point by a :class:`FrameGauge` and reused at nearby points;
this keeps the frame smooth across finite-difference stencils.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import expr as E
from . import jet as J
from .semi_euclidean import (
    AmbientSpace,
    DegeneratePivotError,
    gram,
    gram_schmidt_signed,
    inner,
    null_kernel,
)

__all__ = [
    "FrameError",
    "GeometricDegeneracy",
    "NotHalfLightlike",
    "SingularImmersion",
    "DegenerateScreen",
    "NoSpacelikeCoscreen",
    "FrameAlignmentError",
    "OverrideError",
    "ChartDomainError",
    "ImmersionSpec",
    "FrameGauge",
    "FramePoint",
    "immersion_jet",
    "choose_gauge",
    "build_frame",
    "frame_jets",
    "null_transversal",
    "stencil_points",
    "richardson_derivative",
    "default_step",
    "frame_field_derivatives",
]


# -- errors ------------------------------------------------------------------

class FrameError(ValueError):
    """Base class for frame construction failures."""


class GeometricDegeneracy(FrameError):
    """The immersion is not a half-lightlike submanifold at the point."""


class NotHalfLightlike(GeometricDegeneracy):
    def __init__(self, rank, m, point=None):
        self.rank, self.m, self.point = rank, m, point
        kind = "coisotropic (radical rank 2)" if rank == m - 2 else f"radical rank {m - rank}"
        super().__init__(f"induced metric has rank {rank} of {m}: {kind}, expected radical rank 1")


class SingularImmersion(GeometricDegeneracy):
    pass


class DegenerateScreen(GeometricDegeneracy):
    pass


class NoSpacelikeCoscreen(GeometricDegeneracy):
    pass


class FrameAlignmentError(GeometricDegeneracy):
    pass


class OverrideError(FrameError):
    """A user supplied frame field violates its defining condition."""

    def __init__(self, field_name, condition, value):
        self.field_name, self.condition, self.value = field_name, condition, value
        super().__init__(f"{field_name} override is {condition} (residual {value:.3e})")


class ChartDomainError(FrameError):
    """A (stencil) point lies outside the chart domain or the real domain."""


# -- specification -------------------------------------------------------------

def _parse_vec(items, m, n, what):
    if items is None:
        return None
    if len(items) != n:
        raise ValueError(f"{what} needs {n} components, got {len(items)}")
    out = []
    for s in items:
        e = E.parse(s) if isinstance(s, str) else s
        out.append(E.bind(e, m, n))
    return tuple(out)


@dataclass(frozen=True)
class ImmersionSpec:
    """Parametric immersion ``v -> (x_1(v), ..., x_{m+2}(v))`` with optional frames.

    Override fields hold ambient vectors whose components are expressions in
    the chart variables ``v_i`` and the ambient coordinates ``x_a`` (the
    latter evaluate to the immersion components).  ``radical_scale`` rescales
    whatever radical field is produced (default or override) by a nowhere
    vanishing function α, which is how gauge changes ``ξ -> αξ`` are made.
    """

    m: int
    ambient: AmbientSpace
    components: tuple
    domain: tuple
    radical_expr: Optional[tuple] = None
    screen_exprs: Optional[tuple] = None
    coscreen_expr: Optional[tuple] = None
    radical_scale: Optional[E.Expression] = None
    k: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        n = self.ambient.dim
        if n != self.m + 2:
            raise ValueError(f"ambient dimension {n} must equal m + 2 = {self.m + 2}")
        if len(self.components) != n:
            raise ValueError(f"immersion needs {n} components, got {len(self.components)}")
        if len(self.domain) != self.m:
            raise ValueError(f"domain box needs {self.m} intervals, got {len(self.domain)}")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError(f"empty domain interval ({lo}, {hi})")
        for e in self.components:
            E.bind(e, self.m)
        if self.screen_exprs is not None and len(self.screen_exprs) != self.m - 1:
            raise ValueError(f"screen override needs {self.m - 1} vectors")

    @classmethod
    def from_strings(cls, components, domain, *, signature=None, radical=None, screen=None,
                     coscreen=None, radical_scale=None, k=0.0, name="custom"):
        """Build a spec from expression strings (the config-file form)."""
        n = len(components)
        m = n - 2
        ambient = AmbientSpace(n, tuple(signature)) if signature is not None else AmbientSpace.lorentzian(n)
        comps = tuple(E.bind(E.parse(s) if isinstance(s, str) else s, m) for s in components)
        scr = None
        if screen is not None:
            scr = tuple(_parse_vec(w, m, n, "screen vector") for w in screen)
        scale = None
        if radical_scale is not None:
            scale = E.parse(radical_scale) if isinstance(radical_scale, str) else radical_scale
            E.bind(scale, m, n)
        return cls(
            m=m,
            ambient=ambient,
            components=comps,
            domain=tuple((float(a), float(b)) for a, b in domain),
            radical_expr=_parse_vec(radical, m, n, "radical"),
            screen_exprs=scr,
            coscreen_expr=_parse_vec(coscreen, m, n, "coscreen"),
            radical_scale=scale,
            k=float(k),
            name=name,
        )

    def to_config(self) -> dict:
        """JSON-ready dictionary; inverse of :meth:`from_config`."""
        vec = lambda v: None if v is None else [E.pretty(e) for e in v]
        return {
            "name": self.name,
            "components": [E.pretty(e) for e in self.components],
            "signature": list(self.ambient.signature),
            "domain": [list(d) for d in self.domain],
            "radical": vec(self.radical_expr),
            "screen": None if self.screen_exprs is None else [vec(w) for w in self.screen_exprs],
            "coscreen": vec(self.coscreen_expr),
            "radical_scale": None if self.radical_scale is None else E.pretty(self.radical_scale),
            "k": self.k,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "ImmersionSpec":
        return cls.from_strings(
            cfg["components"],
            cfg["domain"],
            signature=cfg.get("signature"),
            radical=cfg.get("radical"),
            screen=cfg.get("screen"),
            coscreen=cfg.get("coscreen"),
            radical_scale=cfg.get("radical_scale"),
            k=cfg.get("k", 0.0),
            name=cfg.get("name", "custom"),
        )

    def rescaled(self, alpha) -> "ImmersionSpec":
        """Same immersion with ``ξ`` replaced by ``α ξ`` (and hence ``N`` by ``N/α``)."""
        a = E.parse(alpha) if isinstance(alpha, str) else alpha
        E.bind(a, self.m, self.ambient.dim)
        if self.radical_scale is not None:
            a = E.BinOp("*", self.radical_scale, a)
        return replace(self, radical_scale=a, name=f"{self.name}*")

    def contains(self, u, strict=True) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo = np.array([d[0] for d in self.domain])
        hi = np.array([d[1] for d in self.domain])
        if strict:
            return np.all((u > lo) & (u < hi), axis=-1)
        return np.all((u >= lo) & (u <= hi), axis=-1)


# -- frame data ------------------------------------------------------------------

@dataclass(frozen=True)
class FrameGauge:
    """Discrete choices that make the frame a smooth function of ``u``.

    ``p``: tangent index pinned in the radical kernel (and dropped from the
    default screen); ``p0``: coefficient normalised to 1 in ``ξ``; ``q`` and
    ``r``: pivot columns for the co-screen and transversal solves.
    """

    p: int
    p0: Optional[int] = None
    q: Optional[int] = None
    r: Optional[int] = None


@dataclass
class FramePoint:
    """Frame at one chart point (or a batch, with leading batch axes).

    Vectors are ambient component arrays; ``W`` is ``(m-1, n)``.  ``xi_coeffs``
    and ``screen_coeffs`` give the fields in the chart basis ``T``.
    """

    u: np.ndarray
    f: np.ndarray
    T: np.ndarray
    xi: np.ndarray
    W: np.ndarray
    L: np.ndarray
    N: np.ndarray
    G: np.ndarray
    xi_coeffs: np.ndarray
    screen_coeffs: np.ndarray
    gauge: FrameGauge
    ambient: AmbientSpace
    f_jet: object = field(default=None, repr=False)

    def basis(self):
        """Ambient basis ``[T_1..T_m, N, L]`` as rows."""
        return _basis(self.T, self.N, self.L)

    def invariants(self) -> dict:
        """Residuals of the defining inner-product conditions."""
        return frame_invariants(self)


def _basis(T, N, L):
    return J.stack([T[..., i, :] for i in range(T.shape[-2])] + [N, L], axis=-2)


# -- evaluation helpers -------------------------------------------------------------

def _as_points(u):
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        raise ValueError("chart point must be a vector")
    return u


def immersion_jet(spec: ImmersionSpec, u, order: int = 3):
    """Jets of all immersion components at ``u``; value shape ``(..., n)``."""
    u = _as_points(u)
    if u.shape[-1] != spec.m:
        raise ValueError(f"chart point has {u.shape[-1]} coordinates, expected {spec.m}")
    comps = [E.eval_jet(e, u, order) for e in spec.components]
    return J.stack(comps, axis=-1)


def _eval_vector(exprs, u, order, fjet):
    ambient = [fjet[..., a] for a in range(fjet.shape[-1])]
    comps = [E.eval_jet(e, u, order, ambient=ambient) for e in exprs]
    out = J.stack(comps, axis=-1)
    return out if order > 0 else out.v


def _eval_scalar(e, u, order, fjet):
    ambient = [fjet[..., a] for a in range(fjet.shape[-1])]
    out = E.eval_jet(e, u, order, ambient=ambient)
    return out if order > 0 else out.v


def _tangents(fjet, order):
    """Tangent vectors ``(..., m, n)`` as jets of ``order`` (or arrays if 0)."""
    m = fjet.m
    if order == 0:
        return np.moveaxis(fjet.d1, 0, -2)
    return J.stack([fjet.partial(i).truncate(order) for i in range(m)], axis=-2)


def _first(x):
    x = J.value(x)
    while x.ndim > 1:
        x = x[0]
    return x


def _first_mat(x):
    x = J.value(x)
    while x.ndim > 2:
        x = x[0]
    return x


def _null_pivot(A):
    """Index of the largest entry of the right null vector of a wide matrix."""
    _, _, Vt = np.linalg.svd(A)
    return int(np.argmax(np.abs(Vt[-1])))


def _pinned_solve(A, pivot):
    """Solve ``A x = 0`` with ``x[pivot] = 1``; ``A`` is ``(..., k, k+1)``."""
    n = A.shape[-1]
    cols = [j for j in range(n) if j != pivot]
    As = A[..., :, cols]
    rhs = -A[..., :, pivot]
    sol = J.solve(As, J.expand_dims(rhs, -1))[..., 0]
    batch = J.value(rhs).shape[:-1]
    parts = []
    for j in range(n):
        parts.append(np.ones(batch) if j == pivot else sol[..., cols.index(j)])
    return J.stack(parts, axis=-1)


def _euclid(x, y):
    return J.inner_sum(x * y)


def _rel(x, scale):
    return float(np.max(np.abs(J.value(x)) / np.maximum(scale, 1e-300)))


# -- the generic frame core ----------------------------------------------------------------

def _frame_core(spec: ImmersionSpec, u, fjet, order: int, gauge: Optional[FrameGauge], tol: float):
    """Build (xi, W, L, N) as arrays (order 0) or jets of ``order``.

    Returns ``(xi, W, L, N, gauge)``.  When ``gauge`` is None the discrete
    choices are made at the first point of the batch.
    """
    sp = spec.ambient
    m = spec.m
    T = _tangents(fjet, order)
    Tv = J.value(T)
    Tscale = np.max(np.abs(Tv), axis=(-1, -2))
    if gauge is None:
        sv = np.linalg.svd(_first_mat(Tv), compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            raise SingularImmersion("tangent vectors are linearly dependent")

    # (a) radical field
    if spec.radical_expr is None:
        G = gram(T, sp)
        if gauge is None:
            rank, K = null_kernel(_first_mat(G), tol)
            if rank != m - 1:
                raise NotHalfLightlike(rank, m)
            kv = K[:, 0]
            p = int(np.argmax(np.abs(kv)))
            big = np.abs(kv) > 1e-6 * np.abs(kv).max()
            p0 = int(np.argmax(big))
            gauge = FrameGauge(p=p, p0=p0)
        p, p0 = gauge.p, gauge.p0
        idx = [i for i in range(m) if i != p]
        Gs = G[..., idx, :][..., :, idx]
        c = _pinned_solve_sym(Gs, G[..., idx, p], p, m)
        c = c / J.expand_dims(c[..., p0], -1)
        xi = J.matmul(J.expand_dims(c, -2), T)[..., 0, :]
    else:
        xi = _eval_vector(spec.radical_expr, u, order, fjet)
        xv = J.value(xi)
        scale = np.max(np.abs(xv), axis=-1)
        if np.any(scale == 0):
            raise OverrideError("radical", "zero", 0.0)
        r = _rel(inner(xv, xv, sp), scale ** 2)
        if r > tol:
            raise OverrideError("radical", "not null", r)
        coef, *_ = np.linalg.lstsq(np.swapaxes(_first_mat(Tv), -1, -2), _first(xv), rcond=None)
        resid = _first(xv) - coef @ _first_mat(Tv)
        r = float(np.max(np.abs(resid)) / _first(scale).max())
        if r > 1e3 * tol:
            raise OverrideError("radical", "not tangent", r)
        if gauge is None:
            gauge = FrameGauge(p=int(np.argmax(np.abs(coef))))
    if spec.radical_scale is not None:
        alpha = _eval_scalar(spec.radical_scale, u, order, fjet)
        if np.any(J.value(alpha) == 0):
            raise OverrideError("radical scale", "vanishing", 0.0)
        xi = xi * J.expand_dims(alpha, -1)

    # (b) screen
    if spec.screen_exprs is None:
        xx = _euclid(xi, xi)
        cand = []
        for i in range(m):
            if i == gauge.p:
                continue
            Ti = T[..., i, :]
            cand.append(Ti - J.expand_dims(_euclid(Ti, xi) / xx, -1) * xi)
        Wc = J.stack(cand, axis=-2)
    else:
        Wc = J.stack([_eval_vector(w, u, order, fjet) for w in spec.screen_exprs], axis=-2)
        Wv = J.value(Wc)
        xv = J.value(xi)
        for a in range(m - 1):
            wa = Wv[..., a, :]
            sc = np.max(np.abs(wa), axis=-1) * np.max(np.abs(xv), axis=-1)
            r = _rel(inner(wa, xv, sp), sc)
            if r > 1e3 * tol:
                raise OverrideError(f"screen W{a + 1}", "not orthogonal to the radical field", r)
            coef, *_ = np.linalg.lstsq(np.swapaxes(_first_mat(Tv), -1, -2), _first(wa), rcond=None)
            res = np.max(np.abs(_first(wa) - coef @ _first_mat(Tv))) / np.max(np.abs(_first(wa)))
            if res > 1e3 * tol:
                raise OverrideError(f"screen W{a + 1}", "not tangent", float(res))
    try:
        W, signs = gram_schmidt_signed(Wc, sp, tol)
    except DegeneratePivotError as exc:
        raise DegenerateScreen(f"screen candidates are degenerate: {exc}") from None
    if np.any(signs < 0):
        raise DegenerateScreen("screen distribution is not Riemannian (timelike direction found)")

    # (c) co-screen
    if spec.coscreen_expr is None:
        rows = [T[..., i, :] * sp.eps for i in range(m)] + [xi]
        A = J.stack(rows, axis=-2)
        if gauge.q is None:
            gauge = replace(gauge, q=_null_pivot(_first_mat(J.value(A))))
        Lraw = _pinned_solve(A, gauge.q)
        nn = inner(Lraw, Lraw, sp)
        if np.any(J.value(nn) <= tol * np.max(np.abs(J.value(Lraw)), axis=-1) ** 2):
            raise NoSpacelikeCoscreen("normal complement of the radical field is not spacelike")
        L = Lraw / J.expand_dims(J.sqrt(nn), -1)
    else:
        L = _eval_vector(spec.coscreen_expr, u, order, fjet)
        Lv = J.value(L)
        sc = np.max(np.abs(Lv), axis=-1)
        for i in range(m):
            r = _rel(inner(Lv, Tv[..., i, :], sp), sc * np.max(np.abs(Tv[..., i, :]), axis=-1))
            if r > 1e3 * tol:
                raise OverrideError("coscreen", f"not normal (against T{i + 1})", r)
        r = float(np.max(np.abs(J.value(inner(Lv, Lv, sp)) - 1.0)))
        if r > 1e3 * tol:
            raise OverrideError("coscreen", "not unit", r)

    # (d) null transversal
    rows = [W[..., a, :] * sp.eps for a in range(m - 1)] + [L * sp.eps, xi]
    A = J.stack(rows, axis=-2)
    if gauge.r is None:
        gauge = replace(gauge, r=_null_pivot(_first_mat(J.value(A))))
    V = _pinned_solve(A, gauge.r)
    N = null_transversal(xi, V, sp)
    return xi, W, L, N, gauge


def _pinned_solve_sym(Gs, g_col, p, m):
    """Kernel coefficients ``c`` of the Gram matrix with ``c[p] = 1``."""
    sol = J.solve(Gs, J.expand_dims(-g_col, -1))[..., 0]
    batch = J.value(g_col).shape[:-1]
    idx = [i for i in range(m) if i != p]
    parts = [np.ones(batch) if i == p else sol[..., idx.index(i)] for i in range(m)]
    return J.stack(parts, axis=-1)


def null_transversal(xi, V, sp: AmbientSpace):
    """``N = [V - (ḡ(V,V) / 2ḡ(V,ξ)) ξ] / ḡ(V,ξ)`` for ``V`` in ``(S ⊕ L)^⊥``.

    Any ``V`` of that 2-plane with ``ḡ(V, ξ) ≠ 0`` yields the same ``N``.
    """
    gvx = inner(V, xi, sp)
    if np.any(np.abs(J.value(gvx)) < 1e-300):
        raise GeometricDegeneracy("auxiliary vector is orthogonal to the radical field")
    gvv = inner(V, V, sp)
    coef = gvv / (2.0 * gvx)
    return (V - J.expand_dims(coef, -1) * xi) / J.expand_dims(gvx, -1)


def _coefficients(vectors, T, N, L):
    """Chart coefficients of tangent ``vectors`` (..., k, n) via the frame basis."""
    F = _basis(T, N, L)
    X = J.matmul(vectors, J.inv(F))
    return X[..., : T.shape[-2]]


def _check_domain(spec, u):
    if not np.all(spec.contains(u)):
        bad = np.asarray(u)[~spec.contains(u)] if np.asarray(u).ndim > 1 else np.asarray(u)
        raise ChartDomainError(f"point(s) outside the chart domain box: {np.atleast_2d(bad)[0].tolist()}")


def choose_gauge(spec: ImmersionSpec, u, tol: float = 1e-9) -> FrameGauge:
    """Gauge fixed at ``u`` (first point of a batch)."""
    u = _as_points(u)
    fj = _eval_f(spec, u, 1)
    return _frame_core(spec, u, fj, 0, None, tol)[4]


def _eval_f(spec, u, order):
    try:
        return immersion_jet(spec, u, order)
    except (E.ExprDomainError, J.JetDomainError) as exc:
        raise ChartDomainError(str(exc)) from exc


def build_frame(spec: ImmersionSpec, u, tol: float = 1e-9, gauge: Optional[FrameGauge] = None,
                check_domain: bool = True) -> FramePoint:
    """Frame at ``u`` (shape ``(m,)`` or a batch ``(P, m)``) as plain arrays."""
    u = _as_points(u)
    if check_domain:
        _check_domain(spec, u)
    fj = _eval_f(spec, u, 2)
    try:
        xi, W, L, N, gauge = _frame_core(spec, u, fj, 0, gauge, tol)
    except (E.ExprDomainError, J.JetDomainError) as exc:
        raise ChartDomainError(str(exc)) from exc
    T = np.moveaxis(fj.d1, 0, -2)
    coeffs = _coefficients(J.stack([xi] + [W[..., a, :] for a in range(spec.m - 1)], axis=-2), T, N, L)
    return FramePoint(
        u=u, f=fj.v, T=T, xi=xi, W=W, L=L, N=N, G=gram(T, spec.ambient),
        xi_coeffs=coeffs[..., 0, :], screen_coeffs=coeffs[..., 1:, :],
        gauge=gauge, ambient=spec.ambient, f_jet=fj,
    )


def frame_jets(spec: ImmersionSpec, u, order: int = 2, tol: float = 1e-9,
               gauge: Optional[FrameGauge] = None):
    """Frame fields as jets of ``order`` (at most 2) from order-``order+1`` immersion jets.

    Returns ``(fjet, T, xi, W, L, N, gauge)``.
    """
    if not 1 <= order <= 2:
        raise ValueError("frame jets are available to order 1 or 2")
    u = _as_points(u)
    _check_domain(spec, u)
    fj = _eval_f(spec, u, order + 1)
    if gauge is None:
        gauge = _frame_core(spec, u, fj, 0, None, tol)[4]
    xi, W, L, N, gauge = _frame_core(spec, u, fj, order, gauge, tol)
    return fj, _tangents(fj, order), xi, W, L, N, gauge


def frame_invariants(fp: FramePoint) -> dict:
    """Worst absolute residual of each defining condition of the frame."""
    sp = fp.ambient
    ip = lambda a, b: inner(a, b, sp)
    m = fp.T.shape[-2]
    W = fp.W
    res = {}
    res["g(xi,xi)=0"] = np.abs(ip(fp.xi, fp.xi))
    res["g(xi,W)=0"] = np.abs(ip(fp.xi[..., None, :], W))
    # xi tangent: component of xi outside span(T)
    recon = np.einsum("...i,...in->...n", fp.xi_coeffs, fp.T)
    res["xi tangent"] = np.abs(recon - fp.xi)
    GW = np.einsum("...an,...bn->...ab", W * sp.eps, W)
    res["g(W,W)=delta"] = np.abs(GW - np.eye(m - 1))
    res["g(L,L)=1"] = np.abs(ip(fp.L, fp.L) - 1.0)
    res["g(L,T)=0"] = np.abs(ip(fp.L[..., None, :], fp.T))
    res["g(L,N)=0"] = np.abs(ip(fp.L, fp.N))
    res["g(xi,N)=1"] = np.abs(ip(fp.xi, fp.N) - 1.0)
    res["g(N,N)=0"] = np.abs(ip(fp.N, fp.N))
    res["g(N,W)=0"] = np.abs(ip(fp.N[..., None, :], W))
    # decomposition TM = Rad ⊕ S: T_i rebuilt from (xi, W)
    Q = np.concatenate([fp.xi_coeffs[..., None, :], fp.screen_coeffs], axis=-2)
    frame = np.concatenate([fp.xi[..., None, :], W], axis=-2)
    res["T in span(xi,W)"] = np.abs(np.linalg.inv(Q) @ frame - fp.T)
    return {k: float(np.max(v)) if np.size(v) else 0.0 for k, v in res.items()}


# -- finite differences ---------------------------------------------------------------

def default_step(u) -> np.ndarray:
    """Per-coordinate central-difference step ``1e-4 (1 + |u_i|)``."""
    return 1e-4 * (1.0 + np.abs(np.asarray(u, dtype=float)))


def stencil_points(u, h):
    """Points ``u ± h_i e_i, u ± h_i/2 e_i`` as ``(..., 4m, m)``.

    Ordering: for coordinate ``i`` the block ``[+h, -h, +h/2, -h/2]``.
    """
    u = np.asarray(u, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), u.shape)
    m = u.shape[-1]
    offs = []
    for i in range(m):
        for s in (1.0, -1.0, 0.5, -0.5):
            d = np.zeros(u.shape)
            d[..., i] = s * h[..., i]
            offs.append(d)
    return u[..., None, :] + np.stack(offs, axis=-2)


def richardson_derivative(values, h, richardson: bool = True):
    """Chart derivatives from stencil values.

    ``values`` has shape ``(..., 4m, *S)`` in :func:`stencil_points` order and
    ``h`` shape ``(..., m)``; the result is ``(..., m, *S)``.  With
    Richardson extrapolation the error is O(h^4), otherwise O(h^2).
    """
    h = np.asarray(h, dtype=float)
    m = h.shape[-1]
    lead = h.ndim - 1
    v = values.reshape(values.shape[:lead] + (m, 4) + values.shape[lead + 1:])
    tail = (None,) * (values.ndim - lead - 1)
    hh = h[(...,) + tail]
    take = lambda k: v[(slice(None),) * lead + (slice(None), k)]
    d_h = (take(0) - take(1)) / (2.0 * hh)
    if not richardson:
        return d_h
    d_h2 = (take(2) - take(3)) / hh
    return (4.0 * d_h2 - d_h) / 3.0


def _align_check(center, stencil, name, rel_tol=0.2):
    """Frame continuity across the stencil (catches gauge jumps)."""
    c = center[..., None, :, :] if center.ndim == stencil.ndim - 1 else center
    diff = np.max(np.abs(stencil - c), axis=-1)
    scale = np.max(np.abs(c), axis=-1)
    worst = float(np.max(diff / np.maximum(scale, 1e-300)))
    if worst > rel_tol:
        raise FrameAlignmentError(f"{name} changes by {worst:.2e} (relative) within the stencil")


def frame_field_derivatives(spec: ImmersionSpec, u, h=None, richardson: bool = True,
                            gauge: Optional[FrameGauge] = None, tol: float = 1e-9) -> dict:
    """``∂_i`` of ``xi, W, L, N`` at ``u`` by (Richardson) central differences.

    Returns a dict with arrays ``dxi (m,n)``, ``dW (m,m-1,n)``, ``dL``, ``dN``
    (plus leading batch axes for batched ``u``) and the gauge used.
    """
    u = _as_points(u)
    if h is None:
        h = default_step(u)
    center = build_frame(spec, u, tol=tol, gauge=gauge)
    gauge = center.gauge
    pts = stencil_points(u, h)
    if not np.all(spec.contains(pts)):
        raise ChartDomainError("finite-difference stencil leaves the chart domain")
    flat = pts.reshape(-1, spec.m)
    st = build_frame(spec, flat, tol=tol, gauge=gauge, check_domain=False)
    out = {"gauge": gauge}
    for name in ("xi", "W", "L", "N"):
        vals = getattr(st, name)
        vals = vals.reshape(pts.shape[:-1] + vals.shape[1:])
        cval = getattr(center, name)
        cv = cval[..., None, :] if name != "W" else cval[..., None, :, :]
        _align_check(np.broadcast_to(cv, vals.shape).reshape(vals.shape), vals, name)
        out["d" + name] = richardson_derivative(vals, h, richardson)
    return out
