"""Flat semi-Euclidean ambient space.

Inner products are ``sum_i eps_i x_i y_i`` with a diagonal signature.  All
helpers accept plain arrays (with arbitrary leading batch axes) or jets, so
the same code drives the numeric and the differentiated pipelines.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import jet as J

__all__ = [
    "AmbientSpace",
    "DegeneratePivotError",
    "inner",
    "gram",
    "null_kernel",
    "gram_schmidt_signed",
]


class DegeneratePivotError(ValueError):
    """Gram–Schmidt met a (numerically) null direction."""


@dataclass(frozen=True)
class AmbientSpace:
    """Flat ambient R^dim with diagonal metric ``diag(signature)``."""

    dim: int
    signature: tuple

    def __post_init__(self):
        sig = tuple(int(s) for s in self.signature)
        if len(sig) != self.dim:
            raise ValueError(f"signature has {len(sig)} entries, expected {self.dim}")
        if any(s not in (-1, 1) for s in sig):
            raise ValueError("signature entries must be -1 or +1")
        object.__setattr__(self, "signature", sig)

    @classmethod
    def lorentzian(cls, dim: int) -> "AmbientSpace":
        """``diag(-1, +1, ..., +1)``: first coordinate timelike."""
        return cls(dim, (-1,) + (1,) * (dim - 1))

    @property
    def index(self) -> int:
        return sum(1 for s in self.signature if s < 0)

    @property
    def eps(self) -> np.ndarray:
        return np.asarray(self.signature, dtype=float)

    def lower(self, x):
        """Apply the metric to the last axis (x -> eps * x)."""
        return x * self.eps


def _check_dim(x, sp):
    n = x.shape[-1]
    if n != sp.dim:
        raise ValueError(f"vector of length {n} in a {sp.dim}-dimensional ambient")


def inner(x, y, sp: AmbientSpace):
    """``sum_i eps_i x_i y_i`` over the last axis (batched, jet-aware)."""
    if not J.is_jet(x):
        x = np.asarray(x, dtype=float)
    if not J.is_jet(y):
        y = np.asarray(y, dtype=float)
    _check_dim(x, sp)
    _check_dim(y, sp)
    if J.is_jet(x):
        return J.inner_sum(x * (sp.eps * y) if not J.is_jet(y) else (x * sp.eps) * y)
    return J.inner_sum((sp.eps * x) * y)


def gram(vectors, sp: AmbientSpace):
    """Gram matrix ``G_ij = inner(v_i, v_j)``; ``vectors`` is ``(..., k, dim)``."""
    if not J.is_jet(vectors):
        vectors = np.asarray(vectors, dtype=float)
        if vectors.shape[-2] == 0:
            raise ValueError("gram of an empty family")
    _check_dim(vectors, sp)
    lowered = vectors * sp.eps
    return J.matmul(lowered, vectors.swapaxes(-1, -2))


def null_kernel(G, tol: float = 1e-9):
    """Rank and kernel basis of a symmetric matrix.

    Eigenvalues with ``|lambda| <= tol * max|lambda|`` count as zero.  Each
    kernel vector is Euclidean-unit with its first nonzero coefficient
    positive.  Returns ``(rank, K)`` with ``K`` of shape ``(n, n - rank)``.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("null_kernel expects a square matrix")
    n = G.shape[0]
    if n == 0:
        return 0, np.zeros((0, 0))
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    scale = np.max(np.abs(w))
    if scale == 0.0:
        zero = np.ones(n, dtype=bool)
    else:
        zero = np.abs(w) <= tol * scale
    K = V[:, zero]
    if K.shape[1] == 1:
        K = K * _sign_of_first(K[:, 0])
    elif K.shape[1] > 1:
        # deterministic basis of the kernel, independent of eigh's rotation
        K = _canonical_basis(K)
    return int(n - zero.sum()), K


def _sign_of_first(v, eps=1e-12):
    for c in v:
        if abs(c) > eps:
            return 1.0 if c > 0 else -1.0
    return 1.0


def _canonical_basis(K):
    # orthonormal basis adapted to the coordinate flag, for determinism
    Q, _ = np.linalg.qr(K @ K.T[:, : K.shape[0]])
    Q = Q[:, : K.shape[1]]
    return np.stack([q * _sign_of_first(q) for q in Q.T], axis=1)


def gram_schmidt_signed(vectors, sp: AmbientSpace, tol: float = 1e-10):
    """ḡ-orthonormalize ``vectors`` (rows) in order.

    Returns ``(E, signs)`` with ``inner(E_a, E_b) = signs_a * delta_ab``.
    Raises :class:`DegeneratePivotError` when a projected vector is null,
    i.e. the span is degenerate.  Works on jets.
    """
    if not J.is_jet(vectors):
        vectors = np.asarray(vectors, dtype=float)
    k = vectors.shape[-2]
    out, signs = [], []
    for a in range(k):
        u = vectors[..., a, :]
        for e, s in zip(out, signs):
            u = u - J.expand_dims(inner(u, e, sp) * s, -1) * e
        q = inner(u, u, sp)
        qv = J.value(q)
        scale = np.max(np.abs(J.value(vectors[..., a, :])) ** 2, axis=-1)
        if np.any(np.abs(qv) <= tol * np.maximum(scale, 1e-300)):
            raise DegeneratePivotError(
                f"vector {a} has (near-)null projection: inner = {np.min(np.abs(qv)):.3e}")
        sgn = np.sign(qv)
        if np.any(sgn != sgn.flat[0]):
            raise DegeneratePivotError(f"vector {a} changes causal character across the batch")
        s = float(sgn.flat[0])
        norm = J.sqrt(q * s)
        e = u / J.expand_dims(norm, -1)
        out.append(e)
        signs.append(s)
    E = J.stack(out, axis=-2) if J.is_jet(out[0]) else np.stack(out, axis=-2)
    return E, np.asarray(signs)
